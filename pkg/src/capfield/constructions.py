"""Explicit cap-sum constructions: limsup families, saturating functions,
prescribed-divergence functions and their perturbations.

All infinite sums are truncated at a finite level which is stored in the
``meta['truncation']`` entry of the resulting :class:`CapFunction`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .poisson import CapFunction, l1_norm
from .sphere import Cap, GaugeSpec, Net, cap_measure, sample_in_cap

DEFAULT_TRUNCATION = {1: 14, 2: 10}


def _net_map(nets: Sequence[Net]) -> dict[int, Net]:
    return {net.level: net for net in nets}


def _require(nets: dict[int, Net], level: int) -> Net:
    if level not in nets:
        raise KeyError(f"net level {level} is not available (have {sorted(nets)})")
    return nets[level]


def coarse_level(n: int, alpha: float) -> int:
    """N_{n,alpha} = floor(n/alpha) + 1."""
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    # guard against n/alpha landing a rounding error below an integer
    return int(math.floor(n / alpha + 1e-12)) + 1


@dataclass(frozen=True)
class LimsupLevel:
    """Level n of the family: caps of radius 2^-n at the points of R_N."""

    d: int
    alpha: float
    n: int
    N: int
    centers: np.ndarray

    @property
    def radius(self) -> float:
        return 2.0 ** (-self.n)

    @property
    def caps(self) -> list[Cap]:
        return [Cap(c, self.radius) for c in self.centers]

    def measure_bound(self) -> float:
        """card(R_N) * sigma(cap): an upper bound for the measure of the union."""
        return len(self.centers) * cap_measure(self.d, self.radius)

    def contains(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        from scipy.spatial import cKDTree
        tree = cKDTree(self.centers)
        dist, _ = tree.query(xi, k=1)
        return dist < self.radius

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Pick a cap uniformly, then a point sigma-uniformly inside it."""
        idx = rng.integers(0, len(self.centers), size=count)
        out = np.empty((count, self.d + 1))
        for i, j in enumerate(idx):
            out[i] = sample_in_cap(self.centers[j], self.radius, 1, rng)[0]
        return out


def limsup_cover_sets(nets: Sequence[Net], alpha: float, n: int) -> LimsupLevel:
    """D_{n,alpha}: union of the 2^-n caps centered on R_{N_{n,alpha}}."""
    N = coarse_level(n, alpha)
    net = _require(_net_map(nets), N)
    return LimsupLevel(net.d, float(alpha), n, N, net.points)


def saturating_unnormalized(nets: Sequence[Net], d: int, n: int) -> CapFunction:
    """(1/(n+1)) sum_{N=1}^{n+1} sum_{x in R_N} 2^((n-N)d) 1_{kappa(x, 2 * 2^-n)}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    by_level = _net_map(nets)
    centers, weights = [], []
    for N in range(1, n + 2):
        net = _require(by_level, N)
        if net.d != d:
            raise ValueError("net dimension does not match d")
        centers.append(net.points)
        weights.append(np.full(len(net.points), 2.0 ** ((n - N) * d) / (n + 1)))
    centers = np.vstack(centers)
    weights = np.concatenate(weights)
    radii = np.full(len(weights), min(2.0, 2.0 * 2.0 ** (-n)))
    return CapFunction(d, centers, radii, weights, meta={"kind": "saturating", "n": n})


def saturating_function(nets: Sequence[Net], d: int, n: int) -> CapFunction:
    """f_n: the multi-scale cap sum above normalized to unit L^1 norm."""
    raw = saturating_unnormalized(nets, d, n)
    norm = l1_norm(raw)
    f = raw * (1.0 / norm)
    f.meta.update(raw.meta)
    f.meta["raw_l1"] = norm
    return f


def residual_witness(g: CapFunction, nets: Sequence[Net], n: int) -> CapFunction:
    """h_n = g + f_n / n."""
    fn = saturating_function(nets, g.d, n) * (1.0 / n)
    h = g + fn
    h.meta["kind"] = "residual_witness"
    h.meta["n"] = n
    return h


def geometric_witness(nets: Sequence[Net], d: int, n_max: int,
                      levels: Sequence[int] | None = None) -> CapFunction:
    """W = sum_k 2^-k f_{n_k} with n_k = 2^k (k >= 1) up to ``n_max``.

    ``levels`` overrides the default dyadic ladder; the k-th entry receives
    the weight 2^-k.
    """
    if levels is None:
        levels = [2 ** k for k in range(1, 64) if 2 ** k <= n_max]
    levels = list(levels)
    if not levels:
        raise ValueError("no admissible saturating level below n_max")
    total = CapFunction.zero(d)
    for k, n in enumerate(levels, start=1):
        total = total + saturating_function(nets, d, n) * (2.0 ** (-k))
    total.meta = {"kind": "geometric_witness", "levels": levels, "truncation": n_max}
    return total


# ---------------------------------------------------------------------------
# prescribed divergence


@dataclass
class CoveringSequence:
    """Coverings R_1, R_2, ... of a target set, plus the divergence weights omega."""

    d: int
    coverings: list[list[Cap]]
    omega: Callable[[int], float] = field(default=lambda n: float(n))

    def buckets(self) -> dict[int, list[Cap]]:
        """C_n = distinct caps with 2^-(n+1) < radius <= 2^-n."""
        out: dict[int, dict[tuple, Cap]] = {}
        for cover in self.coverings:
            for cap in cover:
                if cap.radius > 1.0:
                    raise ValueError("caps of radius > 1 have no dyadic bucket")
                n = int(math.floor(-math.log2(cap.radius) + 1e-12))
                key = (tuple(np.round(cap.center, 15)), cap.radius)
                out.setdefault(n, {})[key] = cap
        return {n: list(v.values()) for n, v in sorted(out.items())}

    def mass_profile(self, gauge: GaugeSpec) -> list[float]:
        """sum over R_j of phi(radius), per j."""
        return [float(sum(gauge.phi(c.radius) for c in cover)) for cover in self.coverings]

    def satisfies_mass_bound(self, gauge: GaugeSpec) -> bool:
        """Whether sum_{R_j} phi <= 2^-j and every radius <= 2^-j."""
        for j, cover in enumerate(self.coverings, start=1):
            if any(c.radius > 2.0 ** (-j) for c in cover):
                return False
            if sum(gauge.phi(c.radius) for c in cover) > 2.0 ** (-j) * (1 + 1e-12):
                return False
        return True


def point_covering(point, levels: int) -> CoveringSequence:
    """R_j = {kappa(point, 2^-j)}, j = 1..levels."""
    p = np.asarray(point, dtype=float)
    return CoveringSequence(p.size - 1, [[Cap(p, 2.0 ** (-j))] for j in range(1, levels + 1)])


def gauge_compatible(gauge: GaugeSpec, d: int) -> bool:
    """tau(s) s^d / phi(s) bounded as s -> 0."""
    slack = d - gauge.beta - gauge.gamma
    if gauge.kind == "power":
        return slack >= -1e-12
    return slack > 1e-12


def omega_series_terms(cov: CoveringSequence, gauge: GaugeSpec) -> dict[int, float]:
    """n -> omega_n * sum_{kappa in C_n} phi(radius)."""
    return {n: cov.omega(n) * float(sum(gauge.phi(c.radius) for c in caps))
            for n, caps in cov.buckets().items()}


def series_converges(terms: Sequence[float], window: int = 4) -> bool:
    """Ratio test on the tail of a nonnegative series (mean of the last ratios < 1)."""
    t = np.asarray([x for x in terms if x > 0], dtype=float)
    if len(t) < 3:
        return True
    ratios = t[1:] / t[:-1]
    return bool(np.mean(ratios[-window:]) < 1.0)


def divergence_function(cov: CoveringSequence, gauge: GaugeSpec,
                        n_max: int | None = None) -> CapFunction:
    """f = sum_n sum_{kappa in C_n} omega_n tau(2^-n) 1_{kappa(center, 2 * 2^-n)}, n <= n_max."""
    d = cov.d
    if n_max is None:
        n_max = DEFAULT_TRUNCATION.get(d, 8)
    if not gauge_compatible(gauge, d):
        raise ValueError(
            f"gauge incompatible: tau(s) s^{d} / phi(s) is unbounded (beta={gauge.beta}, gamma={gauge.gamma})")
    terms = omega_series_terms(cov, gauge)
    if not series_converges([terms[n] for n in sorted(terms)]):
        raise ValueError("omega-weighted covering series does not converge")
    centers, radii, weights = [], [], []
    for n, caps in cov.buckets().items():
        if n > n_max or n < 1:
            continue
        w = cov.omega(n) * float(gauge.tau(2.0 ** (-n)))
        for cap in caps:
            centers.append(cap.center)
            radii.append(min(2.0, 2.0 * 2.0 ** (-n)))
            weights.append(w)
    meta = {"kind": "divergence", "beta": gauge.beta, "gauge": gauge.kind, "truncation": n_max}
    if not centers:
        f = CapFunction.zero(d)
        f.meta = meta
        return f
    return CapFunction(d, np.array(centers), radii, weights, meta=meta)
