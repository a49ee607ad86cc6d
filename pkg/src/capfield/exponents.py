"""Radial divergence exponents, level sets, box counting and the spectrum."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .poisson import CapFunction, QuadratureError, poisson_values
from .sphere import Cap, Net, as_point


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class RadialProfile:
    """Values of P[f](r_n y) on the dyadic ladder r_n = 1 - 2^-n."""

    y: np.ndarray
    ns: np.ndarray
    values: np.ndarray
    failed: np.ndarray

    @property
    def rs(self) -> np.ndarray:
        return 1.0 - 2.0 ** (-self.ns.astype(float))

    @property
    def rows(self) -> list[tuple[int, float, float]]:
        return [(int(n), float(r), float(v)) for n, r, v in zip(self.ns, self.rs, self.values)]


def _check_range(f: CapFunction, n_min: int, n_max: int) -> None:
    if n_min < 1 or n_max < n_min:
        raise ValueError("need 1 <= n_min <= n_max")
    trunc = f.meta.get("truncation")
    if trunc is not None and n_max > trunc:
        raise ValueError(f"n_max={n_max} exceeds the truncation level {trunc} of f")


def _profile_block(f: CapFunction, ys: np.ndarray, ns: Sequence[int]) -> np.ndarray:
    out = np.empty((len(ns), len(ys)))
    for i, n in enumerate(ns):
        out[i] = poisson_values(f, 1.0 - 2.0 ** (-n), ys)
    return out


def profile_matrix(f: CapFunction, ys, ns: Sequence[int], jobs: int = 1) -> np.ndarray:
    """Array of shape (len(ns), len(ys)) with P[f](r_n y).

    With ``jobs > 1`` the directions are split across worker processes;
    every entry is computed by the same per-site code path, so the result
    does not depend on the number of workers.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    ns = list(ns)
    if jobs <= 1 or len(ys) < 2 * jobs:
        return _profile_block(f, ys, ns)
    from concurrent.futures import ProcessPoolExecutor
    chunks = np.array_split(ys, jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_profile_block, [f] * len(chunks), chunks, [ns] * len(chunks)))
    return np.concatenate(parts, axis=1)


def radial_profile(f: CapFunction, y, n_min: int, n_max: int) -> RadialProfile:
    """One quadrature-backed value per dyadic radius; failing rows are flagged as NaN."""
    _check_range(f, n_min, n_max)
    y = as_point(y)
    ns = np.arange(n_min, n_max + 1)
    values = np.empty(len(ns))
    failed = np.zeros(len(ns), dtype=bool)
    for i, n in enumerate(ns):
        try:
            values[i] = poisson_values(f, 1.0 - 2.0 ** (-n), y[None, :])[0]
        except QuadratureError:
            values[i] = np.nan
            failed[i] = True
    return RadialProfile(y, ns, values, failed)


# ---------------------------------------------------------------------------
# exponents


def beta_hat_from_values(values: np.ndarray, ns: Sequence[int], n_tail: int = 6,
                         d: int | None = None, clamp: bool = True) -> np.ndarray:
    """Tail-window limsup proxy max_n log2|v_n| / n, column-wise.

    ``values`` has one row per n.  Zero rows count as -inf; a column that is
    zero throughout the window gets 0.  NaN rows are ignored.
    """
    values = np.asarray(values, dtype=float)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[:, None]
    ns = np.asarray(ns, dtype=float)
    if len(ns) == 0:
        raise ValueError("empty profile")
    if len(ns) < n_tail:
        raise ValueError(f"profile has {len(ns)} rows, fewer than n_tail={n_tail}")
    tail_v = np.abs(values[-n_tail:])
    tail_n = ns[-n_tail:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = np.where(tail_v > 0, np.log2(tail_v) / tail_n, -np.inf)
    expo = np.where(np.isnan(expo), -np.inf, expo)
    out = expo.max(axis=0)
    out = np.where(np.isneginf(out), 0.0, out)
    if clamp:
        if d is None:
            raise ValueError("clamping needs d")
        out = np.clip(out, 0.0, d)
    return out[0] if squeeze else out


def beta_hat(profile: RadialProfile, n_tail: int = 6, d: int | None = None,
             clamp: bool = True) -> float:
    """Finite-scale limsup of log|P[f](r_n y)| / (-log(1 - r_n)), clamped to [0, d]."""
    if d is None:
        d = profile.y.size - 1
    return float(beta_hat_from_values(profile.values, profile.ns, n_tail, d, clamp))


def level_set(f: CapFunction, beta: float, tol: float, probe_net: Net | np.ndarray,
              n_range: tuple[int, int], n_tail: int = 6,
              exponents: np.ndarray | None = None) -> np.ndarray:
    """Probe points whose beta_hat lies within ``tol`` of ``beta``.

    Precomputed exponents (one per probe point) may be passed to avoid
    re-evaluating the profiles when several betas share the probes.
    """
    probes = probe_net.points if isinstance(probe_net, Net) else np.atleast_2d(probe_net)
    if exponents is None:
        exponents = probe_exponents(f, probes, n_range, n_tail)
    mask = np.abs(exponents - beta) <= tol
    return probes[mask]


def probe_exponents(f: CapFunction, probes: np.ndarray, n_range: tuple[int, int],
                    n_tail: int = 6, clamp: bool = True, jobs: int = 1) -> np.ndarray:
    """beta_hat at every probe point."""
    n_lo, n_hi = n_range
    _check_range(f, n_lo, n_hi)
    ns = list(range(n_lo, n_hi + 1))
    tail = ns[-n_tail:]
    vals = profile_matrix(f, probes, tail, jobs)
    return beta_hat_from_values(vals, tail, n_tail, f.d, clamp)


# ---------------------------------------------------------------------------
# box counting


@dataclass(frozen=True)
class BoxDimension:
    dim: float
    fit_r2: float
    levels: np.ndarray
    counts: np.ndarray
    degenerate: bool = False

    def __iter__(self):
        # unpacks as (dim, fit_r2)
        return iter((self.dim, self.fit_r2))


def _fit_slope(levels: np.ndarray, counts: np.ndarray) -> tuple[float, float]:
    y = np.log2(counts)
    x = levels.astype(float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


def _count_hits(net_points: np.ndarray, target, reach: float) -> int:
    """Number of net points within ``reach`` + (cap radius) of the target."""
    if isinstance(target, CapFunction):
        target = list(zip(target.centers, target.radii))
    elif isinstance(target, (list, tuple)) and target and isinstance(target[0], Cap):
        target = [(c.center, c.radius) for c in target]
    if isinstance(target, np.ndarray):
        pts = np.atleast_2d(target)
        if len(pts) == 0:
            return 0
        dist, _ = cKDTree(pts).query(net_points, k=1)
        return int(np.count_nonzero(dist < reach))
    if not target:
        return 0
    centers = np.array([c for c, _ in target])
    radii = np.array([float(r) for _, r in target])
    hit = np.zeros(len(net_points), dtype=bool)
    for rad in np.unique(radii):
        group = centers[radii == rad]
        dist, _ = cKDTree(group).query(net_points, k=1)
        hit |= dist < reach + rad
    return int(np.count_nonzero(hit))


def box_dimension(target, n_lo: int, n_hi: int, nets: Sequence[Net], *,
                  layered: bool = False) -> BoxDimension:
    """Least-squares slope of log2 N(n) against n, N(n) = # level-n net points whose cap meets the set.

    ``target`` may be an array of points, a list of caps, a CapFunction (its
    caps), or a membership predicate evaluated on the finest net level
    ``n_hi``.  With ``layered=True`` it is instead a callable ``n -> set``
    returning the scale-n layer of a set defined scale by scale.
    """
    if n_hi <= n_lo:
        raise ValueError("need n_lo < n_hi")
    by_level = {net.level: net for net in nets}
    missing = [n for n in range(n_lo, n_hi + 1) if n not in by_level]
    if missing:
        raise KeyError(f"missing net levels {missing}")
    if callable(target) and not layered and not isinstance(target, CapFunction):
        fine = by_level[n_hi].points
        target = fine[np.asarray(target(fine), dtype=bool)]
    levels = np.arange(n_lo, n_hi + 1)
    counts = np.empty(len(levels))
    for i, n in enumerate(levels):
        layer = target(n) if layered else target
        if hasattr(layer, "centers") and hasattr(layer, "radius"):
            layer = [(c, layer.radius) for c in layer.centers]
        counts[i] = _count_hits(by_level[n].points, layer, 2.0 ** (-n))
    if np.any(counts == 0):
        return BoxDimension(0.0, 0.0, levels, counts, degenerate=True)
    dim, r2 = _fit_slope(levels, counts)
    return BoxDimension(dim, r2, levels, counts)


# ---------------------------------------------------------------------------
# spectrum


@dataclass
class SpectrumConfig:
    probe_level: int = 12
    n_range: tuple[int, int] = (4, 14)
    n_tail: int = 6
    tol: float | None = None
    box_range: tuple[int, int] | None = None
    envelope: bool = False

    def resolved_tol(self, betas: Sequence[float]) -> float:
        if self.tol is not None:
            return self.tol
        b = np.sort(np.asarray(betas, dtype=float))
        if len(b) < 2:
            return 0.05
        return float(np.min(np.diff(b))) / 2.0

    def resolved_box_range(self) -> tuple[int, int]:
        if self.box_range is not None:
            return self.box_range
        return (4, self.probe_level)


@dataclass(frozen=True)
class SpectrumPoint:
    beta: float
    dim: float
    fit_r2: float
    scale_range: tuple[int, int]
    count: int
    degenerate: bool


@dataclass
class SpectrumEstimate:
    points: list[SpectrumPoint]
    d: int
    config: dict = field(default_factory=dict)
    exponents: np.ndarray | None = None

    def deviations(self) -> np.ndarray:
        """dim estimate minus the reference d - beta."""
        return np.array([p.dim - (self.d - p.beta) for p in self.points])

    def table(self) -> list[dict]:
        return [dict(beta=p.beta, dim=p.dim, reference=self.d - p.beta, fit_r2=p.fit_r2,
                     n_lo=p.scale_range[0], n_hi=p.scale_range[1], count=p.count,
                     degenerate=p.degenerate) for p in self.points]


def spectrum(f: CapFunction, betas: Sequence[float], nets: Sequence[Net],
             config: SpectrumConfig | None = None, jobs: int = 1) -> SpectrumEstimate:
    """Box dimension of the probe level set for each beta."""
    config = config or SpectrumConfig()
    betas = [float(b) for b in betas]
    if any(b < 0 or b > f.d for b in betas):
        raise ValueError("betas must lie in [0, d]")
    by_level = {net.level: net for net in nets}
    if config.probe_level not in by_level:
        raise KeyError(f"probe level {config.probe_level} is not among the nets")
    probes = by_level[config.probe_level].points
    expo = probe_exponents(f, probes, config.n_range, config.n_tail, jobs=jobs)
    tol = config.resolved_tol(betas)
    lo, hi = config.resolved_box_range()
    pts = []
    for b in betas:
        members = level_set(f, b, tol, probes, config.n_range, config.n_tail, exponents=expo)
        box = box_dimension(members, lo, hi, nets)
        pts.append(SpectrumPoint(b, box.dim, box.fit_r2, (lo, hi), len(members), box.degenerate))
    if config.envelope:
        # nonincreasing envelope in beta, from the right
        dims = np.maximum.accumulate([p.dim for p in pts][::-1])[::-1]
        pts = [SpectrumPoint(p.beta, float(dv), p.fit_r2, p.scale_range, p.count, p.degenerate)
               for p, dv in zip(pts, dims)]
    cfg = dict(probe_level=config.probe_level, n_range=list(config.n_range), n_tail=config.n_tail,
               tol=tol, box_range=[lo, hi], envelope=config.envelope)
    return SpectrumEstimate(pts, f.d, cfg, expo)


def parse_beta_grid(text: str) -> list[float]:
    """'0:1:0.125' -> [0, 0.125, ..., 1]; '0.25,0.5' -> [0.25, 0.5]."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError("beta grid must be start:stop:step with step > 0")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def spectrum_svg(est: SpectrumEstimate, path, config_hash: str = "") -> None:
    """Plot dim estimates against beta with the reference line d - beta."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "capfield"
    betas = [p.beta for p in est.points]
    dims = [p.dim for p in est.points]
    fig, ax = plt.subplots(figsize=(5, 4))
    grid = np.linspace(0.0, est.d, 50)
    ax.plot(grid, est.d - grid, color="0.4", lw=1, ls="--", label="d - beta")
    ax.plot(betas, dims, "o-", color="C0", label="box-count estimate")
    ax.set_xlabel("beta")
    ax.set_ylabel("dimension estimate")
    ax.set_xlim(0, est.d)
    ax.set_ylim(-0.05, est.d + 0.05)
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fig.savefig(path, format="svg",
                    metadata={"Date": None, "Description": f"config_hash={config_hash}"})
    plt.close(fig)
