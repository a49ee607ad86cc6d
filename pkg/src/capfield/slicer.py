"""Harnack-calibrated slice decomposition of the Poisson kernel.

The kernel P(rN, .) is radial about N and decreasing in the chordal
distance, so it is squeezed between two step functions built on a ladder
of caps kappa(N, delta_j).  The ladder starts at (1 - r)/2 and each further
radius is chosen so that the kernel drops by exactly the factor c0.  Integrating
a measure against the step function bounds P[mu](rN) by a maximal cap
average of mu, with caps no smaller than 1 - r after one doubling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .poisson import CapFunction, kernel_value, poisson_values
from .sphere import as_point, cap_intersection_measure, cap_measure, north_pole


def harnack_c0(d: int) -> float:
    """Half-radius Harnack constant 2^d / 3^(d+1) of the ball in R^(d+1)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return 2.0 ** d / 3.0 ** (d + 1)


def harnack_ratio_min(d: int, r) -> np.ndarray:
    """min of P(rN, xi)/P(rN, N) over |xi - N| <= (1 - r)/2 (attained on the boundary)."""
    r = np.asarray(r, dtype=float)
    return kernel_value(d, r, (1.0 - r) / 2.0) / kernel_value(d, r, 0.0)


@dataclass(frozen=True)
class SliceDecomposition:
    """Ladder 0 = delta_0 < delta_1 < ... < delta_k = 2 with kernel levels and jumps.

    ``levels[j]`` is the kernel at ``radii[j]``; ``jumps[j-1]`` is the
    coefficient of the indicator of kappa(N, radii[j]) in the step function,
    so that on the slice delta_(m-1) <= |xi - N| < delta_m the step function
    equals levels[m-1].
    """

    d: int
    r: float
    c0: float
    radii: np.ndarray
    levels: np.ndarray
    jumps: np.ndarray

    @property
    def k(self) -> int:
        return len(self.radii) - 1

    def step(self, delta) -> np.ndarray:
        """Step function sum_j d_j 1[delta < delta_j] (zero at the antipode)."""
        delta = np.asarray(delta, dtype=float)
        inside = delta[..., None] < self.radii[None, 1:] if delta.ndim else delta < self.radii[1:]
        return inside @ self.jumps

    def interior_ratios(self) -> np.ndarray:
        """levels[j+1]/levels[j] for the interior steps 1 <= j < k-1 (all equal c0)."""
        return self.levels[2:-1] / self.levels[1:-2]

    def rederive(self) -> "SliceDecomposition":
        return slice_radii(self.d, self.r, self.c0)


def slice_radii(d: int, r: float, c0: float | None = None) -> SliceDecomposition:
    """Build the ladder by inverting kernel(delta_(j+1)) = c0 * kernel(delta_j)."""
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    if c0 is None:
        c0 = harnack_c0(d)
    if not 0.0 < c0 < 1.0:
        raise ValueError("c0 must lie in (0, 1)")
    lam = c0 ** (-2.0 / (d + 1))
    h2 = (1.0 - r) ** 2
    radii = [0.0, (1.0 - r) / 2.0]
    while radii[-1] < 2.0:
        prev = radii[-1]
        nxt = math.sqrt((lam * (h2 + r * prev * prev) - h2) / r)
        radii.append(min(nxt, 2.0))
    radii = np.asarray(radii)
    levels = kernel_value(d, r, radii)
    # telescoping jumps: d_m = c_(m-1) - c_m below the top, d_k = c_(k-1)
    jumps = np.empty(len(radii) - 1)
    jumps[:-1] = levels[:-2] - levels[1:-1]
    jumps[-1] = levels[-2]
    return SliceDecomposition(d, r, c0, radii, levels, jumps)


@lru_cache(maxsize=None)
def doubling_constant(d: int) -> float:
    """sup over delta of sigma(kappa(min(2 delta, 2))) / sigma(kappa(delta))."""
    # for delta > 1 the ratio is 1/sigma(delta) < 1/sigma(1), so (0, 1] suffices
    grid = np.concatenate([np.geomspace(1e-6, 1.0, 4001), [1.0]])
    ratio = cap_measure(d, np.minimum(2 * grid, 2.0)) / cap_measure(d, grid)
    return float(ratio.max())


def _mass_in_cap(mu: CapFunction, y: np.ndarray, delta: float) -> float:
    """mu(kappa(y, delta)); delta = 2 is read as the whole closed sphere."""
    if delta >= 2.0:
        caps = np.sum(mu.weights * cap_measure(mu.d, mu.radii)) if mu.n_terms else 0.0
        return float(caps + mu.atom_masses.sum())
    total = 0.0
    if mu.n_terms:
        gammas = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * mu.centers @ y))
        for g, rho, w in zip(gammas, mu.radii, mu.weights):
            if w != 0.0:
                total += w * cap_intersection_measure(mu.d, float(g), delta, float(rho))
    if len(mu.atom_masses):
        dist = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * mu.atom_points @ y))
        total += float(mu.atom_masses[dist < delta].sum())
    return total


def maximal_over_caps(mu: CapFunction, y, radii: Sequence[float]) -> tuple[float, float]:
    """Largest average mu(kappa(y, delta))/sigma(kappa(y, delta)) over the given radii.

    Returns (maximizing radius, ratio); ties resolve to the smallest radius.
    """
    if not mu.is_nonnegative:
        raise ValueError("signed measure: pass the total variation (see CapFunction.total_variation_majorant)")
    radii = [float(x) for x in radii]
    if not radii:
        raise ValueError("radii must be nonempty")
    y = as_point(y)
    best_delta, best = radii[0], -np.inf
    for delta in radii:
        ratio = _mass_in_cap(mu, y, delta) / (1.0 if delta >= 2.0 else cap_measure(mu.d, delta))
        if ratio > best:
            best_delta, best = delta, ratio
    return best_delta, float(best)


@dataclass(frozen=True)
class DominationResult:
    lhs: float
    rhs: float
    delta_star: float
    slice_index: int
    ratio: float

    @property
    def ok(self) -> bool:
        return bool(self.lhs <= self.rhs * (1.0 + 1e-9))


def check_domination(mu: CapFunction, y, r: float, c0: float | None = None) -> DominationResult:
    """Compare |P[mu](r y)| with c0^-1 * D * max_j |mu|(kappa(y, 2 delta_j)) / sigma(...).

    ``D`` is the doubling constant of sigma, ``delta_j`` the slice ladder and
    ``delta_star`` the maximizing doubled radius, which is always >= 1 - r.
    """
    y = as_point(y)
    dec = slice_radii(mu.d, r, c0)
    lhs = abs(float(poisson_values(mu, r, y[None, :])[0]))
    tv = mu.total_variation_majorant().as_measure()
    doubled = np.minimum(2.0 * dec.radii[1:], 2.0)
    delta_star, ratio = maximal_over_caps(tv, y, doubled)
    idx = int(np.flatnonzero(doubled == delta_star)[0]) + 1
    rhs = doubling_constant(mu.d) * ratio / dec.c0
    return DominationResult(lhs, rhs, float(delta_star), idx, ratio)


def random_cap_measure(d: int, rng: np.random.Generator, n_caps: int = 4, n_atoms: int = 2,
                       focus=None, scale: float = 0.1) -> CapFunction:
    """Random nonnegative cap/atom measure, clustered near ``focus`` when given."""
    from .sphere import random_points, sample_in_cap

    def draw(count):
        if focus is None:
            return random_points(d, count, rng)
        return sample_in_cap(as_point(focus), min(2.0, 4 * scale), count, rng)

    centers = draw(n_caps)
    radii = np.minimum(2.0, scale * rng.lognormal(0.0, 1.0, n_caps))
    weights = rng.exponential(1.0, n_caps)
    atoms = draw(n_atoms)
    masses = rng.exponential(1.0, n_atoms) * scale ** d
    return CapFunction(d, centers, radii, weights, atoms, masses, mode="measure")
