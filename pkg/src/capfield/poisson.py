"""Poisson kernel of the unit ball and Poisson integrals of cap sums.

Evaluation sites are ``r * y`` with ``y`` on the sphere.  Everything
reduces to the integral of the kernel over one cap, whose value depends
only on ``r``, the chordal distance ``gamma`` between ``y`` and the cap
center, and the cap radius:

* d = 1: closed form (the antiderivative of the circle Poisson kernel is an
  arctangent), evaluated in a cancellation-free ``atan2`` form;
* d = 2: the azimuthal integral is a complete elliptic integral of the
  second kind; the remaining polar integral uses Gauss-Legendre panels on
  a geometric mesh anchored at the kernel peak;
* d >= 3: radial quadrature for centered caps, scrambled Sobol QMC
  otherwise (with a standard error).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy import special
from scipy.stats import qmc

from .sphere import (
    Cap, _sphere_weight_norm, _tangent_frame, as_point, cap_measure,
    chord_to_angle, chordal_distance, north_pole, normalize, point_at,
)

DEFAULT_RTOL = 1e-8
QMC_TARGET_SE = 1e-4


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error {achieved:.3g})")
        self.achieved = achieved


class L1BoundWarning(UserWarning):
    """l1_norm returned an upper bound because the weights have mixed signs."""


# ---------------------------------------------------------------------------
# kernel


def kernel_value(d: int, r, delta):
    """P(r y, xi) for |y - xi| = delta: (1 - r^2) / ((1 - r)^2 + r delta^2)^((d+1)/2)."""
    r = np.asarray(r, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(r >= 1) or np.any(r < 0):
        raise ValueError("kernel needs 0 <= r < 1")
    h = 1.0 - r
    # (1 - r)(1 + r) avoids the cancellation in 1 - r^2 near the boundary
    out = h * (1.0 + r) / (h * h + r * delta * delta) ** ((d + 1) / 2.0)
    return float(out) if out.ndim == 0 else out


def kernel_peak(d: int, r: float) -> float:
    """P(rN, N) = (1 + r) / (1 - r)^d."""
    return (1.0 + r) / (1.0 - r) ** d


# ---------------------------------------------------------------------------
# d = 1


def _arc_piece(K, t1, t2):
    """Harmonic measure of {t1 <= |t| <= t2} restricted to one side, 0 <= t1 <= t2 <= pi.

    Equals (1/pi) [arctan(K tan(t2/2)) - arctan(K tan(t1/2))], rewritten as a
    single atan2 so that far, thin arcs keep full relative precision.
    """
    t2 = np.maximum(t2, t1)
    s1, c1 = np.sin(t1 / 2), np.cos(t1 / 2)
    s2, c2 = np.sin(t2 / 2), np.cos(t2 / 2)
    num = K * np.sin((t2 - t1) / 2)
    den = c1 * c2 + K * K * s1 * s2
    return np.arctan2(num, den) / np.pi


def arc_integrals(r: float, g, w):
    """Integral of the circle Poisson kernel over arcs [g - w, g + w].

    ``g`` is the angle between the site direction and the arc center
    (in [0, pi]) and ``w`` the half-width (in (0, pi]).
    """
    g = np.asarray(g, dtype=float)
    w = np.asarray(w, dtype=float)
    K = (1.0 + r) / (1.0 - r)
    lo = g - w
    hi = g + w
    zero = np.zeros_like(lo)
    out = _arc_piece(K, zero, np.maximum(-lo, 0.0))
    out = out + _arc_piece(K, np.maximum(lo, 0.0), np.minimum(hi, np.pi))
    out = out + _arc_piece(K, np.where(hi > np.pi, np.maximum(2 * np.pi - hi, 0.0), np.pi),
                           np.full_like(lo, np.pi))
    return out


@njit(cache=True)
def _circle_sum_kernel(site_s, site_c, K, sa, ca, sb, cb, full, weights, out):
    # Phi(t) = arctan(K tan(t/2)) evaluated from the half-angle sine/cosine,
    # which the addition formulas give without per-pair trigonometry
    inv_pi = 1.0 / np.pi
    for i in range(site_s.size):
        ps, pc = site_s[i], site_c[i]
        acc = 0.0
        for j in range(weights.size):
            if full[j]:
                acc += weights[j]
                continue
            s1 = sa[j] * pc - ca[j] * ps
            c1 = ca[j] * pc + sa[j] * ps
            if c1 < 0.0 or (c1 == 0.0 and s1 < 0.0):
                s1, c1 = -s1, -c1
            s2 = sb[j] * pc - cb[j] * ps
            c2 = cb[j] * pc + sb[j] * ps
            if c2 < 0.0 or (c2 == 0.0 and s2 < 0.0):
                s2, c2 = -s2, -c2
            h = (np.arctan2(K * s2, c2) - np.arctan2(K * s1, c1)) * inv_pi
            if s1 > s2:
                # the arc passes through the antipode of the site
                h += 1.0
            acc += weights[j] * h
        out[i] = acc


def circle_poisson_sum(r: float, site_angles, centers_angle, half_widths, weights) -> np.ndarray:
    """sum_j w_j * (harmonic measure of arc j) at the sites r e^{i phi}, compiled loop.

    Agrees with :func:`arc_integrals` up to absolute rounding of order 1e-16
    per arc (thin far arcs lose relative, not absolute, precision).
    """
    phi = np.asarray(site_angles, dtype=float)
    c = np.asarray(centers_angle, dtype=float)
    w = np.asarray(half_widths, dtype=float)
    K = (1.0 + r) / (1.0 - r)
    lo, hi = (c - w) / 2.0, (c + w) / 2.0
    out = np.empty(phi.size)
    _circle_sum_kernel(np.sin(phi / 2.0), np.cos(phi / 2.0), K, np.sin(lo), np.cos(lo),
                       np.sin(hi), np.cos(hi), w >= np.pi * (1 - 1e-15),
                       np.ascontiguousarray(weights, dtype=float), out)
    return out


# ---------------------------------------------------------------------------
# d = 2


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _peak_mesh(r: float, peak: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Breakpoints on [0, upper] graded geometrically around ``peak`` at scale 1 - r."""
    h = min(max(1.0 - r, 1e-300), 0.25)
    kmax = int(math.ceil(math.log2(math.pi / h))) + 1
    offsets = h * 2.0 ** np.arange(-3, kmax + 1)
    pk = peak[:, None]
    up = upper[:, None]
    bps = np.concatenate([
        np.zeros_like(pk), pk - offsets[None, :], pk, pk + offsets[None, :], up,
    ], axis=1)
    bps = np.clip(bps, 0.0, up)
    bps.sort(axis=1)
    return bps


def _panel_quadrature(func, bps: np.ndarray, nodes: int) -> np.ndarray:
    x, wts = _gauss_legendre(nodes)
    a = bps[:, :-1, None]
    b = bps[:, 1:, None]
    half = (b - a) / 2.0
    theta = (a + b) / 2.0 + half * x
    vals = func(theta)
    return np.sum(vals * half * wts, axis=(1, 2))


def _s2_cap_integrals(r: float, gamma: np.ndarray, rho: np.ndarray, nodes=(12, 20)):
    g = chord_to_angle(gamma)
    tc = chord_to_angle(rho)
    gg = g[:, None, None]
    pref = (1.0 - r) * (1.0 + r) / (4.0 * np.pi)

    def integrand(theta):
        diff = (1.0 - r) ** 2 + 4.0 * r * np.sin((theta - gg) / 2.0) ** 2   # a - b
        summ = (1.0 - r) ** 2 + 4.0 * r * np.sin((theta + gg) / 2.0) ** 2   # a + b
        m = 1.0 - diff / summ
        inner = 4.0 * special.ellipe(np.clip(m, 0.0, 1.0)) / (diff * np.sqrt(summ))
        return pref * np.sin(theta) * inner

    bps = _peak_mesh(r, np.minimum(g, tc), tc)
    coarse = _panel_quadrature(integrand, bps, nodes[0])
    fine = _panel_quadrature(integrand, bps, nodes[1])
    return fine, np.abs(fine - coarse)


# ---------------------------------------------------------------------------
# d >= 3


def _radial_cap_integrals(d: int, r: float, rho: np.ndarray, nodes=(12, 20)):
    """Centered caps: 1-D integral of the kernel against sin^(d-1)."""
    tc = chord_to_angle(rho)
    norm_const = _sphere_weight_norm(d)

    def integrand(theta):
        delta = 2.0 * np.sin(theta / 2.0)
        return kernel_value(d, r, delta) * np.sin(theta) ** (d - 1) / norm_const

    bps = _peak_mesh(r, np.zeros_like(tc), tc)
    coarse = _panel_quadrature(integrand, bps, nodes[0])
    fine = _panel_quadrature(integrand, bps, nodes[1])
    return fine, np.abs(fine - coarse)


def _qmc_cap_integral(d: int, r: float, gamma: float, rho: float, target_se: float,
                      seed: int = 0, max_log2: int = 18):
    """sigma-weighted mean of the kernel over the cap, by randomized Sobol points."""
    y = north_pole(d)
    g = float(chord_to_angle(gamma))
    frame_y = _tangent_frame(y)
    z = point_at(y, g, frame_y[0])
    frame = _tangent_frame(z)
    mass = cap_measure(d, rho)
    reps = 8
    log2n = 10
    while True:
        estimates = []
        for rep in range(reps):
            sob = qmc.Sobol(d + 1, scramble=True, seed=np.random.default_rng([seed, rep, log2n]))
            u = sob.random_base2(log2n)
            u = np.clip(u, 1e-12, 1 - 1e-12)
            x = special.betaincinv(d / 2.0, d / 2.0, u[:, 0] * mass)
            theta = 2.0 * np.arcsin(np.sqrt(x))
            if d == 1:
                dirs = np.where(u[:, 1:2] < 0.5, -1.0, 1.0) * frame[0]
            else:
                coef = normalize(special.ndtri(u[:, 1:]))
                dirs = coef @ frame
            pts = point_at(z, theta, dirs)
            delta = chordal_distance(pts, y)
            estimates.append(mass * np.mean(kernel_value(d, r, delta)))
        estimates = np.asarray(estimates)
        value = float(estimates.mean())
        se = float(estimates.std(ddof=1) / math.sqrt(reps))
        if se <= target_se * max(1.0, abs(value)) or log2n >= max_log2:
            return value, se
        log2n += 2


# ---------------------------------------------------------------------------
# public cap integral


def cap_kernel_integrals(d: int, r: float, gamma, cap_radius, *, rtol: float = DEFAULT_RTOL,
                         qmc_se: float = QMC_TARGET_SE, return_error: bool = False):
    """Vectorized :func:`cap_kernel_integral` over arrays of (gamma, cap_radius)."""
    if not 0.0 <= r < 1.0:
        raise ValueError("r must lie in [0, 1)")
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    rho = np.atleast_1d(np.asarray(cap_radius, dtype=float))
    gamma, rho = np.broadcast_arrays(gamma, rho)
    if np.any(rho <= 0) or np.any(rho > 2) or np.any(gamma < 0) or np.any(gamma > 2 + 1e-12):
        raise ValueError("need 0 <= gamma <= 2 and 0 < cap_radius <= 2")
    if r == 0.0:
        vals = cap_measure(d, rho)
        vals = np.atleast_1d(vals)
        err = np.zeros_like(vals)
    elif d == 1:
        vals = arc_integrals(r, chord_to_angle(gamma), chord_to_angle(rho))
        err = np.zeros_like(vals)
    elif d == 2:
        vals = np.empty(gamma.shape)
        err = np.empty(gamma.shape)
        flat_g, flat_r = gamma.ravel(), rho.ravel()
        out_v, out_e = vals.reshape(-1), err.reshape(-1)
        chunk = 2048
        for s in range(0, flat_g.size, chunk):
            v, e = _s2_cap_integrals(r, flat_g[s:s + chunk], flat_r[s:s + chunk])
            out_v[s:s + chunk] = v
            out_e[s:s + chunk] = e
    else:
        vals = np.empty(gamma.shape)
        err = np.empty(gamma.shape)
        # a radius-2 cap is the whole sphere, symmetric about any center
        centered = (gamma < 1e-14) | (rho >= 2.0)
        if centered.any():
            v, e = _radial_cap_integrals(d, r, rho[centered])
            vals[centered], err[centered] = v, e
        for idx in zip(*np.nonzero(~centered)):
            v, e = _qmc_cap_integral(d, r, gamma[idx], rho[idx], qmc_se)
            vals[idx], err[idx] = v, e
    bad = err > np.maximum(rtol * np.abs(vals), 1e-14) * (1 if d <= 2 else 1e300)
    if bad.any():
        worst = float(np.max(err[bad]))
        raise QuadratureError("cap quadrature did not reach tolerance", worst)
    vals = np.clip(vals, 0.0, 1.0)
    if return_error:
        return vals, err
    return vals


def cap_kernel_integral(d: int, r: float, gamma: float, cap_radius: float, *,
                        rtol: float = DEFAULT_RTOL) -> float:
    """Integral of P(r y, .) over a cap of radius ``cap_radius`` centered at distance ``gamma`` from y."""
    return float(cap_kernel_integrals(d, r, gamma, cap_radius, rtol=rtol)[0])


def kernel_normalization_check(d: int, r: float) -> float:
    """|integral of P(rN, .) over the sphere - 1|, computed through the cap quadrature."""
    if not 0.0 <= r < 1.0:
        raise ValueError("r must lie in [0, 1)")
    return abs(cap_kernel_integral(d, r, 0.0, 2.0) - 1.0)


def cap_lower_values(d: int, r_grid: Iterable[float]) -> np.ndarray:
    """Integral of P(rN, .) over kappa(N, 1 - r) for each r of the grid."""
    out = []
    for r in r_grid:
        if not 0.5 < r < 1.0:
            raise ValueError("cap_lower_constant needs r in (1/2, 1)")
        out.append(cap_kernel_integral(d, r, 0.0, 1.0 - r))
    return np.asarray(out)


def cap_lower_constant(d: int, r_grid: Iterable[float]) -> float:
    """Smallest value of the centered (1 - r)-cap integral over the grid."""
    return float(cap_lower_values(d, r_grid).min())


# ---------------------------------------------------------------------------
# cap functions


def _as_rows(points, d: int) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.zeros((0, d + 1))
    return arr.reshape(-1, d + 1)


@dataclass
class CapFunction:
    """Finite sum of weighted cap indicators, optionally plus point masses.

    ``mode='function'`` is an L^1 density with respect to sigma; point masses
    are only allowed in ``mode='measure'``.  ``meta`` carries provenance such
    as the truncation level of a construction.
    """

    d: int
    centers: np.ndarray
    radii: np.ndarray
    weights: np.ndarray
    atom_points: np.ndarray = None
    atom_masses: np.ndarray = None
    mode: str = "function"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = self.d
        if d < 1:
            raise ValueError("d must be >= 1")
        self.centers = _as_rows(self.centers, d)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.atom_points = _as_rows(self.atom_points if self.atom_points is not None else [], d)
        self.atom_masses = np.asarray(
            self.atom_masses if self.atom_masses is not None else [], dtype=float).reshape(-1)
        if not (len(self.centers) == len(self.radii) == len(self.weights)):
            raise ValueError("centers, radii and weights must have equal length")
        if len(self.atom_points) != len(self.atom_masses):
            raise ValueError("atom points and masses must have equal length")
        if self.mode not in ("function", "measure"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "function" and len(self.atom_masses):
            raise ValueError("point masses are only allowed in measure mode")
        if len(self.radii) and (np.any(self.radii <= 0) or np.any(self.radii > 2)):
            raise ValueError("cap radii must lie in (0, 2]")
        for arr in (self.centers, self.atom_points):
            if len(arr) and np.max(np.abs(np.linalg.norm(arr, axis=1) - 1.0)) > 1e-10:
                raise ValueError("centers and atoms must be unit vectors")

    # constructors -----------------------------------------------------------

    @classmethod
    def zero(cls, d: int, mode: str = "function") -> "CapFunction":
        return cls(d, np.zeros((0, d + 1)), [], [], mode=mode)

    @classmethod
    def constant(cls, d: int, value: float = 1.0) -> "CapFunction":
        """value * 1 (a single cap of radius 2, which is the sphere minus one point)."""
        return cls(d, north_pole(d)[None, :], [2.0], [value])

    @classmethod
    def from_caps(cls, caps: Sequence[Cap], weights: Sequence[float], d: int | None = None,
                  **kw) -> "CapFunction":
        if d is None:
            if not caps:
                raise ValueError("cannot infer d from an empty cap list")
            d = caps[0].d
        centers = np.array([c.center for c in caps]) if caps else np.zeros((0, d + 1))
        return cls(d, centers, [c.radius for c in caps], list(weights), **kw)

    @classmethod
    def atom(cls, point, mass: float = 1.0) -> "CapFunction":
        p = as_point(point)
        d = p.size - 1
        return cls(d, np.zeros((0, d + 1)), [], [], atom_points=p[None, :],
                   atom_masses=[mass], mode="measure")

    # algebra ----------------------------------------------------------------

    def _merged_meta(self, other: "CapFunction") -> dict:
        meta = dict(self.meta)
        for key, val in other.meta.items():
            if key == "truncation" and key in meta:
                meta[key] = min(meta[key], val)
            else:
                meta.setdefault(key, val)
        return meta

    def __add__(self, other: "CapFunction") -> "CapFunction":
        if not isinstance(other, CapFunction):
            return NotImplemented
        if other.d != self.d:
            raise ValueError("cannot add cap functions on different spheres")
        mode = "measure" if "measure" in (self.mode, other.mode) else "function"
        return CapFunction(
            self.d,
            np.vstack([self.centers, other.centers]),
            np.concatenate([self.radii, other.radii]),
            np.concatenate([self.weights, other.weights]),
            np.vstack([self.atom_points, other.atom_points]),
            np.concatenate([self.atom_masses, other.atom_masses]),
            mode=mode, meta=self._merged_meta(other),
        )

    def __mul__(self, scalar: float) -> "CapFunction":
        scalar = float(scalar)
        return CapFunction(self.d, self.centers, self.radii, self.weights * scalar,
                           self.atom_points, self.atom_masses * scalar, self.mode, dict(self.meta))

    __rmul__ = __mul__

    def __neg__(self) -> "CapFunction":
        return self * -1.0

    def __sub__(self, other: "CapFunction") -> "CapFunction":
        return self + (-other)

    def as_measure(self) -> "CapFunction":
        return CapFunction(self.d, self.centers, self.radii, self.weights, self.atom_points,
                           self.atom_masses, "measure", dict(self.meta))

    def total_variation_majorant(self) -> "CapFunction":
        """Same caps and atoms with absolute weights; dominates |mu| pointwise."""
        return CapFunction(self.d, self.centers, self.radii, np.abs(self.weights),
                           self.atom_points, np.abs(self.atom_masses), self.mode, dict(self.meta))

    # inspection ---------------------------------------------------------------

    @property
    def n_terms(self) -> int:
        return len(self.weights)

    @property
    def terms(self) -> list[tuple[Cap, float]]:
        return [(Cap(c, float(r)), float(w)) for c, r, w in zip(self.centers, self.radii, self.weights)]

    @property
    def atoms(self) -> list[tuple[np.ndarray, float]]:
        return [(p, float(m)) for p, m in zip(self.atom_points, self.atom_masses)]

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.weights >= 0) and np.all(self.atom_masses >= 0))

    def __call__(self, xi) -> np.ndarray:
        """Pointwise density value (atoms ignored)."""
        xi = _as_rows(xi, self.d)
        out = np.zeros(len(xi))
        chunk = max(1, 2_000_000 // max(1, self.n_terms))
        for s in range(0, len(xi), chunk):
            dist = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * xi[s:s + chunk] @ self.centers.T))
            out[s:s + chunk] = (dist < self.radii[None, :]) @ self.weights
        return out


def l1_norm(f: CapFunction) -> float:
    """sum |w_i| sigma(cap_i); exact when the weights share one sign."""
    if len(f.atom_masses):
        raise ValueError("l1_norm is defined for densities; this cap function carries point masses")
    if f.n_terms == 0:
        return 0.0
    measures = cap_measure(f.d, f.radii)
    if np.any(f.weights > 0) and np.any(f.weights < 0):
        warnings.warn("mixed-sign weights: returning the upper bound sum |w| sigma(cap)",
                      L1BoundWarning, stacklevel=2)
    return float(np.sum(np.abs(f.weights) * measures))


def total_mass(f: CapFunction) -> float:
    """Signed total mass f(S^d)."""
    caps = np.sum(f.weights * cap_measure(f.d, f.radii)) if f.n_terms else 0.0
    return float(caps + f.atom_masses.sum())


@dataclass(frozen=True)
class RadialPoint:
    """Evaluation site r_n * direction with r_n = 1 - 2^-n."""

    n: int
    direction: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "direction", as_point(self.direction))

    @property
    def r(self) -> float:
        return 1.0 - 2.0 ** (-self.n)


def _circle_angles(points: np.ndarray) -> np.ndarray:
    return np.arctan2(points[:, 1], points[:, 0])


def poisson_values(f: CapFunction, r: float, directions, *, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """P[f](r y) for every row y of ``directions`` (one common radius r)."""
    if not 0.0 <= r < 1.0:
        raise ValueError("evaluation site must lie inside the ball")
    ys = _as_rows(directions, f.d)
    out = np.zeros(len(ys))
    if f.n_terms:
        if f.d == 1 and r > 0:
            out += circle_poisson_sum(r, _circle_angles(ys), _circle_angles(f.centers),
                                      chord_to_angle(f.radii), f.weights)
        else:
            for i, y in enumerate(ys):
                gamma = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * f.centers @ y))
                vals = cap_kernel_integrals(f.d, r, gamma, f.radii, rtol=rtol)
                out[i] = vals @ f.weights
    if len(f.atom_masses):
        dist = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * ys @ f.atom_points.T))
        out += kernel_value(f.d, r, dist) @ f.atom_masses
    return out


def poisson_integral(f: CapFunction, site: RadialPoint | tuple[float, np.ndarray], *,
                     rtol: float = DEFAULT_RTOL) -> float:
    """P[f] at one interior site (a RadialPoint or an (r, direction) pair)."""
    if isinstance(site, RadialPoint):
        r, y = site.r, site.direction
    else:
        r, y = site
        y = as_point(y)
    return float(poisson_values(f, r, y[None, :], rtol=rtol)[0])
