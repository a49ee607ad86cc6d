"""Geometry of the unit sphere S^d in R^(d+1).

Points are unit vectors, distances are chordal (straight-line Euclidean),
and caps are open metric balls ``{xi : |xi - center| < radius}``.  Measures
are normalized so that the whole sphere has mass 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, special
from scipy.spatial import ConvexHull, cKDTree
from scipy.stats import norm

UNIT_TOL = 1e-12


class ResourceLimitError(RuntimeError):
    """Raised when a construction would exceed the configured size budget."""


def as_point(coords) -> np.ndarray:
    """Validate and return a unit vector as a float array."""
    p = np.asarray(coords, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError(f"a sphere point needs at least 2 coordinates, got shape {p.shape}")
    if abs(np.linalg.norm(p) - 1.0) > UNIT_TOL * 10:
        raise ValueError(f"point is not on the unit sphere (norm={np.linalg.norm(p)!r})")
    return p


@dataclass(frozen=True)
class SpherePoint:
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", as_point(self.coords))

    @property
    def d(self) -> int:
        return self.coords.size - 1

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


def north_pole(d: int) -> np.ndarray:
    """The point (0, ..., 0, 1) of S^d."""
    if d < 1:
        raise ValueError("d must be >= 1")
    p = np.zeros(d + 1)
    p[-1] = 1.0
    return p


def normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def chordal_distance(p, q) -> float | np.ndarray:
    """Euclidean distance between points of the same sphere.

    Broadcasts over leading axes, so ``chordal_distance(points, y)`` returns
    the distance of every row of ``points`` to ``y``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != q.shape[-1]:
        raise ValueError(
            f"ambient dimension mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    dist = np.sqrt(np.sum((p - q) ** 2, axis=-1))
    dist = np.minimum(dist, 2.0)
    if dist.ndim == 0:
        return float(dist)
    return dist


def chord_to_angle(delta):
    """Polar angle subtended by a chord of length ``delta``."""
    return 2.0 * np.arcsin(np.clip(np.asarray(delta, dtype=float) / 2.0, 0.0, 1.0))


def angle_to_chord(theta):
    return 2.0 * np.sin(np.asarray(theta, dtype=float) / 2.0)


def cap_measure(d: int, delta):
    """Normalized surface measure of a cap of chordal radius ``delta`` on S^d.

    With x = delta**2 / 4 = sin^2(theta/2) the cap fraction is the
    regularized incomplete beta function I_x(d/2, d/2).
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0) or np.any(delta > 2):
        raise ValueError("cap radius must lie in (0, 2]")
    out = special.betainc(d / 2.0, d / 2.0, delta ** 2 / 4.0)
    return float(out) if out.ndim == 0 else out


def _sphere_weight_norm(d: int) -> float:
    # integral of sin^(d-1) over [0, pi]
    return math.sqrt(math.pi) * math.exp(special.gammaln(d / 2.0) - special.gammaln((d + 1) / 2.0))


def cap_measure_quadrature(d: int, delta: float) -> float:
    """Cap measure by direct quadrature of sin^(d-1); independent of :func:`cap_measure`."""
    theta = float(chord_to_angle(delta))
    num, _ = integrate.quad(lambda t: math.sin(t) ** (d - 1), 0.0, theta,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return num / _sphere_weight_norm(d)


def _arc_overlap(g, w1, w2):
    """Length of the intersection of arcs [-w1, w1] and [g - w2, g + w2] on the circle."""
    g = np.asarray(g, dtype=float)
    total = np.zeros(np.broadcast(g, w1, w2).shape)
    for k in (-1, 0, 1):
        lo = np.maximum(-w1, g - w2 + 2 * np.pi * k)
        hi = np.minimum(w1, g + w2 + 2 * np.pi * k)
        total = total + np.maximum(hi - lo, 0.0)
    return total


def cap_intersection_measure(d: int, gamma: float, rho_a: float, rho_b: float) -> float:
    """sigma(kappa(y, rho_a) & kappa(z, rho_b)) where |y - z| = gamma.

    Exact for d = 1 (arc overlap).  For d >= 2 the cap around z is swept by
    polar angle; at each angle the fraction of the azimuthal sphere S^(d-1)
    lying inside the other cap is itself a cap measure, leaving a 1-D
    integral with explicit breakpoints at the kinks.
    """
    g = float(chord_to_angle(gamma))
    ta = float(chord_to_angle(rho_a))
    tb = float(chord_to_angle(rho_b))
    if d == 1:
        return float(_arc_overlap(g, ta, tb)) / (2 * np.pi)
    if g < 1e-15:
        return float(cap_measure(d, min(rho_a, rho_b)))
    if g + tb <= ta:
        return float(cap_measure(d, rho_b))
    if g + ta <= tb:
        return float(cap_measure(d, rho_a))
    if ta + tb <= g:
        return 0.0
    if ta + tb + g >= 2 * np.pi:
        # complements are disjoint
        return float(cap_measure(d, rho_a) + cap_measure(d, rho_b) - 1.0)
    cg, sg, ca = math.cos(g), math.sin(g), math.cos(ta)
    half = (d - 1) / 2.0

    def fraction(theta):
        st = math.sin(theta)
        if st < 1e-300:
            return 1.0 if (theta < 1 and g < ta) or (theta > 1 and math.pi - g < ta) else 0.0
        t = (ca - cg * math.cos(theta)) / (sg * st)
        if t >= 1.0:
            return 0.0
        if t <= -1.0:
            return 1.0
        return float(special.betainc(half, half, (1.0 - t) / 2.0))

    pts = sorted({p for p in (abs(g - ta), g + ta, 2 * np.pi - g - ta) if 0.0 < p < tb})
    val, _ = integrate.quad(lambda t: math.sin(t) ** (d - 1) * fraction(t), 0.0, tb,
                            points=pts or None, epsabs=1e-13, epsrel=1e-11, limit=400)
    return val / _sphere_weight_norm(d)


@dataclass(frozen=True)
class Cap:
    """Open spherical cap kappa(center, radius) with chordal radius in (0, 2]."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not 0.0 < self.radius <= 2.0:
            raise ValueError(f"cap radius must lie in (0, 2], got {self.radius}")

    @property
    def d(self) -> int:
        return self.center.size - 1

    def contains(self, xi) -> bool | np.ndarray:
        return chordal_distance(xi, self.center) < self.radius

    def measure(self) -> float:
        return cap_measure(self.d, self.radius)

    def scaled(self, factor: float) -> "Cap":
        """The cap ``factor * B`` (radius multiplied, capped at 2)."""
        return Cap(self.center, min(2.0, factor * self.radius))


@dataclass(frozen=True)
class Slice:
    """Annulus {xi : inner <= |xi - center| < outer}."""

    center: np.ndarray
    inner: float
    outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not 0.0 <= self.inner < self.outer:
            raise ValueError("slice needs 0 <= inner < outer")

    def contains(self, xi):
        dist = chordal_distance(xi, self.center)
        return (self.inner <= dist) & (dist < self.outer)

    def measure(self) -> float:
        d = self.center.size - 1
        outer = cap_measure(d, min(self.outer, 2.0))
        inner = cap_measure(d, self.inner) if self.inner > 0 else 0.0
        return outer - inner


@dataclass(frozen=True)
class GaugeSpec:
    """Power gauges tau(s) = s**-beta, phi(s) = s**gamma, psi(s) = s**psi_gamma.

    ``kind='power-log'`` multiplies tau by log(e/s), a slowly growing factor
    that keeps tau(0+) infinite even when beta = 0.
    """

    beta: float
    gamma: float
    psi_gamma: float | None = None
    kind: str = "power"

    def __post_init__(self):
        if self.kind not in ("power", "power-log"):
            raise ValueError(f"unknown gauge kind {self.kind!r}")
        if self.kind == "power" and self.beta <= 0:
            raise ValueError("tau(0+) = +inf requires beta > 0")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("phi must vanish at 0: gamma > 0")
        if self.psi_gamma is not None and self.psi_gamma <= 0:
            raise ValueError("psi must vanish at 0: psi_gamma > 0")

    def tau(self, s):
        s = np.asarray(s, dtype=float)
        out = s ** (-self.beta)
        if self.kind == "power-log":
            out = out * np.log(np.e / s)
        return out

    def phi(self, s):
        return np.asarray(s, dtype=float) ** self.gamma

    def psi(self, s):
        if self.psi_gamma is None:
            raise ValueError("gauge has no psi exponent")
        return np.asarray(s, dtype=float) ** self.psi_gamma


def dilate_cap(cap: Cap, gauge: GaugeSpec) -> Cap:
    """Replace the radius r by psi^-1(phi(r)) = r**(gamma / psi_gamma)."""
    if not gauge.psi_gamma:
        raise ValueError("dilation needs a nonzero psi exponent")
    radius = cap.radius ** (gauge.gamma / gauge.psi_gamma)
    return Cap(cap.center, min(radius, 2.0))


def caps_disjoint(a: Cap, b: Cap) -> bool:
    # open metric balls; center distance >= sum of radii is sufficient
    return chordal_distance(a.center, b.center) >= a.radius + b.radius


def cap_inside(inner: Cap, outer: Cap) -> bool:
    """Sufficient metric test: |c_in - c_out| + r_in <= r_out."""
    if outer.radius >= 2.0:
        return True
    return chordal_distance(inner.center, outer.center) + inner.radius <= outer.radius


def five_r_disjointify(caps: Sequence[Cap]) -> list[Cap]:
    """Greedy Vitali selection: pairwise disjoint caps whose 5-dilates cover all inputs.

    Caps are scanned by decreasing radius; a cap is kept if it is disjoint
    from all caps kept so far.  A rejected cap B meets a kept cap B' with
    r(B') >= r(B), hence B lies inside 3B' (so inside 5B').
    """
    order = sorted(range(len(caps)), key=lambda i: (-caps[i].radius, i))
    kept: list[Cap] = []
    for i in order:
        c = caps[i]
        if all(caps_disjoint(c, k) for k in kept):
            kept.append(c)
    return kept


# ---------------------------------------------------------------------------
# nets


def _rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Random rotation of R^(d+1) fixing nothing in particular."""
    q, r = np.linalg.qr(rng.standard_normal((d + 1, d + 1)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _roberts_sequence(dim: int, count: int, start: int, offset: np.ndarray) -> np.ndarray:
    """Kronecker sequence with the generalized golden ratio (low discrepancy in [0,1)^dim)."""
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    alpha = (1.0 / phi) ** np.arange(1, dim + 1)
    k = np.arange(start, start + count, dtype=float)[:, None]
    return np.mod(offset[None, :] + k * alpha[None, :], 1.0)


def candidate_stream(d: int, count: int, start: int, seed: int) -> np.ndarray:
    """Quasi-random points on S^d, deterministic in (start, seed).

    d = 1 uses golden-angle points, d = 2 a generalized Fibonacci lattice
    (area preserving map of a 2-D Kronecker sequence), d >= 3 a Kronecker
    sequence pushed through the Gaussian inverse CDF.
    """
    rng = np.random.default_rng([seed, d])
    offset = rng.random(d + 1)
    if d == 1:
        u = _roberts_sequence(1, count, start, offset[:1])[:, 0]
        ang = 2 * np.pi * u
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if d == 2:
        u = _roberts_sequence(2, count, start, offset[:2])
        z = 1.0 - 2.0 * u[:, 0]
        ang = 2 * np.pi * u[:, 1]
        s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        pts = np.column_stack([s * np.cos(ang), s * np.sin(ang), z])
        return pts @ _rotation(d, rng).T
    u = _roberts_sequence(d + 1, count, start, offset)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return normalize(g)


def _circle_sweep_extend(points: np.ndarray, sep: float, seed: int,
                         resolution: int = 16) -> np.ndarray:
    """Greedy insertion over a uniform angular grid swept counter-clockwise.

    The grid has ``resolution`` points per separation angle.  Existing
    points split the circle into gaps that the sweep fills independently: in
    each gap the accepted grid points are equally spaced ``jump`` grid steps
    apart, so the scan is evaluated in closed form instead of point by point.
    """
    rng = np.random.default_rng([seed, 1, 3])
    a_sep = 2.0 * math.asin(sep / 2.0)
    step = a_sep / resolution
    phase = rng.random() * step
    jump = int(math.ceil(a_sep / step * (1 + 1e-12)))
    start = math.pi / 2
    ang = np.sort(np.mod(np.arctan2(points[:, 1], points[:, 0]) - start, 2 * np.pi))
    lo = ang
    hi = np.append(ang[1:], ang[0] + 2 * np.pi)
    first = np.ceil((lo + a_sep * (1 + 1e-12) - phase) / step)
    last = np.floor((hi - a_sep * (1 + 1e-12) - phase) / step)
    count = np.where(last >= first, (last - first) // jump + 1, 0).astype(np.int64)
    if count.sum() == 0:
        return points
    base = np.repeat(first, count)
    offs = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
    new_ang = start + phase + step * (base + jump * offs)
    new = np.column_stack([np.cos(new_ang), np.sin(new_ang)])
    return np.vstack([points, new])


def _greedy_extend(points: np.ndarray, cand: np.ndarray, sep: float) -> np.ndarray:
    """Sequential greedy insertion of ``cand`` (in order) keeping separation >= sep.

    The result equals the one-at-a-time greedy scan: candidates conflicting
    with existing points are discarded in bulk, the survivors are resolved
    in stream order against each other.
    """
    if len(points):
        tree = cKDTree(points)
        dist, _ = tree.query(cand, k=1)
        surv = cand[dist >= sep]
    else:
        surv = cand
    if len(surv) == 0:
        return points
    pairs = cKDTree(surv).query_pairs(sep, output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        dd = np.sqrt(np.sum((surv[i] - surv[j]) ** 2, axis=1))
        pairs = pairs[dd < sep]
    later = np.sort(pairs, axis=1) if len(pairs) else pairs
    # earlier neighbours of each survivor
    conflicts: dict[int, list[int]] = {}
    for a, b in later:
        conflicts.setdefault(int(b), []).append(int(a))
    keep = np.zeros(len(surv), dtype=bool)
    for idx in range(len(surv)):
        prev = conflicts.get(idx)
        if prev is None or not keep[prev].any():
            keep[idx] = True
    new = surv[keep]
    return np.vstack([points, new]) if len(points) else new


def _fill_circle_gaps(points: np.ndarray, sep: float) -> np.ndarray:
    """Insert gap midpoints on S^1 until every point is within < sep of the net."""
    while True:
        ang = np.sort(np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi))
        gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi]))
        half_chord = 2.0 * np.sin(gaps / 4.0)
        bad = half_chord >= sep
        if not bad.any():
            return points
        mids = ang[bad] + gaps[bad] / 2.0
        new = np.column_stack([np.cos(mids), np.sin(mids)])
        points = _greedy_extend(points, new, sep)


def _fill_hull_holes(points: np.ndarray, sep: float, max_rounds: int = 200) -> tuple[np.ndarray, int]:
    """Insert Voronoi vertices lying at distance >= sep from the net.

    For points on a sphere the facets of the convex hull are the Delaunay
    cells, and the unit outward normal of a facet is the point of S^d
    equidistant from its vertices, at distance sqrt(2 - 2c) with c the
    facet offset.  The largest such distance is the exact covering radius.
    """
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        hull = ConvexHull(points)
        normals = hull.equations[:, :-1]
        radius = np.sqrt(np.maximum(0.0, 2.0 + 2.0 * hull.equations[:, -1]))
        holes = radius >= sep
        if not holes.any():
            return points, rounds
        order = np.argsort(-radius[holes], kind="stable")
        before = len(points)
        points = _greedy_extend(points, normalize(normals[holes][order]), sep)
        if len(points) == before:
            return points, rounds
    return points, rounds


def covering_radius(points: np.ndarray) -> float:
    """Exact covering radius of a point set on S^d (d >= 2) from its convex hull."""
    hull = ConvexHull(points)
    return float(np.sqrt(np.maximum(0.0, 2.0 + 2.0 * hull.equations[:, -1])).max())


@dataclass
class Net:
    """Level-``level`` net: a 2^-level separated set whose 2^-level caps cover S^d."""

    d: int
    level: int
    points: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def spacing(self) -> float:
        return 2.0 ** (-self.level)

    def __len__(self) -> int:
        return len(self.points)

    def caps(self, radius: float | None = None) -> list[Cap]:
        rad = self.spacing if radius is None else radius
        return [Cap(p, rad) for p in self.points]


def estimated_net_size(d: int, n: int) -> float:
    """Packing bound on card(R_n): disjoint caps of radius 2^-(n+1) fit in S^d."""
    return 1.0 / cap_measure(d, min(2.0, 2.0 ** (-(n + 1))))


def build_net(d: int, n_max: int, seed: int = 0, *, oversample: float = 4.0,
              exhaustive: bool = True, max_points: float = 1e7,
              hull_limit: float = 2e6) -> list[Net]:
    """Nested nets R_1, ..., R_{n_max}.

    R_{n+1} starts from R_n and is grown by greedy insertion over a
    candidate stream, then closed under a covering fill-in: exact gap
    filling on the circle, Delaunay hole filling via the convex hull on
    higher spheres (randomized probing beyond ``hull_limit``).  On the circle the default
    (``exhaustive``) stream is a fine uniform grid swept in angular order;
    otherwise the stream is quasi-random.  The north pole is always the
    first point.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if d < 1:
        raise ValueError("d must be >= 1")
    estimate = estimated_net_size(d, n_max)
    if estimate > max_points:
        raise ResourceLimitError(
            f"R_{n_max} on S^{d} may hold up to {estimate:.3g} points (limit {max_points:.3g})")
    rng = np.random.default_rng([seed, d, 17])
    points = north_pole(d)[None, :]
    nets: list[Net] = []
    consumed = 0
    for n in range(1, n_max + 1):
        sep = 2.0 ** (-n)
        # candidate density: `oversample` candidates per disjoint sep/2 cap
        target = int(math.ceil(oversample / cap_measure(d, min(2.0, sep / 2.0))))
        if d == 1 and exhaustive:
            points = _circle_sweep_extend(points, sep, seed + n)
        else:
            stream = candidate_stream(d, target, consumed, seed)
            consumed += target
            points = _greedy_extend(points, stream, sep)
        if d == 1:
            points = _fill_circle_gaps(points, sep)
            fill_rounds = 0
        elif len(points) > d + 1 and len(points) * d < hull_limit:
            points, fill_rounds = _fill_hull_holes(points, sep)
        else:
            fill_rounds = 0
            for _ in range(50):
                probe = normalize(rng.standard_normal((max(4096, 2 * len(points)), d + 1)))
                before = len(points)
                points = _greedy_extend(points, probe, sep)
                fill_rounds += 1
                if len(points) == before:
                    break
        nets.append(Net(d=d, level=n, points=points.copy(), seed=seed,
                        meta={"candidates": consumed, "fill_rounds": fill_rounds}))
    return nets


@dataclass
class NetReport:
    level: int
    cardinality: int
    min_separation: float
    covering_gap: float
    cardinality_ratio: float
    samples: int

    @property
    def separation_ok(self) -> bool:
        return self.min_separation >= 2.0 ** (-self.level)

    @property
    def covering_ok(self) -> bool:
        return self.covering_gap < 2.0 ** (-self.level)

    @property
    def ok(self) -> bool:
        return self.separation_ok and self.covering_ok

    def as_dict(self) -> dict:
        return {
            "level": self.level, "cardinality": self.cardinality,
            "min_separation": self.min_separation, "covering_gap": self.covering_gap,
            "cardinality_ratio": self.cardinality_ratio, "samples": self.samples,
            "separation_ok": self.separation_ok, "covering_ok": self.covering_ok,
        }


def min_pairwise_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return float("inf")
    dist, _ = cKDTree(points).query(points, k=2)
    # exact recomputation on the reported pairs
    return float(np.min(dist[:, 1]))


def verify_net(net: Net, samples: int = 100_000, seed: int = 0) -> NetReport:
    """Separation (exact), covering gap (sampled) and cardinality ratio of a net."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    probe = normalize(rng.standard_normal((samples, net.d + 1)))
    tree = cKDTree(net.points)
    gap, _ = tree.query(probe, k=1)
    return NetReport(
        level=net.level,
        cardinality=len(net.points),
        min_separation=min_pairwise_distance(net.points),
        covering_gap=float(gap.max()),
        cardinality_ratio=len(net.points) / 2.0 ** (net.level * net.d),
        samples=samples,
    )


def nets_by_level(nets: Sequence[Net]) -> dict[int, Net]:
    return {net.level: net for net in nets}


def random_points(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return normalize(rng.standard_normal((count, d + 1)))


def _tangent_frame(center: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the tangent space at ``center``."""
    dim = center.size
    m = np.eye(dim) - np.outer(center, center)
    u, s, _ = np.linalg.svd(m)
    return u[:, :dim - 1].T


def point_at(center: np.ndarray, theta, direction: np.ndarray) -> np.ndarray:
    """Points at polar angle ``theta`` from ``center`` along unit tangent ``direction``."""
    theta = np.asarray(theta, dtype=float)[..., None]
    return np.cos(theta) * center + np.sin(theta) * direction


def sample_in_cap(center, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Points distributed according to sigma restricted to the cap."""
    center = as_point(center)
    d = center.size - 1
    mass = cap_measure(d, radius)
    u = rng.random(count) * mass
    # invert the cap-measure map I_x(d/2, d/2) to get the polar angle
    x = special.betaincinv(d / 2.0, d / 2.0, u)
    theta = 2.0 * np.arcsin(np.sqrt(np.clip(x, 0.0, 1.0)))
    frame = _tangent_frame(center)
    if d == 1:
        signs = rng.choice([-1.0, 1.0], size=count)
        dirs = signs[:, None] * frame[0][None, :]
    else:
        coef = normalize(rng.standard_normal((count, d)))
        dirs = coef @ frame
    pts = point_at(center, theta, dirs)
    return normalize(pts)
