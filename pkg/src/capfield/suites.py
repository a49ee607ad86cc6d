"""Verification suites shared by ``capfield verify`` and the acceptance tests.

Each suite returns a :class:`SuiteResult` whose ``details`` hold the
measured quantities, so a failing run says which invariant broke and by
how much.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .constructions import (
    coarse_level, divergence_function, geometric_witness, limsup_cover_sets,
    omega_series_terms, point_covering, saturating_function, series_converges,
)
from .exponents import SpectrumConfig, box_dimension, spectrum
from .poisson import (
    CapFunction, cap_kernel_integral, cap_lower_values, kernel_normalization_check,
    kernel_value, poisson_values,
)
from .slicer import (
    check_domination, harnack_c0, harnack_ratio_min, random_cap_measure, slice_radii,
)
from .sphere import (
    GaugeSpec, Net, build_net, chord_to_angle, north_pole, random_points, verify_net,
)


@dataclass
class SuiteResult:
    name: str
    ok: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.summary}"

    def as_dict(self) -> dict:
        return {"name": self.name, "ok": self.ok, "summary": self.summary,
                "details": _jsonable(self.details), "seconds": round(self.seconds, 3)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _timed(fn: Callable[..., SuiteResult]):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@lru_cache(maxsize=8)
def cached_nets(d: int, n_max: int, seed: int = 0) -> tuple[Net, ...]:
    return tuple(build_net(d, n_max, seed))


# ---------------------------------------------------------------------------
# kernel identities and quadrature


@_timed
def kernel_suite(radii=(0.5, 0.9, 0.99, 0.999), dims=(1, 2)) -> SuiteResult:
    """Normalization, peak value and the global bound 2/(1-r)^d."""
    norm_err = {f"d={d},r={r}": kernel_normalization_check(d, r) for d in dims for r in radii}
    peak_err = 0.0
    bound_ok = True
    deltas = np.linspace(0.0, 2.0, 2001)
    for d in (1, 2, 3, 4):
        for r in (0.0,) + tuple(radii) + (1 - 2.0 ** -20,):
            exact = (1 + r) / (1 - r) ** d
            peak_err = max(peak_err, abs(kernel_value(d, r, 0.0) - exact) / exact)
            bound_ok &= bool(np.all(kernel_value(d, r, deltas) <= 2.0 / (1 - r) ** d))
    worst = max(norm_err.values())
    ok = worst < 1e-8 and peak_err < 1e-12 and bound_ok
    return SuiteResult("kernel", ok,
                       f"normalization err {worst:.2e} (<1e-8), peak rel err {peak_err:.1e} (<1e-12), "
                       f"global bound {'holds' if bound_ok else 'violated'}",
                       {"normalization": norm_err, "peak_rel_err": peak_err, "bound_ok": bound_ok})


def riemann_arc_oracle(r: float, gamma: float, rho: float, points: int = 10 ** 6) -> float:
    """Midpoint rule for the circle Poisson kernel over the arc, directly from the formula."""
    g = 2.0 * math.asin(min(gamma, 2.0) / 2.0)
    w = 2.0 * math.asin(min(rho, 2.0) / 2.0)
    t = g - w + (np.arange(points) + 0.5) * (2.0 * w / points)
    vals = (1.0 - r * r) / (1.0 - 2.0 * r * np.cos(t) + r * r)
    return float(vals.sum() * (2.0 * w / points) / (2.0 * np.pi))


@_timed
def quadrature_suite(triples: int = 100, points: int = 10 ** 6, seed: int = 0,
                     tol: float = 1e-6) -> SuiteResult:
    """d = 1 closed form against a dense Riemann sum on random (r, gamma, rho)."""
    rng = np.random.default_rng([seed, 2])
    errs = []
    for _ in range(triples):
        r = rng.uniform(0.0, 0.99)
        gamma = rng.uniform(0.0, 2.0)
        rho = rng.uniform(1e-3, 2.0)
        errs.append(abs(cap_kernel_integral(1, r, gamma, rho) - riemann_arc_oracle(r, gamma, rho, points)))
    worst = float(max(errs))
    return SuiteResult("quadrature", worst < tol,
                       f"max |closed form - Riemann| = {worst:.2e} over {triples} triples (<{tol:g})",
                       {"max_abs_err": worst, "triples": triples})


@_timed
def cap_lower_suite(radii=(0.6, 0.9, 0.99, 0.999), dims=(1, 2)) -> SuiteResult:
    """Centered (1 - r)-cap integrals: positive and within a factor 2 across r."""
    details, ok = {}, True
    parts = []
    for d in dims:
        vals = cap_lower_values(d, radii)
        spread = float(vals.max() / vals.min())
        good = bool(vals.min() > 0 and spread <= 2.0)
        ok &= good
        details[f"d={d}"] = {"values": vals, "C_hat": float(vals.min()), "spread": spread}
        parts.append(f"d={d}: C_hat={vals.min():.4f}, spread {spread:.3f}")
    return SuiteResult("caplower", ok, "; ".join(parts) + " (spread <= 2)", details)


# ---------------------------------------------------------------------------
# slice decomposition


@_timed
def domination_suite(instances: int = 1000, seed: int = 0, d2_share: float = 0.2) -> SuiteResult:
    """Ladder invariants to 1e-12 plus the domination inequality on random measures."""
    rng = np.random.default_rng([seed, 31])
    inv_err = 0.0
    sandwich_ok = True
    idempotent = True
    harnack_ok = True
    for d in (1, 2, 3):
        c0 = harnack_c0(d)
        harnack_ok &= bool(harnack_ratio_min(d, np.linspace(0.01, 0.999999, 200)).min() >= c0)
        for r in (0.5, 0.9, 0.99, 1 - 2.0 ** -10, 1 - 2.0 ** -20):
            dec = slice_radii(d, r)
            if dec.k > 2:
                inv_err = max(inv_err, float(np.max(np.abs(dec.interior_ratios() - c0))) / c0)
            inv_err = max(inv_err, abs(dec.jumps.sum() - dec.levels[0]) / dec.levels[0])
            inv_err = max(inv_err, abs(dec.radii[1] - (1 - r) / 2))
            if np.any(dec.jumps <= 0) or dec.radii[-1] != 2.0:
                inv_err = max(inv_err, 1.0)
            again = dec.rederive()
            idempotent &= bool(np.array_equal(again.radii, dec.radii) and np.array_equal(again.jumps, dec.jumps))
        for _ in range(200):
            r = 1 - 10 ** rng.uniform(-6, -0.3)
            dec = slice_radii(d, r)
            delta = rng.uniform(0.0, 2.0) if rng.random() < 0.5 else (1 - r) * rng.uniform(0, 20)
            delta = min(delta, 2.0 - 1e-9)
            ker = kernel_value(d, r, delta)
            step = float(dec.step(delta))
            sandwich_ok &= bool(dec.c0 * step <= ker * (1 + 1e-12) and ker <= step * (1 + 1e-12))
    n_fail, min_slack, dstar_ok = 0, np.inf, True
    failures = []
    for i in range(instances):
        d = 2 if rng.random() < d2_share else 1
        y = random_points(d, 1, rng)[0]
        r = 1 - 10 ** rng.uniform(-4 if d == 1 else -3, -0.3)
        mu = random_cap_measure(d, rng, n_caps=int(rng.integers(1, 6)), n_atoms=int(rng.integers(0, 3)),
                                focus=y if rng.random() < 0.5 else None,
                                scale=10 ** rng.uniform(-3, -0.3))
        res = check_domination(mu, y, r)
        if not res.ok:
            n_fail += 1
            failures.append({"i": i, "d": d, "r": r, "lhs": res.lhs, "rhs": res.rhs})
        dstar_ok &= res.delta_star >= 1 - r - 1e-15
        if res.lhs > 0:
            min_slack = min(min_slack, res.rhs / res.lhs)
    ok = inv_err <= 1e-12 and sandwich_ok and idempotent and harnack_ok and n_fail == 0 and dstar_ok
    return SuiteResult(
        "domination", ok,
        f"ladder err {inv_err:.1e} (<=1e-12), sandwich {sandwich_ok}, idempotent {idempotent}, "
        f"domination failures {n_fail}/{instances}, delta*>=1-r {dstar_ok}, min rhs/lhs {min_slack:.3g}",
        {"invariant_err": inv_err, "sandwich_ok": sandwich_ok, "idempotent": idempotent,
         "harnack_ok": harnack_ok, "failures": failures[:10], "min_slack": min_slack,
         "delta_star_ok": dstar_ok})


# ---------------------------------------------------------------------------
# nets


def check_nets(nets, samples: int = 100_000, seed: int = 0, stability: float = 1.5) -> SuiteResult:
    """Separation, covering, nesting and cardinality stability for a net family."""
    nets = sorted(nets, key=lambda n: n.level)
    failing = []
    rows = []
    for net in nets:
        rep = verify_net(net, samples=samples, seed=seed)
        rows.append(rep.as_dict())
        if not rep.separation_ok:
            failing.append(f"separation (level {net.level}: {rep.min_separation:.6g} < {2.0 ** -net.level:.6g})")
        if not rep.covering_ok:
            failing.append(f"covering (level {net.level}: gap {rep.covering_gap:.6g} >= {2.0 ** -net.level:.6g})")
    for a, b in zip(nets, nets[1:]):
        if len(b.points) < len(a.points) or not np.array_equal(b.points[:len(a.points)], a.points):
            failing.append(f"nesting (level {a.level} not contained in level {b.level})")
    ratios = np.array([len(n.points) * 2.0 ** (-n.level * n.d) for n in nets])
    spread = float(ratios.max() / ratios.min()) if len(ratios) else 1.0
    if spread > stability:
        failing.append(f"cardinality (max/min of card*2^-nd = {spread:.3f} > {stability})")
    ok = not failing
    summary = (f"{len(nets)} levels, card*2^-nd in [{ratios.min():.3f}, {ratios.max():.3f}] "
               f"(max/min {spread:.3f} <= {stability})") if ok else "failing: " + "; ".join(failing)
    return SuiteResult("nets", ok, summary, {"levels": rows, "ratios": ratios, "spread": spread,
                                             "failing": failing})


@_timed
def nets_suite(d: int = 1, n_max: int = 12, seed: int = 0, samples: int = 100_000) -> SuiteResult:
    """Net invariants for levels 1..n_max; +-20% about a common constant means max/min <= 1.5."""
    return check_nets(cached_nets(d, n_max, seed), samples=samples, seed=seed)


# ---------------------------------------------------------------------------
# constructions


def growth_quantities(nets, d: int, ns, alphas, samples: int = 50, seed: int = 0) -> dict:
    """q = n 2^-((n-N)d) P[f_n](r_n y) at sampled y in D_{n,alpha}."""
    rng = np.random.default_rng([seed, 53])
    out = {}
    for n in ns:
        f = saturating_function(nets, d, n)
        r = 1 - 2.0 ** (-n)
        for a in alphas:
            layer = limsup_cover_sets(nets, a, n)
            ys = layer.sample(samples, rng)
            q = n * 2.0 ** (-(n - layer.N) * d) * poisson_values(f, r, ys)
            out[(n, a)] = q
    return out


@_timed
def growth_suite(ns=(6, 8, 10, 12), alphas=(1.5, 2, 3), samples: int = 50, seed: int = 0,
                  factor: float = 4.0) -> SuiteResult:
    """Growth of the saturating functions on D_{n,alpha}: stable positive minimum of q."""
    nets = cached_nets(1, max(ns) + 2, seed)
    qs = growth_quantities(nets, 1, ns, alphas, samples, seed)
    mins = {f"n={n},alpha={a}": float(q.min()) for (n, a), q in qs.items()}
    lo, hi = min(mins.values()), max(mins.values())
    spread = hi / lo if lo > 0 else np.inf
    ok = lo > 0 and spread <= factor
    arg_hi = max(mins, key=mins.get)
    arg_lo = min(mins, key=mins.get)
    return SuiteResult("growth", ok,
                       f"min q in [{lo:.3f} ({arg_lo}), {hi:.3f} ({arg_hi})], spread {spread:.2f} (<= {factor:g})",
                       {"min_q": mins, "spread": spread, "C_hat": lo})


def point_divergence_witness(beta: float = 0.5, d: int = 1, truncation: int = 40) -> CapFunction:
    """f for E = {N}, R_j = {kappa(N, 2^-j)}, tau = s^-beta, phi = s^(d - beta), omega_n = n."""
    cov = point_covering(north_pole(d), truncation)
    return divergence_function(cov, GaugeSpec(beta, d - beta), truncation)


@_timed
def divergence_suite(beta: float = 0.5, n_eval: int = 14, truncation: int = 40,
                     M: float = 10.0) -> SuiteResult:
    """P[f](r_n N)/tau(2^-n) exceeds M and keeps increasing over the evaluated range."""
    f = point_divergence_witness(beta, 1, truncation)
    N = north_pole(1)
    ns = np.arange(1, n_eval + 1)
    ratios = np.array([poisson_values(f, 1 - 2.0 ** (-n), N[None, :])[0] * 2.0 ** (-beta * n) for n in ns])
    cov = point_covering(N, truncation)
    terms = omega_series_terms(cov, GaugeSpec(beta, 1 - beta))
    converges = series_converges([terms[k] for k in sorted(terms)])
    reach = ns[ratios >= M]
    # eventually increasing: strictly increasing on the second half of the range
    half = len(ns) // 2
    increasing = bool(np.all(np.diff(ratios[half:]) > 0))
    ok = bool(len(reach) > 0 and increasing and converges)
    first = int(reach[0]) if len(reach) else None
    return SuiteResult("divergence", ok,
                       f"ratio >= {M:g} first at n={first}, ratio({n_eval})={ratios[-1]:.2f}, "
                       f"increasing for n>={ns[half]}: {increasing}, L1 series converges: {converges}",
                       {"ratios": ratios, "first_n": first, "increasing": increasing,
                        "l1_series_converges": converges, "truncation": truncation})


# ---------------------------------------------------------------------------
# dimension proxies


@_timed
def dimension_suite(seed: int = 0, n_lo: int = 4, n_hi: int = 12, alpha: float = 2.0,
                    layer_range=(6, 12)) -> SuiteResult:
    """Box-counting slopes: full circle, a point, and the scale-by-scale D_alpha layers."""
    nets = cached_nets(1, max(n_hi, layer_range[1]) + 2, seed)
    full = box_dimension(lambda pts: np.ones(len(pts), dtype=bool), n_lo, n_hi, nets)
    point = box_dimension(north_pole(1)[None, :], n_lo, n_hi, nets)
    layered = box_dimension(lambda n: limsup_cover_sets(nets, alpha, n), *layer_range, nets, layered=True)
    checks = {"sphere": abs(full.dim - 1.0) <= 0.05, "point": abs(point.dim) <= 0.05,
              "D_alpha": abs(layered.dim - 1.0 / alpha) <= 0.15}
    return SuiteResult("dimension", all(checks.values()),
                       f"sphere {full.dim:.4f} (1+-0.05), point {point.dim:.4f} (0+-0.05), "
                       f"D_alpha layers {layered.dim:.4f} ({1 / alpha:g}+-0.15)",
                       {"sphere": full.dim, "point": point.dim, "D_alpha": layered.dim,
                        "D_alpha_r2": layered.fit_r2, "counts": layered.counts, "checks": checks})


# ---------------------------------------------------------------------------
# spectrum


DEFAULT_SPECTRUM = dict(d=1, n_max=14, seed=0, probe_level=12, n_lo=4, n_tail=6,
                        betas="0:1:0.125", tol=None, box_lo=4, box_hi=None)


def witness_pipeline(d: int = 1, n_max: int = 14, seed: int = 0, probe_level: int = 12):
    """Nets and the geometric witness W for the spectrum run."""
    nets = cached_nets(d, max(n_max, probe_level) + 1, seed)
    return nets, geometric_witness(nets, d, n_max)


def spectrum_checks(est, targets=(0.25, 0.5, 0.75), slack: float = 0.2) -> tuple[bool, dict]:
    by_beta = {round(p.beta, 12): p for p in est.points}
    dev = {}
    for b in targets:
        p = by_beta.get(round(b, 12))
        dev[b] = None if p is None else abs(p.dim - (est.d - b))
    target_ok = all(v is not None and v <= slack for v in dev.values())
    over = {p.beta: p.dim - (est.d - p.beta) for p in est.points}
    upper_ok = all(v <= slack for v in over.values())
    return target_ok and upper_ok, {"target_deviation": dev, "excess_over_upper": over,
                                    "target_ok": target_ok, "upper_ok": upper_ok}


@_timed
def spectrum_suite(seed: int = 0) -> SuiteResult:
    """Geometric witness W at d = 1 with the default spectrum configuration."""
    from .exponents import parse_beta_grid
    cfg = DEFAULT_SPECTRUM
    nets, W = witness_pipeline(cfg["d"], cfg["n_max"], seed, cfg["probe_level"])
    conf = SpectrumConfig(probe_level=cfg["probe_level"], n_range=(cfg["n_lo"], cfg["n_max"]),
                          n_tail=cfg["n_tail"])
    est = spectrum(W, parse_beta_grid(cfg["betas"]), nets, conf)
    ok, info = spectrum_checks(est)
    dev = ", ".join(f"{b:g}: dim {next(p.dim for p in est.points if abs(p.beta - b) < 1e-12):.3f}"
                    for b in (0.25, 0.5, 0.75))
    return SuiteResult("spectrum", ok,
                       f"{dev} (targets 1-beta +-0.2); upper bound {'holds' if info['upper_ok'] else 'violated'}; "
                       f"max beta_hat {float(est.exponents.max()):.3f}",
                       {**info, "table": est.table(), "max_beta_hat": float(est.exponents.max())})


SUITES: dict[str, Callable[[], SuiteResult]] = {
    "kernel": kernel_suite,
    "quadrature": quadrature_suite,
    "caplower": cap_lower_suite,
    "domination": domination_suite,
    "nets": nets_suite,
    "growth": growth_suite,
    "divergence": divergence_suite,
    "dimension": dimension_suite,
    "spectrum": spectrum_suite,
}
