import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from capfield.exponents import beta_hat_from_values
from capfield.poisson import CapFunction, kernel_value, l1_norm, poisson_values
from capfield.slicer import check_domination, random_cap_measure, slice_radii
from capfield.sphere import (Cap, GaugeSpec, cap_inside, cap_measure, caps_disjoint,
                             chordal_distance, dilate_cap, five_r_disjointify, random_points,
                             sample_in_cap)

seeds = st.integers(0, 2 ** 32 - 1)
dims = st.sampled_from([1, 2])
fast = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@fast
@given(d=st.integers(1, 6), a=st.floats(1e-6, 2.0), b=st.floats(1e-6, 2.0))
def test_cap_measure_monotone(d, a, b):
    lo, hi = sorted((a, b))
    assert cap_measure(d, lo) <= cap_measure(d, hi)
    if hi - lo > 1e-6:
        assert cap_measure(d, lo) < cap_measure(d, hi)
    assert 0 < cap_measure(d, lo) <= 1


@fast
@given(seed=seeds, d=dims, count=st.integers(1, 25))
def test_five_r_disjoint_and_covering(seed, d, count):
    rng = np.random.default_rng(seed)
    caps = [Cap(p, float(r)) for p, r in zip(random_points(d, count, rng), rng.uniform(0.01, 0.5, count))]
    kept = five_r_disjointify(caps)
    for i, a in enumerate(kept):
        for b in kept[i + 1:]:
            assert caps_disjoint(a, b)
    for c in caps:
        assert any(cap_inside(c, k.scaled(5)) for k in kept)


@fast
@given(gamma=st.floats(0.1, 3.0), psi=st.floats(0.1, 3.0), r=st.floats(1e-3, 1.0))
def test_dilation_round_trip(gamma, psi, r):
    there = GaugeSpec(beta=0.5, gamma=gamma, psi_gamma=psi)
    back = GaugeSpec(beta=0.5, gamma=psi, psi_gamma=gamma)
    cap = Cap([0, 1], r)
    mid = dilate_cap(cap, there)
    if mid.radius < 2.0:
        assert math.isclose(dilate_cap(mid, back).radius, r, rel_tol=1e-9)


@fast
@given(seed=seeds, d=dims, n=st.integers(1, 12))
def test_containment_used_in_growth(seed, d, n):
    # y in kappa(x, 2^-n) implies kappa(y, 2^-n) inside kappa(x, 2 * 2^-n)
    rng = np.random.default_rng(seed)
    s = 2.0 ** -n
    x = random_points(d, 1, rng)[0]
    y = sample_in_cap(x, s, 1, rng)[0]
    z = sample_in_cap(y, s, 50, rng)
    assert np.all(chordal_distance(z, x) < 2 * s)


@fast
@given(seed=seeds, d=dims, r=st.floats(0.0, 0.999), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_poisson_linear(seed, d, r, a, b):
    rng = np.random.default_rng(seed)
    f = CapFunction(d, random_points(d, 3, rng), rng.uniform(0.05, 2.0, 3), rng.normal(size=3))
    g = CapFunction(d, random_points(d, 2, rng), rng.uniform(0.05, 2.0, 2), rng.normal(size=2))
    ys = random_points(d, 3, rng)
    lhs = poisson_values(f * a + g * b, r, ys)
    rhs = a * poisson_values(f, r, ys) + b * poisson_values(g, r, ys)
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


@fast
@given(seed=seeds, d=dims, r=st.floats(0.0, 0.9999))
def test_poisson_nonnegative_and_bounded(seed, d, r):
    rng = np.random.default_rng(seed)
    f = CapFunction(d, random_points(d, 4, rng), rng.uniform(1e-3, 1.0, 4), rng.exponential(size=4))
    vals = poisson_values(f, r, random_points(d, 4, rng))
    assert np.all(vals >= 0)
    assert np.all(vals <= l1_norm(f) * 2 / (1 - r) ** d * (1 + 1e-9))


@fast
@given(d=st.integers(1, 4), r=st.floats(0.0, 0.999999), delta=st.floats(0.0, 2.0))
def test_kernel_bounds(d, r, delta):
    v = kernel_value(d, r, delta)
    assert 0 <= v <= 2 / (1 - r) ** d
    assert math.isclose(kernel_value(d, r, 0.0), (1 + r) / (1 - r) ** d, rel_tol=1e-12)


@fast
@given(d=dims, r=st.floats(0.01, 0.9999), delta=st.floats(0.0, 1.999))
def test_sandwich(d, r, delta):
    dec = slice_radii(d, r)
    P = kernel_value(d, r, delta)
    s = dec.step(delta)
    assert dec.c0 * s <= P * (1 + 1e-12) <= s * (1 + 1e-12) ** 2


@settings(max_examples=40, deadline=None)
@given(seed=seeds, d=dims, logr=st.floats(-3.0, -0.3))
def test_domination_holds(seed, d, logr):
    rng = np.random.default_rng(seed)
    mu = random_cap_measure(d, rng)
    r = 1 - 10 ** logr
    res = check_domination(mu, random_points(d, 1, rng)[0], r)
    assert res.ok
    assert res.delta_star >= 1 - r


@fast
@given(seed=seeds, c=st.floats(1.0, 1e3), n_min=st.integers(1, 8))
def test_beta_hat_scale_bound(seed, c, n_min):
    rng = np.random.default_rng(seed)
    ns = np.arange(n_min, n_min + 8)
    vals = 2.0 ** (ns * rng.uniform(0, 1, len(ns)))
    b1 = beta_hat_from_values(vals, ns, 6, 1)
    b2 = beta_hat_from_values(c * vals, ns, 6, 1)
    assert 0 <= b2 - b1 <= math.log2(c) / n_min + 1e-12
    assert b2 <= 1
