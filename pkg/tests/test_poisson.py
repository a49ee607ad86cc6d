import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from capfield.poisson import (CapFunction, L1BoundWarning, RadialPoint, arc_integrals,
                              cap_kernel_integral, cap_kernel_integrals, cap_lower_constant,
                              cap_lower_values, circle_poisson_sum, kernel_normalization_check,
                              kernel_value, l1_norm, poisson_integral, poisson_values, total_mass)
from capfield.sphere import Cap, cap_measure, north_pole, random_points
from capfield.suites import riemann_arc_oracle


def test_kernel_examples():
    assert kernel_value(1, 0.5, 0.0) == pytest.approx(3.0, abs=1e-15)
    for d in (1, 2, 5):
        for r in (0.0, 0.3, 0.99):
            assert kernel_value(d, r, 0.0) == pytest.approx((1 + r) / (1 - r) ** d, rel=1e-12)
            assert kernel_value(d, r, 0.0) <= 2 / (1 - r) ** d
    assert np.allclose(kernel_value(3, 0.0, np.linspace(0, 2, 7)), 1.0)


def test_kernel_rejects_boundary():
    with pytest.raises(ValueError):
        kernel_value(1, 1.0, 0.3)


def test_kernel_decreasing_in_delta():
    delta = np.linspace(0, 2, 500)
    for d in (1, 2, 3):
        v = kernel_value(d, 0.9, delta)
        assert np.all(np.diff(v) < 0) and np.all(v > 0)


def test_whole_sphere_integral_is_one():
    for d in (1, 2, 3):
        for gamma in (0.0, 0.7, 2.0):
            assert cap_kernel_integral(d, 0.8, gamma, 2.0) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_center_of_ball_gives_cap_measure(d):
    assert cap_kernel_integral(d, 0.0, 0.4, 0.3) == pytest.approx(cap_measure(d, 0.3), abs=1e-14)


def test_pinned_arc_integral():
    # midpoint rule on 10^6 arc nodes (independent oracle), frozen
    value = cap_kernel_integral(1, 0.9, 0.0, 0.1)
    assert value == pytest.approx(0.4840778667633891, abs=1e-9)
    assert riemann_arc_oracle(0.9, 0.0, 0.1) == pytest.approx(value, abs=1e-9)
    # crude equispaced trapezoid over the whole circle: edge effects only
    M = 10 ** 6
    t = 2 * np.pi * np.arange(M) / M
    P = 0.19 / (1 - 1.8 * np.cos(t) + 0.81)
    inside = 2 * np.abs(np.sin(t / 2)) < 0.1
    assert P[inside].sum() / M == pytest.approx(value, abs=3e-5)


def test_arc_oracle_random_triples(rng):
    for _ in range(10):
        r, g, rho = rng.uniform(0, 0.99), rng.uniform(0, 2), rng.uniform(1e-3, 2)
        assert cap_kernel_integral(1, r, g, rho) == pytest.approx(riemann_arc_oracle(r, g, rho), abs=1e-6)


def _s2_oracle(r, gamma, rho):
    """Direct double integral in cap coordinates (independent of the panel scheme)."""
    g = 2 * math.asin(gamma / 2)
    th_cap = 2 * math.asin(rho / 2)

    def f(phi, th):
        cosang = math.cos(g) * math.cos(th) + math.sin(g) * math.sin(th) * math.cos(phi)
        delta2 = max(0.0, 2 - 2 * cosang)
        return (1 - r * r) / ((1 - r) ** 2 + r * delta2) ** 1.5 * math.sin(th)

    val, _ = integrate.dblquad(f, 0, th_cap, 0, 2 * math.pi, epsabs=1e-11, epsrel=1e-10)
    return val / (4 * math.pi)


@pytest.mark.parametrize("r,gamma,rho", [(0.5, 0.3, 0.6), (0.8, 1.1, 0.5), (0.9, 0.05, 0.2)])
def test_s2_matches_double_integral(r, gamma, rho):
    assert cap_kernel_integral(2, r, gamma, rho) == pytest.approx(_s2_oracle(r, gamma, rho), rel=1e-7)


def test_s3_radial_and_qmc_agree():
    exact = cap_kernel_integral(3, 0.7, 0.0, 0.8)
    vals, err = cap_kernel_integrals(3, 0.7, 1e-9, 0.8, return_error=True)
    assert abs(vals[0] - exact) < 5 * max(err[0], 1e-4)


@pytest.mark.parametrize("d,r", [(1, 0.5), (2, 0.99), (1, 0.999), (2, 0.999)])
def test_normalization(d, r):
    assert kernel_normalization_check(d, r) < 1e-8


def test_normalization_near_singular():
    assert kernel_normalization_check(2, 0.999999) < 1e-6


def test_cap_integral_bounded_and_monotone():
    rho = np.linspace(0.01, 2.0, 60)
    for d in (1, 2):
        v = cap_kernel_integrals(d, 0.95, 0.3, rho)
        assert np.all(v <= 1.0) and np.all(v >= 0.0)
        assert np.all(np.diff(v) >= -1e-12)


def test_cap_integral_argument_checks():
    with pytest.raises(ValueError):
        cap_kernel_integral(1, 1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        cap_kernel_integral(1, 0.5, 0.0, 0.0)


def test_circle_kernel_matches_closed_form(rng):
    r = 0.97
    sites = rng.uniform(-np.pi, np.pi, 40)
    centers = rng.uniform(-np.pi, np.pi, 25)
    widths = rng.uniform(0.001, np.pi, 25)
    weights = rng.normal(size=25)
    fast = circle_poisson_sum(r, sites, centers, widths, weights)
    g = np.abs(np.angle(np.exp(1j * (sites[:, None] - centers[None, :]))))
    slow = arc_integrals(r, g, np.broadcast_to(widths, g.shape)) @ weights
    assert np.allclose(fast, slow, atol=1e-12)


def test_lower_constant_examples():
    grid = [0.6, 0.9, 0.99, 0.999]
    for d, frozen in ((1, 0.43590578), (2, 0.27924078)):
        vals = cap_lower_values(d, grid)
        assert cap_lower_constant(d, grid) == pytest.approx(frozen, abs=1e-7)
        assert vals.min() > 0 and vals.max() / vals.min() <= 2


def test_lower_constant_refinement_stable():
    from capfield.poisson import _s2_cap_integrals
    coarse, _ = _s2_cap_integrals(0.99, np.array([0.0]), np.array([0.01]), nodes=(12, 20))
    fine, _ = _s2_cap_integrals(0.99, np.array([0.0]), np.array([0.01]), nodes=(20, 32))
    assert abs(coarse[0] - fine[0]) < 1e-6


def test_lower_constant_rejects_small_r():
    with pytest.raises(ValueError):
        cap_lower_constant(1, [0.4])


def test_constant_function_is_harmonic_one(rng):
    one = CapFunction.constant(2)
    ys = random_points(2, 5, rng)
    assert np.allclose(poisson_values(one, 0.9, ys), 1.0, atol=1e-8)
    assert poisson_integral(CapFunction.constant(1), RadialPoint(6, [0, 1])) == pytest.approx(1.0, abs=1e-12)


def test_atom_at_site():
    for d in (1, 2):
        N = north_pole(d)
        mu = CapFunction.atom(N)
        r = 0.9
        assert poisson_integral(mu, (r, N)) == pytest.approx((1 + r) / (1 - r) ** d, rel=1e-12)


def test_radial_point():
    site = RadialPoint(3, [0, 1])
    assert site.r == 0.875
    with pytest.raises(ValueError):
        RadialPoint(0, [0, 1])


def test_global_bound_on_unit_norm_function(rng):
    caps = [Cap(p, 0.05) for p in random_points(1, 6, rng)]
    f = CapFunction.from_caps(caps, np.ones(6))
    f = f * (1 / l1_norm(f))
    for r in (0.5, 0.99, 0.9999):
        vals = poisson_values(f, r, random_points(1, 50, rng))
        assert np.all(vals <= 2 / (1 - r) + 1e-9)


def test_l1_examples():
    cap = Cap([0, 0, 1], 0.4)
    f = CapFunction.from_caps([cap], [2.5])
    assert l1_norm(f) == pytest.approx(2.5 * cap_measure(2, 0.4))
    g = CapFunction.from_caps([Cap([0, 0, 1], 0.4), Cap([0, 0, 1], 0.3)], [1, 1])
    assert l1_norm(g) == pytest.approx(cap_measure(2, 0.4) + cap_measure(2, 0.3))


def test_l1_mixed_sign_warns():
    f = CapFunction.from_caps([Cap([0, 1], 0.4), Cap([0, 1], 0.3)], [1, -1])
    with pytest.warns(L1BoundWarning):
        bound = l1_norm(f)
    assert bound >= abs(total_mass(f))


def test_l1_rejects_atoms():
    with pytest.raises(ValueError):
        l1_norm(CapFunction.atom([0, 1]))


def test_atoms_need_measure_mode():
    with pytest.raises(ValueError):
        CapFunction(1, np.zeros((0, 2)), [], [], atom_points=[[0, 1]], atom_masses=[1.0])


def test_saturating_raw_norm_against_monte_carlo(nets1):
    from capfield.constructions import saturating_unnormalized
    f4 = saturating_unnormalized(nets1, 1, 4)
    exact = l1_norm(f4)
    assert exact == pytest.approx(3.6788769437645588, rel=1e-12)
    x = random_points(1, 10 ** 6, np.random.default_rng(123))
    assert f4(x).mean() == pytest.approx(exact, rel=2e-3)


def test_linearity_example(rng):
    a = CapFunction.from_caps([Cap(p, 0.3) for p in random_points(2, 3, rng)], [1, 2, 3])
    b = CapFunction.from_caps([Cap(p, 0.7) for p in random_points(2, 2, rng)], [-1, 0.5])
    ys = random_points(2, 4, rng)
    lhs = poisson_values(a * 2.0 - b * 3.0, 0.9, ys)
    rhs = 2 * poisson_values(a, 0.9, ys) - 3 * poisson_values(b, 0.9, ys)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_s3_qmc_against_plain_monte_carlo():
    rng = np.random.default_rng(1)
    x = random_points(3, 10 ** 6, rng)
    N = north_pole(3)
    g = 2 * math.asin(0.35)
    z = np.array([math.sin(g), 0, 0, math.cos(g)])
    delta = np.linalg.norm(x - N, axis=1)
    P = (1 - 0.36) / ((1 - 0.6) ** 2 + 0.6 * delta ** 2) ** 2 * (np.linalg.norm(x - z, axis=1) < 0.9)
    se = P.std() / 1000
    assert cap_kernel_integral(3, 0.6, 0.7, 0.9) == pytest.approx(P.mean(), abs=5 * se)


def test_whole_sphere_exact_in_higher_dimension():
    vals, err = cap_kernel_integrals(4, 0.8, 0.5, 2.0, return_error=True)
    assert abs(vals[0] - 1) < 1e-8 and err[0] < 1e-8
