import math

import numpy as np
import pytest

from capfield.constructions import (CoveringSequence, coarse_level, divergence_function,
                                    gauge_compatible, geometric_witness, limsup_cover_sets,
                                    omega_series_terms, point_covering, residual_witness,
                                    saturating_function, saturating_unnormalized, series_converges)
from capfield.poisson import CapFunction, l1_norm, poisson_values
from capfield.sphere import Cap, GaugeSpec, cap_measure, north_pole, random_points
from capfield.suites import growth_quantities, point_divergence_witness


def test_coarse_level_examples():
    assert coarse_level(10, 2) == 6
    assert coarse_level(9, 1.5) == 7
    assert coarse_level(6, 3) == 3


def test_coarse_level_near_one():
    for n in range(1, 101):
        N = coarse_level(n, 1.01)
        assert N == math.floor(n / 1.01) + 1
        assert N >= 0.99 * n


def test_coarse_level_rejects_alpha():
    with pytest.raises(ValueError):
        coarse_level(5, 1.0)


def test_limsup_level_structure(nets1):
    layer = limsup_cover_sets(nets1, 2, 10)
    assert layer.N == 6
    assert np.array_equal(layer.centers, nets1[5].points)
    assert all(c.radius == 2.0 ** -10 for c in layer.caps)


def test_limsup_measure_against_membership(nets1):
    layer = limsup_cover_sets(nets1, 2, 10)
    bound = layer.measure_bound()
    assert bound == pytest.approx(len(nets1[5].points) * cap_measure(1, 2.0 ** -10))
    x = random_points(1, 10 ** 6, np.random.default_rng(7))
    frac = layer.contains(x).mean()
    # caps of R_6 at radius 2^-10 are disjoint, so the bound is attained
    assert frac == pytest.approx(bound, abs=2e-3)
    assert frac <= bound + 2e-3


def test_limsup_missing_level(nets1):
    with pytest.raises(KeyError):
        limsup_cover_sets(nets1[:3], 2, 10)


def test_limsup_samples_are_members(nets1, rng):
    layer = limsup_cover_sets(nets1, 3, 12)
    assert layer.contains(layer.sample(200, rng)).all()


def test_saturating_structure(nets1):
    n, d = 6, 1
    raw = saturating_unnormalized(nets1, d, n)
    assert np.all(raw.radii == 2 * 2.0 ** -n)
    start = 0
    for N in range(1, n + 2):
        m = len(nets1[N - 1].points)
        assert np.allclose(raw.weights[start:start + m], 2.0 ** ((n - N) * d) / (n + 1))
        start += m
    assert start == raw.n_terms


def test_saturating_normalized(nets1):
    for n in (4, 8, 12):
        f = saturating_function(nets1, 1, n)
        assert l1_norm(f) == pytest.approx(1.0, abs=1e-12)
        assert np.all(f.weights > 0)


def test_saturating_raw_norm_uniformly_bounded(nets1):
    norms = [l1_norm(saturating_unnormalized(nets1, 1, n)) for n in range(4, 13)]
    # empirical bound recorded for seed 0
    assert max(norms) == pytest.approx(3.8112659568652454, rel=1e-10)
    assert max(norms) <= 4.0


def test_saturating_growth_on_layer(nets1):
    q = growth_quantities(nets1, 1, [10], [2], samples=50, seed=0)[(10, 2)]
    assert q.min() > 0
    assert q.min() == pytest.approx(0.49377890838106947, rel=1e-9)


def test_saturating_missing_levels(nets1):
    with pytest.raises(KeyError):
        saturating_function(nets1[:5], 1, 8)


def test_residual_zero_perturbation(nets1, rng):
    h = residual_witness(CapFunction.zero(1), nets1, 6)
    f = saturating_function(nets1, 1, 6)
    ys = random_points(1, 20, rng)
    assert np.allclose(poisson_values(h, 0.9, ys), poisson_values(f, 0.9, ys) / 6, atol=1e-12)
    assert l1_norm(h) == pytest.approx(1 / 6, abs=1e-12)


def test_residual_on_constant(nets1, rng):
    n, alpha = 12, 2
    g = CapFunction.constant(1)
    h = residual_witness(g, nets1, n)
    layer = limsup_cover_sets(nets1, alpha, n)
    ys = layer.sample(50, rng)
    r = 1 - 2.0 ** -n
    diff = poisson_values(h, r, ys) - poisson_values(g, r, ys)
    fn = poisson_values(saturating_function(nets1, 1, n), r, ys)
    assert np.allclose(diff, fn / n, rtol=1e-10)
    q = n * n * 2.0 ** (-(n - layer.N)) * diff
    assert q.min() > 0.3


def test_geometric_witness_levels(nets1):
    W = geometric_witness(nets1, 1, 14)
    assert W.meta["levels"] == [2, 4, 8]
    assert W.meta["truncation"] == 14
    assert l1_norm(W) == pytest.approx(0.5 + 0.25 + 0.125, abs=1e-12)


def test_bucketing_partitions_radii():
    caps = [Cap([0, 1], s) for s in (0.5, 0.3, 0.26, 0.25, 0.2, 0.01)]
    cov = CoveringSequence(1, [caps[:3], caps[3:]])
    buckets = cov.buckets()
    assert sorted(buckets) == [1, 2, 6]
    for n, group in buckets.items():
        assert all(2.0 ** -(n + 1) < c.radius <= 2.0 ** -n for c in group)
    assert sum(len(g) for g in buckets.values()) == len(caps)


def test_bucketing_deduplicates():
    cap = Cap([0, 1], 0.1)
    cov = CoveringSequence(1, [[cap], [cap]])
    assert sum(len(g) for g in cov.buckets().values()) == 1


def test_point_divergence_function_shape():
    f = point_divergence_witness(0.5, 1, truncation=14)
    ns = np.arange(1, 15)
    assert np.allclose(f.radii, 2 * 2.0 ** -ns.astype(float))
    assert np.allclose(f.weights, ns * 2.0 ** (ns / 2))
    assert f.meta["truncation"] == 14


def test_point_divergence_profile_grows():
    f = point_divergence_witness(0.5, 1)
    N = north_pole(1)
    ns = np.arange(1, 15)
    ratio = np.array([poisson_values(f, 1 - 2.0 ** -n, N[None, :])[0] / 2 ** (n / 2) for n in ns])
    assert np.all(np.diff(ratio) > 0)
    slope = np.polyfit(ns[6:], ratio[6:], 1)[0]
    assert slope > 1.0
    for M in (2, 5, 10):
        assert ratio[-1] > M


def test_divergence_l1_series_converges():
    cov = point_covering(north_pole(1), 30)
    terms = omega_series_terms(cov, GaugeSpec(0.5, 0.5))
    assert series_converges([terms[n] for n in sorted(terms)])
    f = divergence_function(cov, GaugeSpec(0.5, 0.5), 30)
    partial = np.cumsum(f.weights * cap_measure(1, f.radii))
    assert partial[-1] - partial[-5] < 1e-3 * partial[-1]


def test_divergence_empty_covering():
    f = divergence_function(CoveringSequence(1, []), GaugeSpec(0.5, 0.5))
    assert f.n_terms == 0


def test_divergence_rejects_incompatible_gauge():
    cov = point_covering(north_pole(1), 10)
    assert not gauge_compatible(GaugeSpec(0.5, 0.7), 1)
    with pytest.raises(ValueError):
        divergence_function(cov, GaugeSpec(0.5, 0.7))


def test_divergence_rejects_divergent_omega():
    cov = point_covering(north_pole(1), 20)
    cov.omega = lambda n: 4.0 ** n
    with pytest.raises(ValueError):
        divergence_function(cov, GaugeSpec(0.5, 0.5))


def test_power_log_gauge_compatibility():
    assert gauge_compatible(GaugeSpec(0.5, 0.4, kind="power-log"), 1)
    assert not gauge_compatible(GaugeSpec(0.5, 0.5, kind="power-log"), 1)


def test_mass_bound_reporting():
    cov = point_covering(north_pole(1), 5)
    gauge = GaugeSpec(0.5, 0.5)
    assert cov.mass_profile(gauge)[0] == pytest.approx(0.5 ** 0.5)
    assert not cov.satisfies_mass_bound(gauge)
    assert cov.satisfies_mass_bound(GaugeSpec(0.5, 1.0))
