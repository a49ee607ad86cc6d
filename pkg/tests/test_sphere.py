import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from capfield.sphere import (Cap, GaugeSpec, Net, ResourceLimitError, Slice, build_net,
                             cap_inside, cap_intersection_measure, cap_measure,
                             cap_measure_quadrature, caps_disjoint, chordal_distance,
                             dilate_cap, five_r_disjointify, north_pole, random_points,
                             sample_in_cap, verify_net)


def test_chordal_distance_examples():
    N = north_pole(1)
    assert chordal_distance(N, N) == 0.0
    assert chordal_distance(N, -N) == pytest.approx(2.0, abs=1e-15)
    assert chordal_distance([0, 1], [1, 0]) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_chordal_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        chordal_distance([0, 1], [0, 0, 1])


@pytest.mark.parametrize("d,delta,expected", [(1, 2.0, 1.0), (1, math.sqrt(2), 0.5),
                                              (2, math.sqrt(2), 0.5), (2, 2.0, 1.0)])
def test_cap_measure_examples(d, delta, expected):
    assert cap_measure(d, delta) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("bad", [0.0, -0.1, 2.5])
def test_cap_measure_range(bad):
    with pytest.raises(ValueError):
        cap_measure(1, bad)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_cap_measure_beta_matches_quadrature(d):
    for delta in (1e-3, 0.1, 0.7, 1.3, 1.99):
        assert cap_measure(d, delta) == pytest.approx(cap_measure_quadrature(d, delta), abs=1e-12)


@pytest.mark.parametrize("d,c1,c2", [(1, 0.318, 0.334), (2, 0.249, 0.251), (3, 0.195, 0.213)])
def test_ahlfors_ratio_bounds(d, c1, c2):
    # sigma(kappa(delta)) / delta^d on (0, 1]; bounds recorded per d
    grid = np.geomspace(1e-6, 1.0, 400)
    ratio = cap_measure(d, grid) / grid ** d
    assert c1 <= ratio.min() and ratio.max() <= c2


def test_cap_measure_monte_carlo(rng):
    x = random_points(2, 400_000, rng)
    inside = chordal_distance(x, north_pole(2)) < 0.6
    assert inside.mean() == pytest.approx(cap_measure(2, 0.6), abs=3e-3)


@pytest.mark.parametrize("d", [1, 2])
def test_cap_intersection_monte_carlo(d, rng):
    a, g, rb = 0.7, 0.5, 0.4
    N = north_pole(d)
    z = sample_in_cap(N, 2.0, 1, rng)[0]
    z = N * math.cos(2 * math.asin(g / 2)) + _orth(N, z) * math.sin(2 * math.asin(g / 2))
    assert chordal_distance(N, z) == pytest.approx(g, abs=1e-12)
    x = random_points(d, 400_000, rng)
    both = (chordal_distance(x, N) < a) & (chordal_distance(x, z) < rb)
    assert cap_intersection_measure(d, g, a, rb) == pytest.approx(both.mean(), abs=3e-3)


def _orth(N, z):
    v = z - (z @ N) * N
    return v / np.linalg.norm(v)


def test_cap_intersection_limits():
    assert cap_intersection_measure(1, 0.0, 0.3, 0.5) == pytest.approx(cap_measure(1, 0.3))
    assert cap_intersection_measure(2, 1.5, 0.3, 0.5) == 0.0
    assert cap_intersection_measure(2, 0.1, 2.0, 0.5) == pytest.approx(cap_measure(2, 0.5))


def test_cap_open_boundary():
    cap = Cap([0, 1], math.sqrt(2))
    assert not cap.contains(np.array([1.0, 0.0]))
    assert cap.contains(np.array([0.0, 1.0]))


def test_slice_measure_and_membership():
    s = Slice([0, 0, 1], 0.5, 1.0)
    assert s.measure() == pytest.approx(cap_measure(2, 1.0) - cap_measure(2, 0.5))
    assert not s.contains(np.array([0, 0, 1.0]))


def test_net_level_one_cardinality(nets1):
    card = len(nets1[0].points)
    assert 4 <= card <= 12
    # upper bound pi / arcsin(1/4)
    assert card <= math.pi / math.asin(0.25)
    # greedy sweep of a 10^5-point uniform grid reaches 12 (independent oracle, frozen)
    assert card in (11, 12)


def test_net_level_ten_packing_bound(nets1):
    net = nets1[9]
    bound = 2 * math.pi / (2 * math.asin(2.0 ** -11))
    assert len(net.points) <= bound
    C = len(net.points) * 2.0 ** -10
    assert C == pytest.approx(6.1455078125, abs=1e-12)


@pytest.mark.parametrize("level", [1, 3, 6, 9])
def test_nets_separation_exact(nets1, level):
    net = nets1[level - 1]
    assert pdist(net.points).min() >= 2.0 ** -level


def test_nets_are_nested(nets1):
    for a, b in zip(nets1[:-1], nets1[1:]):
        assert np.array_equal(b.points[: len(a.points)], a.points)


def test_d2_nets_cover_and_separate(nets2):
    for net in nets2:
        rep = verify_net(net, samples=50_000, seed=3)
        assert rep.ok, rep.as_dict()


def test_build_net_deterministic():
    a = build_net(1, 6, seed=5)
    b = build_net(1, 6, seed=5)
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a, b))


def test_build_net_resource_limit():
    with pytest.raises(ResourceLimitError):
        build_net(3, 12)


def test_build_net_randomized_mode_other_dimension():
    nets = build_net(3, 2, seed=1, exhaustive=False)
    for net in nets:
        assert verify_net(net, 20_000).separation_ok


def test_verify_net_flags_deleted_point(nets1):
    net = nets1[2]
    assert verify_net(net).covering_gap < 2.0 ** -3
    broken = Net(1, 3, np.delete(net.points, 5, axis=0))
    rep = verify_net(broken, samples=200_000)
    assert rep.covering_gap >= 2.0 ** -3
    assert not rep.covering_ok and rep.separation_ok


def test_dilate_cap_examples():
    d, alpha, N = 2, 2.0, 3
    g = GaugeSpec(beta=0.5, gamma=d, psi_gamma=d / alpha)
    assert dilate_cap(Cap([0, 0, 1], 2.0 ** -N), g).radius == pytest.approx(2.0 ** (-N * alpha))
    assert dilate_cap(Cap([0, 0, 1], 0.25), g).radius == pytest.approx(1 / 16)
    same = GaugeSpec(beta=0.5, gamma=1.3, psi_gamma=1.3)
    assert dilate_cap(Cap([0, 1], 0.37), same).radius == pytest.approx(0.37)


def test_dilate_needs_psi():
    with pytest.raises(ValueError):
        dilate_cap(Cap([0, 1], 0.1), GaugeSpec(beta=0.5, gamma=1.0))


def test_five_r_examples():
    one = [Cap([0, 1], 0.2)]
    assert five_r_disjointify(one) == one
    far = [Cap([0, 1], 0.1), Cap([0, -1], 0.1)]
    assert len(five_r_disjointify(far)) == 2
    q = np.array([math.sin(2 * math.asin(0.025)), math.cos(2 * math.asin(0.025))])
    big, small = Cap([0, 1], 0.1), Cap(q, 0.08)
    assert chordal_distance(big.center, small.center) == pytest.approx(0.05)
    kept = five_r_disjointify([small, big])
    assert kept == [big]
    assert cap_inside(small, big.scaled(5))


def test_disjoint_and_inside_helpers():
    a, b = Cap([0, 1], 0.5), Cap([1, 0], 0.5)
    assert caps_disjoint(a, b)
    assert cap_inside(Cap([0, 1], 0.1), Cap([1, 0], 2.0))
