import math

import numpy as np
import pytest

from mcident.distance import chain_distance
from mcident.hard import (
    amplitude_for_distance,
    power_curve,
    rare_excursions,
    single_rare_visit_probability,
    sparse_hard_instance,
    symmetric_hard_instance,
    symmetric_hard_instance_at_distance,
    symmetric_radius,
)
from mcident.matrix import geometric_mean, spectral_radius
from mcident.sparse import dist_rounds_bruteforce, edge_probs, sample_rounds


def test_symmetric_instance_radius_closed_form():
    for n in (3, 7, 12):
        for eps in (0.01, 0.05, 0.1):
            for s in range(5):
                inst = symmetric_hard_instance(n, eps, s)
                a = math.sqrt(8 * eps)
                rho = (math.sqrt(1 + a) + math.sqrt(1 - a)) / 2
                assert abs(spectral_radius(geometric_mean(inst.P, inst.Q)) - rho) <= 1e-9
                assert chain_distance(inst.P, inst.Q) >= eps


def test_symmetric_instance_structure():
    inst = symmetric_hard_instance(6, 0.05, 1)
    for M in (inst.P.entries, inst.Q.entries):
        assert M.shape == (12, 12)
        np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-12)
        assert np.array_equal(M, M.T)
    np.testing.assert_allclose(inst.Q.entries[inst.Q.entries > 0], 1 / 10)
    # the four split weights of a pair carry the mass of the two parallel edges
    P, n = inst.P.entries, 6
    for i in range(n):
        for j in range(i + 1, n):
            total = P[i, j] + P[i, n + j] + P[n + i, n + j] + P[n + i, j]
            assert total == pytest.approx(2 * 2 / (2 * (n - 1)))


def test_symmetric_zero_eps_is_reference():
    inst = symmetric_hard_instance(5, 0.0, 3)
    assert np.array_equal(inst.P.entries, inst.Q.entries)


def test_symmetric_eps_range():
    with pytest.raises(ValueError):
        symmetric_hard_instance(5, 0.125, 0)


def test_at_distance_variant():
    for d in (0.02, 0.1, 0.25):
        inst = symmetric_hard_instance_at_distance(8, d, 0)
        assert chain_distance(inst.P, inst.Q) == pytest.approx(d, abs=1e-12)
    assert symmetric_radius(amplitude_for_distance(0.2)) == pytest.approx(0.8, abs=1e-14)
    with pytest.raises(ValueError):
        amplitude_for_distance(0.3)


def test_sparse_instance_shape_and_zero_eps():
    inst = sparse_hard_instance(4, 0.0, 1)
    assert inst.Q.T == 2 * 4 + 2
    for a, b in zip(inst.P.layers, inst.Q.layers):
        assert np.array_equal(a, b)
    for f in edge_probs(inst.Q):
        assert f.sum() == pytest.approx(1.0)


def test_sparse_eps_range():
    with pytest.raises(ValueError):
        sparse_hard_instance(4, 0.3, 0)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sparse_instance_is_far(n):
    eps = 0.1
    for s in range(3):
        inst = sparse_hard_instance(n, eps, s)
        assert dist_rounds_bruteforce(inst.P, inst.Q) >= eps


@pytest.mark.parametrize("n", [4, 5, 6])
def test_single_rare_visit_probability(n):
    inst = sparse_hard_instance(n, 0.1, 0)
    words = sample_rounds(inst.Q, 40000, (n, 1))
    one = float(np.mean(rare_excursions(words, n) == 1))
    assert one > 0.25
    assert single_rare_visit_probability(n) >= 0.25 - 1e-12


def test_power_curve_rows():
    rows = power_curve("symmetric", 5, 0.05, [50, 400], 20, 3)
    assert [r["m"] for r in rows] == [50, 400]
    for r in rows:
        assert r["type1"] == r["null_rejects"] / 20
        assert r["type2"] == r["alt_accepts"] / 20
        assert r["combined"] == pytest.approx((r["type1"] + r["type2"]) / 2)
    with pytest.raises(ValueError):
        power_curve("symmetric", 5, 0.05, [400, 50], 20, 3)
    with pytest.raises(ValueError):
        power_curve("other", 5, 0.05, [50], 20, 3)


def test_power_curve_independent_of_jobs():
    a = power_curve("sparse", 3, 0.2, [200.0], 12, 5, jobs=1)
    b = power_curve("sparse", 3, 0.2, [200.0], 12, 5, jobs=3)
    assert a == b
