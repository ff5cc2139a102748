import numpy as np
import pytest
from scipy.stats import chisquare

from mcident.chain_sim import (
    Trajectory,
    hitting_time,
    hitting_times,
    mixing_time,
    sample_trajectory,
    stationary_distribution,
)
from mcident.errors import CapExceededError, InfiniteHittingTimeError
from mcident.generators import complete_walk, cycle, lazy_cycle, random_stochastic


def test_cycle_trajectory():
    assert sample_trajectory(cycle(3), 0, 3, 1).states.tolist() == [0, 1, 2, 0]


def test_absorbing_tail():
    P = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    w = sample_trajectory(P, 0, 10, 2).states
    assert w.tolist() == [0, 1] + [2] * 9


def test_same_seed_same_trajectory():
    P = random_stochastic(6, 4)
    a = sample_trajectory(P, 0, 500, (9, 1)).states
    b = sample_trajectory(P, 0, 500, (9, 1)).states
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_trajectory(P, 0, 500, (9, 2)).states)


def test_trajectory_follows_support():
    P = random_stochastic(8, 5, 0.3)
    w = sample_trajectory(P, np.full(8, 1 / 8), 2000, 6)
    assert w.m == 2000 and len(w) == 2001
    assert w.check_support(P)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(np.array([], dtype=int))
    with pytest.raises(ValueError):
        Trajectory(np.array([0, -1]))


def test_complete_walk_frequencies():
    m = 10**5
    w = sample_trajectory(complete_walk(5, loops=True), 0, m, 7).states[1:]
    freq = np.bincount(w, minlength=5) / m
    assert np.all(np.abs(freq - 0.2) <= 3 * np.sqrt(0.2 * 0.8 / m))


def test_transition_frequencies_match_row():
    P = random_stochastic(4, 8)
    w = sample_trajectory(P, 0, 4 * 10**5, 9).states
    src, dst = w[:-1], w[1:]
    for i in range(4):
        obs = np.bincount(dst[src == i], minlength=4)
        keep = P[i] > 0
        assert np.all(obs[~keep] == 0)
        assert chisquare(obs[keep], obs.sum() * P[i, keep]).pvalue > 0.001


def test_hitting_time_single_state():
    assert hitting_time(np.array([[1.0]])) == 0.0


def test_hitting_time_complete_walk():
    assert hitting_time(complete_walk(6)) == pytest.approx(5.0, abs=1e-9)


def test_hitting_time_reducible():
    P = np.zeros((4, 4))
    P[:2, :2] = 0.5
    P[2:, 2:] = 0.5
    with pytest.raises(InfiniteHittingTimeError):
        hitting_time(P)


def test_hitting_times_against_simulation():
    P = random_stochastic(5, 11)
    H = hitting_times(P)
    rng = np.random.default_rng(1)
    r, s = 0, 3
    times = []
    for _ in range(4000):
        x, t = r, 0
        while True:
            x = rng.choice(5, p=P[x])
            t += 1
            if x == s:
                break
        times.append(t)
    se = np.std(times) / np.sqrt(len(times))
    assert abs(np.mean(times) - H[r, s]) <= 4 * se


def test_stationary_distribution():
    P = random_stochastic(6, 12)
    pi = stationary_distribution(P)
    np.testing.assert_allclose(pi @ P, pi, atol=1e-12)
    assert pi.sum() == pytest.approx(1.0)


def test_mixing_time_of_uniform_chain():
    assert mixing_time(np.full((4, 4), 0.25), np.full(4, 0.25)) == 1


def test_identity_never_mixes():
    with pytest.raises(CapExceededError):
        mixing_time(np.eye(3), np.full(3, 1 / 3), cap=1000)


def test_lazy_cycle_mixing_against_explicit_powers():
    P = lazy_cycle(8)
    pi = np.full(8, 1 / 8)
    Pt, t = np.eye(8), 0
    while np.abs(Pt - pi).sum(axis=1).max() > 0.25:
        Pt = Pt @ P
        t += 1
    assert mixing_time(P, pi) == t


def test_mixing_time_rejects_wrong_stationary():
    with pytest.raises(ValueError):
        mixing_time(lazy_cycle(4), np.array([0.7, 0.1, 0.1, 0.1]))
