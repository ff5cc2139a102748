"""Lower-bound instance families and empirical power curves.

Symmetric family: the complete double graph on n vertices, every pair of
vertices joined by two parallel edges.  Q puts 1/(2(n-1)) on each; a member
P of the family puts (1 +- a)/(2(n-1)) on the two edges of a pair, with a
random sign per pair and a = sqrt(8 eps).  Parallel edges are removed by
doubling: vertex i gets a copy i' (index n + i), edge one of pair {i, j}
becomes i-j and i'-j', edge two becomes i-j' and i'-j.

Sparse family: layered chain whose trajectories sit on frequent states and
occasionally spend two steps on a rare state, where a pair of parallel
loops carries weight 1/2 each under Q and (1 +- 4 eps)/2 under P.  The
parallel loops are split with a copy y' of every rare state y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.optimize import brentq

from .chain_sim import sample_trajectory
from .matrix import StochasticMatrix
from .profiles import Constants, ThresholdProfile
from .rng import make_rng
from .runner import run_trials
from .sparse import SparseChain, chi2_edge_test, poisson_draw, prepare_reference, sample_rounds
from .symmetric import test_identity_symmetric


def symmetric_radius(a: float) -> float:
    """Spectral radius of sqrt(P o Q) for amplitude ``a``."""
    return 0.5 * (math.sqrt(1.0 + a) + math.sqrt(1.0 - a))


def amplitude_for_distance(distance: float) -> float:
    """Amplitude a with 1 - symmetric_radius(a) = distance."""
    top = 1.0 - symmetric_radius(1.0)
    if not 0.0 <= distance <= top:
        raise ValueError(f"distance must lie in [0, {top:.6f}]")
    if distance == 0.0:
        return 0.0
    if distance == top:
        return 1.0
    return brentq(lambda a: 1.0 - symmetric_radius(a) - distance, 0.0, 1.0, xtol=1e-15, rtol=1e-15)


@dataclass(frozen=True)
class SymmetricHardInstance:
    Q: StochasticMatrix
    P: StochasticMatrix
    eps: float
    amplitude: float
    signs: np.ndarray = field(repr=False)

    @property
    def radius(self) -> float:
        return symmetric_radius(self.amplitude)


def _double_graph(n: int, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """2n x 2n doubled matrix from per-pair weights (w1 on i-j, w2 on i-j')."""
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = w1
    M[n:, n:] = w1
    M[:n, n:] = w2
    M[n:, :n] = w2
    return M


def _symmetric_from_amplitude(n: int, a: float, eps: float, seed) -> SymmetricHardInstance:
    if n < 3:
        raise ValueError("need n >= 3")
    rng = make_rng(seed)
    iu = np.triu_indices(n, 1)
    signs = np.zeros((n, n))
    signs[iu] = rng.choice([-1.0, 1.0], size=iu[0].size)
    signs = signs + signs.T
    off = 1.0 - np.eye(n)
    base = off / (2.0 * (n - 1))
    Q = _double_graph(n, base, base)
    w1 = off * (1.0 + signs * a) / (2.0 * (n - 1))
    w2 = off * (1.0 - signs * a) / (2.0 * (n - 1))
    P = _double_graph(n, w1, w2)
    return SymmetricHardInstance(StochasticMatrix(Q), StochasticMatrix(P), eps, a, signs[iu])


def symmetric_hard_instance(n: int, eps: float, seed=None) -> SymmetricHardInstance:
    """Member of the symmetric family at amplitude sqrt(8 eps); needs eps < 1/8."""
    if not 0.0 <= eps < 0.125:
        raise ValueError("the symmetric family needs 0 <= eps < 1/8")
    return _symmetric_from_amplitude(n, math.sqrt(8.0 * eps), eps, seed)


def symmetric_hard_instance_at_distance(n: int, distance: float, seed=None) -> SymmetricHardInstance:
    """Member of the same family whose spectral distance equals ``distance``
    exactly; reaches distances up to 1 - sqrt(2)/2."""
    return _symmetric_from_amplitude(n, amplitude_for_distance(distance), distance, seed)


@dataclass(frozen=True)
class SparseHardInstance:
    Q: SparseChain
    P: SparseChain
    eps: float
    signs: np.ndarray = field(repr=False)


def _sparse_layers(n: int, loop_weights) -> list[np.ndarray]:
    """Layers of the frequent/rare chain.

    State index 2i is frequent state i, 2i+1 its clockwise rare neighbour,
    and 2n + i the copy of rare state 2i+1.  ``loop_weights[k]`` holds the
    weight of the y -> y loop at odd step 2k+3 for every rare y.
    """
    S = 3 * n
    F = np.arange(0, 2 * n, 2)
    R = np.arange(1, 2 * n, 2)
    Rc = 2 * n + np.arange(n)

    def right(x):  # rare state after frequent x
        return (x + 1) % (2 * n)

    def left(x):
        return (x - 1) % (2 * n)

    first = np.zeros((1, S))
    first[0, F] = 1.0 / n
    layers = [first]
    T = 2 * n + 1
    odd_k = 0
    for t in range(2, T + 1):
        L = np.zeros((S, S))
        if t % 2 == 0:
            for x in F:
                L[x, x] = 1.0 - 2.0 / n
                L[x, right(x)] += 1.0 / n
                L[x, left(x)] += 1.0 / n
            for i, y in enumerate(R):
                for src in (y, Rc[i]):
                    L[src, (y + 1) % (2 * n)] += 0.5
                    L[src, (y - 1) % (2 * n)] += 0.5
        else:
            for x in F:
                L[x, x] = 1.0
            w = loop_weights[odd_k]
            odd_k += 1
            for i, y in enumerate(R):
                for src in (y, Rc[i]):
                    L[src, y] = w[i]
                    L[src, Rc[i]] = 1.0 - w[i]
        layers.append(L)
    back = np.zeros((S, 1))
    back[:, 0] = 1.0
    layers.append(back)
    return layers


def sparse_hard_instance(n: int, eps: float, seed=None) -> SparseHardInstance:
    """Reference chain Q and a random member P of the sparse family.

    The round has the 2n + 1 steps of the construction plus one step that
    returns every state to the start, so T = 2n + 2.  The scale parameter
    of both chains is n.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    if not 0.0 <= eps <= 0.25:
        raise ValueError("eps must lie in [0, 1/4] so that (1 +- 4 eps)/2 are probabilities")
    rng = make_rng(seed)
    n_odd = n  # odd steps 3, 5, ..., 2n+1
    signs = rng.choice([-1.0, 1.0], size=(n_odd, n))
    half = [np.full(n, 0.5) for _ in range(n_odd)]
    tilted = [(1.0 + 4.0 * eps * signs[k]) / 2.0 for k in range(n_odd)]
    Q = SparseChain(tuple(_sparse_layers(n, half)), 0, float(n))
    P = SparseChain(tuple(_sparse_layers(n, tilted)), 0, float(n))
    return SparseHardInstance(Q, P, eps, signs)


def single_rare_visit_probability(n: int) -> float:
    """Pr_Q[exactly one excursion to a rare state] = 2 (1 - 2/n)^(n-1)."""
    return 2.0 * (1.0 - 2.0 / n) ** (n - 1)


def rare_excursions(words, n: int) -> np.ndarray:
    """Number of excursions to rare states per word (entries at even steps)."""
    w = np.asarray(words)
    even = w[:, 2:2 * n + 1:2]
    rare = (even < 2 * n) & (even % 2 == 1)
    return rare.sum(axis=1)


# ---- trial functions (module level so worker processes can import them) ----

def _symmetric_trial(index: int, master: int, *, Q: StochasticMatrix, n: int, eps: float, m: int,
                     alternative_distance, constants, profile, alternative: bool) -> tuple:
    chain = Q
    if alternative:
        aseed = (master, index, 2)
        if alternative_distance is None:
            chain = symmetric_hard_instance(n, eps, aseed).P
        else:
            chain = symmetric_hard_instance_at_distance(n, alternative_distance, aseed).P
    start = np.full(chain.n, 1.0 / chain.n)
    w = sample_trajectory(chain, start, m, (master, index, 0))
    v = test_identity_symmetric(Q, w, eps, (master, index, 1), constants, profile)
    return v.decision, v.reason, v.statistic


def words_needed(m: float, tester_seed) -> int:
    """Words to sample so the tester's Poisson draw is always covered."""
    return max(poisson_draw(m, tester_seed), math.ceil(m + 3.0 * math.sqrt(m)))


def _sparse_trial(index: int, master: int, *, Q: SparseChain, P_factory, eps: float, m: float,
                  prepared, threshold, profile, alternative: bool) -> tuple:
    chain = P_factory((master, index, 2)) if alternative else Q
    tseed = (master, index, 1)
    words = sample_rounds(chain, words_needed(m, tseed), (master, index, 0))
    v = chi2_edge_test(Q, words, eps, tseed, m=m, threshold=threshold,
                       threshold_profile=profile, prepared=prepared)
    return v.decision, v.reason, v.statistic


def _sparse_family_member(seed, *, n, eps):
    return sparse_hard_instance(n, eps, seed).P


def rates(results) -> float:
    return sum(1 for r in results if r[0] == "reject") / max(len(results), 1)


def power_curve(family: str, n: int, eps: float, m_grid, trials: int, seed: int = 0,
                jobs: int | None = 1, alternative_distance: float | None = None,
                constants: Constants | None = None, profile: ThresholdProfile | None = None,
                threshold: float | None = None) -> list[dict]:
    """Type I / type II error rates of the matching tester for each m.

    Null trajectories come from Q, alternative ones from a fresh random
    member of the family per trial.  The combined error is the average of
    the two rates, i.e. the error of a tester facing a fair coin flip
    between the hypotheses.
    """
    grid = list(m_grid)
    if grid != sorted(grid):
        raise ValueError("m_grid must be ascending")
    rows = []
    for gi, m in enumerate(grid):
        mseed = seed + 1_000_003 * gi
        if family == "symmetric":
            kw = dict(Q=symmetric_hard_instance(n, 0.0, 0).Q, n=n, eps=eps, m=int(m),
                      alternative_distance=alternative_distance,
                      constants=constants, profile=profile)
            null = run_trials(partial(_symmetric_trial, alternative=False, **kw), trials, mseed, jobs)
            alt = run_trials(partial(_symmetric_trial, alternative=True, **kw), trials, mseed, jobs)
        elif family == "sparse":
            inst = sparse_hard_instance(n, eps, 0)
            prep = prepare_reference(inst.Q, eps)
            kw = dict(Q=inst.Q, P_factory=partial(_sparse_family_member, n=n, eps=eps), eps=eps,
                      m=float(m), prepared=prep, threshold=threshold, profile=profile)
            null = run_trials(partial(_sparse_trial, alternative=False, **kw), trials, mseed, jobs)
            alt = run_trials(partial(_sparse_trial, alternative=True, **kw), trials, mseed, jobs)
        else:
            raise ValueError(f"unknown family {family!r}")
        t1 = rates(null)
        t2 = 1.0 - rates(alt)
        rows.append({"m": m, "trials": trials, "type1": t1, "type2": t2, "combined": 0.5 * (t1 + t2),
                     "null_rejects": sum(r[0] == "reject" for r in null),
                     "alt_accepts": sum(r[0] == "accept" for r in alt)})
    return rows
