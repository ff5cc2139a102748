"""Trajectory sampling, exact hitting times and mixing times."""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import CapExceededError, InfiniteHittingTimeError, NotStochasticError
from .matrix import ROW_SUM_TOL, as_distribution, as_matrix
from .rng import make_rng

MIXING_CAP = 10**6


@dataclass(frozen=True)
class Trajectory:
    """Observed word s_0 s_1 ... s_m."""

    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.int64).ravel()
        if s.size < 1:
            raise ValueError("a trajectory holds at least its start state")
        if np.any(s < 0):
            raise ValueError("state indices must be nonnegative")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @property
    def m(self) -> int:
        return self.states.size - 1

    def __len__(self):
        return self.states.size

    def check_support(self, P) -> bool:
        a = as_matrix(P)
        s = self.states
        if s.max() >= a.shape[0]:
            return False
        return bool(np.all(a[s[:-1], s[1:]] > 0))


def as_states(w) -> np.ndarray:
    return w.states if isinstance(w, Trajectory) else np.asarray(w, dtype=np.int64).ravel()


def _cumulative_rows(a: np.ndarray) -> list[list[float]]:
    rows = []
    for r in a:
        c = np.cumsum(r)
        # pin the tail to exactly 1 so a uniform draw can never fall off the row
        last = np.flatnonzero(r > 0)[-1]
        c[last:] = 1.0
        rows.append(c.tolist())
    return rows


def sample_trajectory(P, start, m: int, seed=None) -> Trajectory:
    """Run the chain for ``m`` transitions from ``start`` (state or distribution)."""
    a = as_matrix(P)
    n = a.shape[0]
    if m < 0:
        raise ValueError("m must be nonnegative")
    rng = make_rng(seed)
    p0 = as_distribution(start, n)
    s = int(rng.choice(n, p=p0)) if np.count_nonzero(p0) > 1 else int(np.argmax(p0))
    cum = _cumulative_rows(a)
    u = rng.random(m).tolist()
    out = [s]
    for x in u:
        s = bisect_right(cum[s], x)
        out.append(s)
    return Trajectory(np.array(out, dtype=np.int64))


def _irreducible(a: np.ndarray) -> bool:
    k, _ = connected_components(csr_matrix(a > 0), directed=True, connection="strong")
    return k == 1


def hitting_times(P) -> np.ndarray:
    """Matrix h[s, r] = E_s[first t >= 0 with s_t = r]."""
    a = as_matrix(P)
    n = a.shape[0]
    if not _irreducible(a):
        raise InfiniteHittingTimeError("some state is unreachable from another")
    h = np.zeros((n, n))
    for r in range(n):
        keep = np.r_[0:r, r + 1:n]
        if keep.size == 0:
            continue
        A = np.eye(n - 1) - a[np.ix_(keep, keep)]
        h[keep, r] = np.linalg.solve(A, np.ones(n - 1))
    return h


def hitting_time(P) -> float:
    """max over (target, start) of the expected first-arrival time."""
    return float(hitting_times(P).max())


def stationary_distribution(P) -> np.ndarray:
    """A stationary distribution (unique for irreducible chains)."""
    a = as_matrix(P)
    n = a.shape[0]
    A = np.vstack([a.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _worst_l1(Pt: np.ndarray, pi: np.ndarray) -> float:
    return float(np.abs(Pt - pi[None, :]).sum(axis=1).max())


def mixing_time(P, stationary, cap: int = MIXING_CAP) -> int:
    """Smallest t with max_s ||P^t(s, .) - pi||_1 <= 1/4.

    The worst-start deviation is nonincreasing in t, so the crossing is
    located by doubling followed by binary lifting over matrix powers.
    """
    a = as_matrix(P)
    n = a.shape[0]
    pi = as_distribution(stationary, n)
    if np.max(np.abs(pi @ a - pi)) > ROW_SUM_TOL:
        raise NotStochasticError("stationary vector is not invariant under P")
    eye = np.eye(n)
    if _worst_l1(eye, pi) <= 0.25:
        return 0
    powers = [a]
    while _worst_l1(powers[-1], pi) > 0.25:
        if 2 ** len(powers) > cap:
            raise CapExceededError(f"chain does not mix within {cap} steps")
        powers.append(powers[-1] @ powers[-1])
    acc = eye
    t = 0
    for k in range(len(powers) - 2, -1, -1):
        cand = acc @ powers[k]
        if _worst_l1(cand, pi) > 0.25:
            acc = cand
            t += 2**k
    t += 1
    if t > cap:
        raise CapExceededError(f"chain does not mix within {cap} steps")
    return t
