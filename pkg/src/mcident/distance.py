"""Distances between two chains on the same state space.

The spectral distance 1 - rho(sqrt(P o Q)) is scale free.  Word-level
Hellinger distances follow from the Bhattacharyya recursion

    1 - H^2(W_P^l, W_Q^l) = sqrt(p o q)^T  G^l  1,   G = sqrt(P o Q),

and TV is bracketed by H^2 <= TV <= sqrt(2) H.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapExceededError,
    DimensionMismatchError,
    GuardExceededError,
    NoFiniteLengthError,
)
from .matrix import as_distribution, as_matrix, geometric_mean, spectral_radius

LENGTH_CAP = 10**8
ENUM_GUARD = 10**7


@dataclass(frozen=True)
class WordDistanceReport:
    length: int
    hellinger_sq: float
    tv_lower: float
    tv_upper: float
    start: object
    tv: float | None = None

    def to_dict(self):
        d = {
            "length": self.length,
            "hellinger_sq": self.hellinger_sq,
            "tv_lower": self.tv_lower,
            "tv_upper": self.tv_upper,
            "start": self.start if np.isscalar(self.start) else list(map(float, self.start)),
        }
        if self.tv is not None:
            d["tv"] = self.tv
        return d


def tv_bounds(hsq: float) -> tuple[float, float]:
    """(lower, upper) bounds on TV implied by a squared Hellinger distance."""
    hsq = min(max(hsq, 0.0), 1.0)
    return hsq, min(1.0, math.sqrt(2.0 * hsq))


def _pair(P, Q):
    a, b = as_matrix(P), as_matrix(Q)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def chain_distance(P, Q) -> float:
    """1 - rho(sqrt(P o Q)), clipped to [0, 1]."""
    G = geometric_mean(*_pair(P, Q))
    return float(min(max(1.0 - spectral_radius(G), 0.0), 1.0))


def hellinger_sq_words(P, Q, p, q, length: int) -> float:
    """Squared Hellinger distance between the length-``length`` word
    distributions of (P, p) and (Q, q), by repeated vector-matrix products."""
    a, b = _pair(P, Q)
    if length < 0:
        raise ValueError("length must be nonnegative")
    n = a.shape[0]
    p = as_distribution(p, n)
    q = as_distribution(q, n)
    G = np.sqrt(a * b)
    v = np.sqrt(p * q)
    for _ in range(int(length)):
        v = v @ G
    return float(min(max(1.0 - v.sum(), 0.0), 1.0))


def word_report(P, Q, start, length: int) -> WordDistanceReport:
    """Hellinger-based report for a common start (state index or distribution)."""
    hsq = hellinger_sq_words(P, Q, start, start, length)
    lo, hi = tv_bounds(hsq)
    return WordDistanceReport(int(length), hsq, lo, hi, start)


def word_distances_bruteforce(P, Q, start, length: int, q_start=None) -> WordDistanceReport:
    """Exact TV and H^2 of word distributions by enumerating all n^length
    continuations of every start state.  Test oracle for small inputs."""
    a, b = _pair(P, Q)
    n = a.shape[0]
    if length < 0:
        raise ValueError("length must be nonnegative")
    if float(n) ** (length + 1) > ENUM_GUARD:
        raise GuardExceededError(f"{n}^{length + 1} words exceeds the enumeration guard")
    p = as_distribution(start, n)
    q = as_distribution(start if q_start is None else q_start, n)
    words = np.array(list(itertools.product(range(n), repeat=length + 1)), dtype=np.int64)
    wp = p[words[:, 0]].copy()
    wq = q[words[:, 0]].copy()
    for t in range(1, length + 1):
        wp *= a[words[:, t - 1], words[:, t]]
        wq *= b[words[:, t - 1], words[:, t]]
    tv = float(np.abs(wp - wq).sum())
    bc = float(np.sqrt(wp * wq).sum())
    hsq = min(max(1.0 - bc, 0.0), 1.0)
    lo, hi = tv_bounds(hsq)
    return WordDistanceReport(int(length), hsq, lo, hi, start, tv=0.5 * tv)


def _similarity_fn(G: np.ndarray, mode: str, start):
    """Map u = G^l 1 to the similarity 1 - H^2 for the chosen start mode."""
    n = G.shape[0]
    if mode == "worst":
        return lambda u: float(u.max())
    if mode == "average":
        if start is None:
            start = np.full(n, 1.0 / n)
        w = as_distribution(start, n)
        return lambda u: float(w @ u)
    raise ValueError(f"unknown mode {mode!r}; expected 'worst' or 'average'")


def _first_length_below(G: np.ndarray, sim, threshold: float, cap: int) -> int:
    """Smallest l with sim(G^l 1) <= threshold.

    G^l 1 is entrywise nonincreasing in l because G has row sums at most 1,
    so the similarity is monotone and binary lifting over powers of two
    finds the crossing.
    """
    ones = np.ones(G.shape[0])
    if sim(ones) <= threshold:
        return 0
    powers = [G]
    while sim(powers[-1] @ ones) > threshold:
        if 2 ** len(powers) > cap:
            raise CapExceededError(f"no crossing below length {cap}")
        powers.append(powers[-1] @ powers[-1])
    # accumulate the longest length that still sits above the threshold
    u = ones
    length = 0
    for k in range(len(powers) - 2, -1, -1):
        cand = powers[k] @ u
        if sim(cand) > threshold:
            u = cand
            length += 2**k
    length += 1
    if length > cap:
        raise CapExceededError(f"minimal length {length} exceeds cap {cap}")
    return length


def minimal_distinguishing_length(P, Q, mode: str = "worst", start=None,
                                  threshold: float = 0.5, cap: int = LENGTH_CAP) -> int:
    """Smallest l with 1 - H^2(W_P^l, W_Q^l) <= threshold.

    ``mode='worst'`` requires this from every point-mass start;
    ``mode='average'`` uses the common start distribution ``start``
    (uniform when omitted) or a start state index.
    """
    a, b = _pair(P, Q)
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    G = np.sqrt(a * b)
    if mode == "worst" and spectral_radius(G) >= 1.0 - 1e-12:
        raise NoFiniteLengthError("rho(sqrt(P o Q)) = 1: the chains share an essential class")
    return _first_length_below(G, _similarity_fn(G, mode, start), threshold, cap)


def tv_distinguishing_interval(P, Q, mode: str = "worst", start=None,
                               tv_target: float = 2.0 / 3.0, cap: int = LENGTH_CAP) -> tuple[int, int]:
    """Bracket [l_lo, l_hi] on the first length with TV >= ``tv_target``.

    TV <= sqrt(2) H rules out every length whose similarity exceeds
    1 - tv_target^2 / 2, and TV >= H^2 guarantees the target once the
    similarity drops to 1 - tv_target.
    """
    lo = minimal_distinguishing_length(P, Q, mode, start, 1.0 - tv_target**2 / 2.0, cap)
    hi = minimal_distinguishing_length(P, Q, mode, start, 1.0 - tv_target, cap)
    return lo, hi
