"""Stochastic matrices, the entrywise geometric mean, spectral radius and
essential communicating classes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    NotStochasticError,
)

ROW_SUM_TOL = 1e-9


def _check_stochastic_rows(a: np.ndarray, what: str) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"{what} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise NotStochasticError(f"{what} must have at least one state")
    if not np.all(np.isfinite(a)):
        raise NotStochasticError(f"{what} has non-finite entries")
    if np.any(a < 0):
        i, j = np.argwhere(a < 0)[0]
        raise NotStochasticError(f"{what}[{i},{j}] = {a[i, j]} is negative")
    sums = a.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        i = int(bad[0])
        raise NotStochasticError(f"{what} row {i} sums to {sums[i]!r}, not 1")


@dataclass(frozen=True)
class StochasticMatrix:
    """Row-stochastic transition matrix.

    Construction validates the invariants and never renormalizes.  The
    stored array is read-only so instances can be shared freely.
    """

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float, copy=True)
        _check_stochastic_rows(a, "transition matrix")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.T)) <= tol)

    def __repr__(self):
        return f"StochasticMatrix(n={self.n})"


def as_matrix(M) -> np.ndarray:
    """Validated float array for a StochasticMatrix or array-like."""
    if isinstance(M, StochasticMatrix):
        return M.entries
    return StochasticMatrix(M).entries


def as_distribution(p, n: int | None = None) -> np.ndarray:
    """Validate a distribution over states.

    An integer is read as a point mass on that state (``n`` is then required).
    """
    if np.isscalar(p) and float(p).is_integer() and not isinstance(p, float):
        if n is None:
            raise DimensionMismatchError("state index given without a state count")
        s = int(p)
        if not 0 <= s < n:
            raise DimensionMismatchError(f"state {s} outside [0, {n})")
        v = np.zeros(n)
        v[s] = 1.0
        return v
    v = np.asarray(p, dtype=float).ravel()
    if n is not None and v.size != n:
        raise DimensionMismatchError(f"distribution has {v.size} entries, expected {n}")
    if v.size < 1 or np.any(v < 0) or not np.all(np.isfinite(v)):
        raise NotStochasticError("distribution entries must be finite and nonnegative")
    if abs(v.sum() - 1.0) > ROW_SUM_TOL:
        raise NotStochasticError(f"distribution sums to {v.sum()!r}, not 1")
    return v


def geometric_mean(P, Q) -> np.ndarray:
    """Entrywise sqrt(P_ij * Q_ij)."""
    a, b = as_matrix(P), as_matrix(Q)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    # multiplication is commutative in IEEE arithmetic, so G(P,Q) == G(Q,P) bitwise
    g = np.sqrt(a * b)
    g.setflags(write=False)
    return g


def _scc(M: np.ndarray):
    graph = csr_matrix(M > 0)
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    return ncomp, labels


def _block_radius(B: np.ndarray, tol: float, max_iter: int) -> float:
    """Perron root of an irreducible nonnegative block.

    Power iteration on B + I from the all-ones vector.  The Collatz-Wielandt
    ratios min/max (Ax)_i / x_i bracket the root; stop once the bracket is
    narrower than ``tol``.
    """
    A = B + np.eye(B.shape[0])
    x = np.ones(B.shape[0])
    for _ in range(max_iter):
        y = A @ x
        r = y / x
        lo, hi = r.min(), r.max()
        if hi - lo < tol:
            return 0.5 * (lo + hi) - 1.0
        x = y / hi
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def spectral_radius(M, tol: float = 1e-12, max_iter: int = 10**6) -> float:
    """Spectral radius of a nonnegative square matrix.

    Symmetric inputs go straight to the symmetric eigensolver.  Otherwise the
    support digraph is split into strongly connected components; the radius
    is the largest Perron root over the diagonal blocks, each found by
    shifted power iteration with a dense eigenvalue fallback.
    """
    a = np.asarray(M, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"matrix must be square, got shape {a.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if np.any(a < 0):
        raise ValueError("matrix must be entrywise nonnegative")
    n = a.shape[0]
    if n == 0:
        return 0.0
    if np.array_equal(a, a.T):
        return float(max(np.max(np.abs(np.linalg.eigvalsh(a))), 0.0))
    ncomp, labels = _scc(a)
    rho = 0.0
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        if idx.size == 1:
            rho = max(rho, a[idx[0], idx[0]])
            continue
        B = a[np.ix_(idx, idx)]
        try:
            r = _block_radius(B, tol, max_iter)
        except ConvergenceError:
            r = float(np.max(np.abs(np.linalg.eigvals(B))))
        rho = max(rho, r)
    return float(rho)


@dataclass(frozen=True)
class EssentialClassPartition:
    classes: tuple
    essential_flags: tuple

    def essential(self):
        return [c for c, e in zip(self.classes, self.essential_flags) if e]


def essential_classes(M) -> EssentialClassPartition:
    """Strongly connected components of the support digraph, each flagged
    essential when no edge leaves it.  Classes are ordered by smallest state."""
    a = as_matrix(M)
    ncomp, labels = _scc(a)
    groups = [np.flatnonzero(labels == c) for c in range(ncomp)]
    groups.sort(key=lambda g: g[0])
    classes, flags = [], []
    for g in groups:
        inside = np.zeros(a.shape[0], dtype=bool)
        inside[g] = True
        leaks = np.any(a[np.ix_(g, ~inside)] > 0)
        classes.append(frozenset(int(i) for i in g))
        flags.append(not leaks)
    return EssentialClassPartition(tuple(classes), tuple(flags))


def has_identical_essential_class(P, Q, atol: float = 1e-12) -> bool:
    """True iff some state set is an essential class of both chains and the
    two chains agree on every row indexed by it."""
    a, b = as_matrix(P), as_matrix(Q)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    q_ess = set(essential_classes(b).essential())
    for C in essential_classes(a).essential():
        if C not in q_ess:
            continue
        rows = sorted(C)
        if np.allclose(a[rows], b[rows], rtol=0.0, atol=atol):
            return True
    return False
