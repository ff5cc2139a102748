"""Random and hand-built instances used by tests and experiments."""
from __future__ import annotations

import numpy as np

from .rng import make_rng
from .sparse import SparseChain


def random_stochastic(n: int, seed=None, density: float = 1.0, symmetric: bool = False) -> np.ndarray:
    """Random row-stochastic matrix; each row keeps at least one entry.

    With ``symmetric`` the result is a symmetric (doubly stochastic) chain:
    a random symmetric weight matrix scaled by its largest row sum, with
    the leftover mass on the diagonal.
    """
    rng = make_rng(seed)
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    if symmetric:
        W = np.triu(W, 1)
        W = W + W.T
        s = W.sum(axis=1).max()
        if s == 0:
            return np.eye(n)
        W = W / (s * (1.0 + rng.random()))
        W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
        return W
    for i in range(n):
        if not W[i].any():
            W[i, rng.integers(n)] = 1.0
    return W / W.sum(axis=1, keepdims=True)


def random_distribution(n: int, seed=None) -> np.ndarray:
    rng = make_rng(seed)
    p = rng.random(n) * (rng.random(n) < 0.8)
    if not p.any():
        p[rng.integers(n)] = 1.0
    return p / p.sum()


def cycle(n: int, order=None) -> np.ndarray:
    """Deterministic oriented cycle visiting ``order`` (default 0..n-1)."""
    order = list(range(n)) if order is None else list(order)
    M = np.zeros((n, n))
    for a, b in zip(order, order[1:] + order[:1]):
        M[a, b] = 1.0
    return M


def lazy_cycle(n: int) -> np.ndarray:
    M = 0.5 * np.eye(n)
    for i in range(n):
        M[i, (i + 1) % n] += 0.25
        M[i, (i - 1) % n] += 0.25
    return M


def complete_walk(n: int, loops: bool = False) -> np.ndarray:
    """Random walk on K_n, with or without self-loops."""
    if loops:
        return np.full((n, n), 1.0 / n)
    return (1.0 - np.eye(n)) / (n - 1)


def graph_walk(n: int, edges) -> np.ndarray:
    """Simple random walk on an undirected graph given by its edge list."""
    A = np.zeros((n, n))
    for a, b in edges:
        A[a, b] = A[b, a] = 1.0
    return A / A.sum(axis=1, keepdims=True)


def random_sparse_chain(states: int, T: int, k: int, seed=None, scale=None,
                        rare_edges: int = 0, rare_mass: tuple = (1e-6, 1e-3)) -> SparseChain:
    """Layered chain with ``states`` states in every layer, start state 0.

    Layer 1 spreads from the start over all states, layers 2..T-1 have k
    nonzeros per row, layer T returns everything to the start.  With
    ``rare_edges`` > 0 that many extra edges of tiny probability are added
    to random rows of the middle layers.
    """
    if T < 3:
        raise ValueError("need T >= 3")
    rng = make_rng(seed)
    first = np.zeros((states, states))
    first[0] = rng.dirichlet(np.ones(states))
    first[1:] = 1.0 / states  # unreachable rows, kept stochastic
    layers = [first]
    for _ in range(T - 2):
        L = np.zeros((states, states))
        for i in range(states):
            cols = rng.choice(states, size=min(k, states), replace=False)
            L[i, cols] = rng.dirichlet(np.ones(cols.size))
        layers.append(L)
    for _ in range(rare_edges):
        t = int(rng.integers(1, T - 1))
        i = int(rng.integers(states))
        free = np.flatnonzero(layers[t][i] == 0)
        if free.size == 0:
            continue
        j = int(rng.choice(free))
        w = float(np.exp(rng.uniform(np.log(rare_mass[0]), np.log(rare_mass[1]))))
        layers[t][i] *= 1.0 - w
        layers[t][i, j] = w
    last = np.zeros((states, states))
    last[:, 0] = 1.0
    layers.append(last)
    return SparseChain(tuple(layers), 0, scale)


def perturb_sparse_chain(chain: SparseChain, strength: float, seed=None) -> SparseChain:
    """Same support, row weights multiplied by exp(strength * N(0,1)) and renormalized."""
    rng = make_rng(seed)
    layers = []
    for t, a in enumerate(chain.layers):
        if t == chain.T - 1:
            layers.append(a)
            continue
        b = a * np.exp(strength * rng.standard_normal(a.shape))
        s = b.sum(axis=1, keepdims=True)
        layers.append(np.divide(b, s, out=np.zeros_like(b), where=s > 0))
    return chain.with_layers(layers)


def essential_corpus(seed: int = 0) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Thirty (name, P, Q) pairs: the worked examples plus random reducible pairs."""
    rng = make_rng(seed)
    out = []

    # two disjoint components: d(M1,M2) = d(M2,M3) = 0 < d(M1,M3)
    A, B = complete_walk(3), lazy_cycle(4)
    A2, B2 = cycle(3), complete_walk(4)
    def blocks(X, Y):
        M = np.zeros((7, 7))
        M[:3, :3] = X
        M[3:, 3:] = Y
        return M
    M1, M2, M3 = blocks(A, B), blocks(A, B2), blocks(A2, B2)
    out += [("components M1-M2", M1, M2), ("components M2-M3", M2, M3), ("components M1-M3", M1, M3)]

    for n in (5, 8):
        Q = cycle(n)
        Q[n - 1] = 0.0
        Q[n - 1, n - 1] = 1.0
        out.append((f"cycle vs looped cycle n={n}", cycle(n), Q))
    for n in (4, 9, 16):
        P = cycle(n)
        P[0] = 0.0
        P[0, 0] = 1.0
        Q = P.copy()
        Q[0, 0] = 1.0 - 1.0 / np.sqrt(n)
        Q[0, 1] = 1.0 / np.sqrt(n)
        out.append((f"cycle with loop n={n}", P, Q))
    for n in (5, 7):
        order = [0] + list(range(2, n)) + [1]
        out.append((f"two oriented cycles n={n}", cycle(n), cycle(n, order)))
    for n in (4, 10):
        out.append((f"clique vs clique+vertex n={n}", clique_plus_vertex(n), complete_walk(n, loops=True)))
    sq = [(0, 1), (1, 2), (2, 3), (3, 0)]
    tri = [(4, 5), (5, 6), (6, 4)]
    K4 = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    out.append(("square+triangle vs clique+triangle", graph_walk(7, sq + tri), graph_walk(7, K4 + tri)))
    out.append(("clique+triangle vs square+triangle", graph_walk(7, K4 + tri), graph_walk(7, sq + tri)))

    for r in range(2):
        P = random_stochastic(6, rng, 0.6)
        out.append((f"identical pair {r}", P, P.copy()))

    # random reducible pairs: transient states feeding one or two closed blocks
    while len(out) < 30:
        r = len(out)
        sizes = [int(rng.integers(2, 4)) for _ in range(int(rng.integers(1, 3)))]
        n_tr = int(rng.integers(1, 3))
        n = sum(sizes) + n_tr
        P = np.zeros((n, n))
        off = n_tr
        for s in sizes:
            P[off:off + s, off:off + s] = random_stochastic(s, rng)
            P[off:off + s, off:off + s] = 0.5 * P[off:off + s, off:off + s] + 0.5 * cycle(s)
            off += s
        P[:n_tr] = random_stochastic(n, rng)[:n_tr]
        Q = P.copy()
        mode = r % 3
        if mode == 0:  # change only transient rows: closed blocks stay identical
            Q[:n_tr] = random_stochastic(n, rng)[:n_tr]
        elif mode == 1:  # perturb one row of every closed block
            off = n_tr
            for s in sizes:
                row = off + int(rng.integers(s))
                w = Q[row, off:off + s] * np.exp(0.5 * rng.standard_normal(s))
                Q[row, off:off + s] = w / w.sum()
                off += s
        else:  # perturb the first block only
            row = n_tr
            s = sizes[0]
            w = Q[row, n_tr:n_tr + s] * np.exp(0.5 * rng.standard_normal(s))
            Q[row, n_tr:n_tr + s] = w / w.sum()
        out.append((f"random reducible {r} mode {mode}", P, Q))
    return out


def clique_plus_vertex(n: int) -> np.ndarray:
    """K_{n-1} with self-loops on states 0..n-2 and an isolated looped state n-1."""
    P = np.zeros((n, n))
    P[:n - 1, :n - 1] = 1.0 / (n - 1)
    P[n - 1, n - 1] = 1.0
    return P
