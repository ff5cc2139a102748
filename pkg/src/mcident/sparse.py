"""Round-based sparse chains and the chi-square edge tester.

A chain runs in rounds of T steps.  Step t moves from a state of layer t-1
to a state of layer t through the rectangular matrix P_t, and the last
matrix sends everything back to the start state, so layer T is layer 0.
One sample is a round word s_0 s_1 ... s_T.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateChainError,
    DimensionMismatchError,
    GuardExceededError,
    InsufficientSamplesError,
    NotStochasticError,
)
from .matrix import ROW_SUM_TOL, spectral_radius
from .profiles import ThresholdProfile
from .rng import make_rng
from .verdict import ACCEPT, REJECT, Verdict

PATH_GUARD = 10**7
LIFT_GUARD = 200


@dataclass(frozen=True)
class SparseChain:
    """Layered chain P_1 ... P_T with start state ``start`` in layer 0.

    ``scale`` is the size parameter n used by thresholds; it defaults to
    T - 1.  ``labels`` optionally names the states of each layer.
    """

    layers: tuple = field(repr=False)
    start: int = 0
    scale: float | None = None
    labels: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        mats = []
        for t, L in enumerate(self.layers, start=1):
            a = np.array(L, dtype=float, copy=True)
            if a.ndim != 2:
                raise DimensionMismatchError(f"layer {t} is not a matrix")
            if mats and mats[-1].shape[1] != a.shape[0]:
                raise DimensionMismatchError(
                    f"layer {t} has {a.shape[0]} rows but layer {t - 1} has {mats[-1].shape[1]} columns")
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise NotStochasticError(f"layer {t} has negative or non-finite entries")
            a.setflags(write=False)
            mats.append(a)
        if not mats:
            raise DimensionMismatchError("a chain needs at least one layer")
        if mats[0].shape[0] != mats[-1].shape[1]:
            raise DimensionMismatchError("the last layer must map back onto layer 0")
        if not 0 <= self.start < mats[0].shape[0]:
            raise DimensionMismatchError(f"start {self.start} outside layer 0")
        object.__setattr__(self, "layers", tuple(mats))
        if self.scale is None:
            object.__setattr__(self, "scale", float(max(len(mats) - 1, 1)))
        self._validate()

    def _validate(self):
        mu = np.zeros(self.layers[0].shape[0])
        mu[self.start] = 1.0
        for t, a in enumerate(self.layers, start=1):
            sums = a.sum(axis=1)
            reach = mu > 0
            bad = np.flatnonzero(reach & (np.abs(sums - 1.0) > ROW_SUM_TOL))
            if bad.size:
                raise NotStochasticError(f"layer {t} row {bad[0]} sums to {sums[bad[0]]!r}")
            mu = (mu > 0).astype(float) @ a
        last = self.layers[-1]
        others = np.delete(last, self.start, axis=1)
        if np.any(others > 0):
            raise NotStochasticError("the last layer must route every state to the start state")

    @property
    def T(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> tuple:
        return (self.layers[0].shape[0],) + tuple(a.shape[1] for a in self.layers)

    @property
    def n(self) -> float:
        return self.scale

    @property
    def k(self) -> int:
        """Largest number of nonzeros in a row, over layers 2..T."""
        rest = self.layers[1:] or self.layers
        return int(max(np.count_nonzero(a, axis=1).max() for a in rest))

    def with_layers(self, layers) -> "SparseChain":
        return SparseChain(tuple(layers), self.start, self.scale, self.labels)


def same_shape(P: SparseChain, Q: SparseChain):
    if P.dims != Q.dims or P.start != Q.start:
        raise DimensionMismatchError("chains have different layer shapes or start states")


def layer_marginals(chain: SparseChain) -> list[np.ndarray]:
    """mu_0 = e_start, mu_t = mu_{t-1} P_t for t = 0..T."""
    mu = np.zeros(chain.layers[0].shape[0])
    mu[chain.start] = 1.0
    out = [mu]
    for a in chain.layers:
        mu = mu @ a
        out.append(mu)
    return out


def edge_probs(chain: SparseChain) -> list[np.ndarray]:
    """Per-layer flow q_t(i, j) = mu_{t-1}(i) P_t(i, j); each layer sums to 1."""
    mus = layer_marginals(chain)
    return [mus[t][:, None] * a for t, a in enumerate(chain.layers)]


@dataclass(frozen=True)
class EdgeTable:
    """Edges with their reference probabilities and observed counts."""

    t: np.ndarray
    i: np.ndarray
    j: np.ndarray
    q: np.ndarray
    counts: np.ndarray

    def __len__(self):
        return self.q.size


def edge_table(flows: list[np.ndarray], counts: list[np.ndarray] | None = None,
               masks: list[np.ndarray] | None = None) -> EdgeTable:
    ts, is_, js, qs, cs = [], [], [], [], []
    for t, f in enumerate(flows, start=1):
        sel = f > 0 if masks is None else masks[t - 1]
        i, j = np.nonzero(sel)
        ts.append(np.full(i.size, t))
        is_.append(i)
        js.append(j)
        qs.append(f[i, j])
        cs.append(np.zeros(i.size) if counts is None else counts[t - 1][i, j])
    cat = np.concatenate
    return EdgeTable(cat(ts), cat(is_), cat(js), cat(qs), cat(cs).astype(float))


def _cumulative(a: np.ndarray) -> np.ndarray:
    c = np.cumsum(a, axis=1)
    for r in range(a.shape[0]):
        nz = np.flatnonzero(a[r] > 0)
        if nz.size:
            c[r, nz[-1]:] = 1.0
    return c


def sample_rounds(chain: SparseChain, m: int, seed=None) -> np.ndarray:
    """``m`` independent round words as an (m, T+1) integer array."""
    rng = make_rng(seed)
    m = int(m)
    words = np.empty((m, chain.T + 1), dtype=np.int64)
    words[:, 0] = chain.start
    s = words[:, 0]
    for t, a in enumerate(chain.layers, start=1):
        c = _cumulative(a)
        u = rng.random(m)
        s = np.sum(c[s] <= u[:, None], axis=1)
        words[:, t] = s
    return words


def sample_round(chain: SparseChain, seed=None) -> np.ndarray:
    return sample_rounds(chain, 1, seed)[0]


def word_log_probs(chain: SparseChain, words) -> np.ndarray:
    """log Pr[word] under ``chain`` (-inf for impossible words)."""
    w = np.asarray(words, dtype=np.int64)
    lp = np.where(w[:, 0] == chain.start, 0.0, -np.inf)
    with np.errstate(divide="ignore"):
        for t, a in enumerate(chain.layers, start=1):
            lp = lp + np.log(a[w[:, t - 1], w[:, t]])
    return lp


def edge_counts(chain_or_dims, words) -> list[np.ndarray]:
    """Per-layer transition counts n_t(i, j) of a batch of words."""
    dims = chain_or_dims.dims if isinstance(chain_or_dims, SparseChain) else tuple(chain_or_dims)
    w = np.asarray(words, dtype=np.int64)
    out = []
    for t in range(1, len(dims)):
        a, b = dims[t - 1], dims[t]
        flat = w[:, t - 1] * b + w[:, t] if w.size else np.zeros(0, dtype=np.int64)
        out.append(np.bincount(flat, minlength=a * b).reshape(a, b).astype(float))
    return out


def hellinger_sq_rounds(P: SparseChain, Q: SparseChain) -> float:
    """H^2 of the round-word distributions via e_start^T prod_t sqrt(P_t o Q_t) 1."""
    same_shape(P, Q)
    v = np.zeros(P.layers[0].shape[0])
    v[P.start] = 1.0
    for a, b in zip(P.layers, Q.layers):
        v = v @ np.sqrt(a * b)
    return float(min(max(1.0 - v.sum(), 0.0), 1.0))


def _expand_paths(P: SparseChain, Q: SparseChain, guard: int):
    """Probabilities of every round word in the union support."""
    st = np.array([P.start])
    pp = np.ones(1)
    pq = np.ones(1)
    for t, (a, b) in enumerate(zip(P.layers, Q.layers), start=1):
        union = (a > 0) | (b > 0)
        width = np.count_nonzero(union, axis=1)
        total = int(width[st].sum())
        if total > guard:
            raise GuardExceededError(f"more than {guard} paths by layer {t}")
        ns, np_, nq = [], [], []
        for i in np.unique(st):
            sel = st == i
            cols = np.flatnonzero(union[i])
            ns.append(np.tile(cols, sel.sum()))
            np_.append((pp[sel][:, None] * a[i, cols][None, :]).ravel())
            nq.append((pq[sel][:, None] * b[i, cols][None, :]).ravel())
        st, pp, pq = np.concatenate(ns), np.concatenate(np_), np.concatenate(nq)
    return pp, pq


def dist_rounds_bruteforce(P: SparseChain, Q: SparseChain, guard: int = PATH_GUARD) -> float:
    """Exact TV between the round-word distributions by path expansion."""
    same_shape(P, Q)
    pp, pq = _expand_paths(P, Q, guard)
    return float(min(0.5 * np.abs(pp - pq).sum(), 1.0))


def hellinger_sq_rounds_bruteforce(P: SparseChain, Q: SparseChain, guard: int = PATH_GUARD) -> float:
    same_shape(P, Q)
    pp, pq = _expand_paths(P, Q, guard)
    return float(min(max(1.0 - np.sqrt(pp * pq).sum(), 0.0), 1.0))


def tv_rounds_monte_carlo(P: SparseChain, Q: SparseChain, m: int, seed=None) -> tuple[float, float]:
    """Estimate TV = E_P[(1 - Q(w)/P(w))_+] from ``m`` words of P.

    Returns (estimate, standard error).
    """
    same_shape(P, Q)
    w = sample_rounds(P, m, seed)
    ratio = np.exp(word_log_probs(Q, w) - word_log_probs(P, w))
    x = np.clip(1.0 - ratio, 0.0, None)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(m))


def lift_block_cyclic(chain: SparseChain) -> np.ndarray:
    """Square matrix on the disjoint union of layers 0..T-1 whose block
    (t-1 -> t mod T) is P_t."""
    dims = chain.dims[:-1]
    off = np.concatenate([[0], np.cumsum(dims)])
    N = int(off[-1])
    M = np.zeros((N, N))
    T = chain.T
    for t, a in enumerate(chain.layers, start=1):
        r0 = off[t - 1]
        c0 = off[t % T]
        M[r0:r0 + a.shape[0], c0:c0 + a.shape[1]] = a
    return M


def block_cyclic_check(P: SparseChain, Q: SparseChain, guard: int = LIFT_GUARD) -> tuple[float, float]:
    """(rho(sqrt(P* o Q*))^T, 1 - H^2) for the block-cyclic lifts P*, Q*."""
    same_shape(P, Q)
    if max(P.dims) * (P.T + 1) > guard:
        raise GuardExceededError("instance too large for the lifted check")
    G = np.sqrt(lift_block_cyclic(P) * lift_block_cyclic(Q))
    rho = spectral_radius(G)
    return float(rho**P.T), 1.0 - hellinger_sq_rounds(P, Q)


@dataclass(frozen=True)
class PruneResult:
    chain: SparseChain
    masks: tuple
    removed: tuple
    threshold: float


def prune_threshold(eps: float, k: int, n: float) -> float:
    return eps**2 / (k * n**2)


def prune(Q: SparseChain, eps: float, k: int | None = None, n: float | None = None) -> PruneResult:
    """Repeatedly delete the lightest edge with 0 < q_e < eps^2/(k n^2),
    renormalizing its source row, until no such edge remains.

    Ties among equal flows go to the smallest (t, i, j).  Edges with zero
    flow are never observed under Q and are left alone.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    k = Q.k if k is None else k
    n = Q.scale if n is None else n
    thr = prune_threshold(eps, k, n)
    layers = [np.array(a) for a in Q.layers]
    removed = []
    chain = Q
    while True:
        flows = edge_probs(chain)
        best = None
        for t, f in enumerate(flows, start=1):
            light = (f > 0) & (f < thr)
            if not light.any():
                continue
            i, j = np.nonzero(light)
            vals = f[i, j]
            # lexicographic order of np.nonzero output breaks ties by (i, j)
            pos = int(np.argmin(vals))
            cand = (float(vals[pos]), t, int(i[pos]), int(j[pos]))
            if best is None or cand < best:
                best = cand
        if best is None:
            break
        q, t, i, j = best
        row = layers[t - 1][i]
        row[j] = 0.0
        s = row.sum()
        if s <= 0.0:
            raise DegenerateChainError(f"pruning emptied row {i} of layer {t}")
        layers[t - 1][i] = row / s
        removed.append((t, i, j, q))
        chain = SparseChain(tuple(layers), Q.start, Q.scale, Q.labels)
    flows = edge_probs(chain)
    masks = tuple(f > 0 for f in flows)
    for f, mk in zip(flows, masks):
        assert np.all(f[mk] >= thr), "pruned chain keeps a light edge"
    return PruneResult(chain, masks, tuple(removed), thr)


def filter_samples(words, masks) -> tuple[np.ndarray, int]:
    """Keep words whose every transition lies in the surviving edge set."""
    w = np.asarray(words, dtype=np.int64)
    ok = np.ones(w.shape[0], dtype=bool)
    for t, mk in enumerate(masks, start=1):
        ok &= mk[w[:, t - 1], w[:, t]]
    return w[ok], int((~ok).sum())


def conditioned_flows(Q: SparseChain, masks) -> list[np.ndarray]:
    """Pr_Q[word stays on the masked edges and crosses edge (t, i, j)].

    Forward weights alpha and backward survival beta of Q restricted to
    the masks give alpha_{t-1}(i) Q_t(i, j) beta_t(j).  Every layer sums to
    the survival probability of a word.
    """
    R = [a * mk for a, mk in zip(Q.layers, masks)]
    alpha = [np.zeros(Q.layers[0].shape[0])]
    alpha[0][Q.start] = 1.0
    for a in R:
        alpha.append(alpha[-1] @ a)
    beta = [None] * (len(R) + 1)
    last = np.zeros(R[-1].shape[1])
    last[Q.start] = 1.0
    beta[-1] = last
    for t in range(len(R) - 1, -1, -1):
        beta[t] = R[t] @ beta[t + 1]
    return [alpha[t][:, None] * R[t] * beta[t + 1][None, :] for t in range(len(R))]


def chi2_edge_statistic(q, counts, m: float) -> float:
    """Z = sum_e ((n_e - q_e m)^2 - n_e) / (q_e m)."""
    q = np.asarray(q, dtype=float).ravel()
    x = np.asarray(counts, dtype=float).ravel()
    if q.shape != x.shape:
        raise ValueError("q and counts differ in length")
    if np.any(q <= 0):
        raise ValueError("every edge in the table needs q_e > 0")
    if m <= 0:
        raise ValueError("m must be positive")
    mu = q * m
    return float(np.sum(((x - mu) ** 2 - x) / mu))


def default_chi2_threshold(k: int, n: float) -> float:
    return 2.0 * math.sqrt(k) * n**1.5


def recommended_rounds(n: float, eps: float, C: float = 1.0) -> int:
    """C n^{3/2} / eps^2."""
    return math.ceil(C * n**1.5 / eps**2)


def default_m_for(available: int) -> int:
    """Largest m with m + 3 sqrt(m) <= available."""
    if available < 1:
        return 0
    r = (-3.0 + math.sqrt(9.0 + 4.0 * available)) / 2.0
    return max(int(math.floor(r * r)), 0)


def poisson_draw(m: float, seed) -> int:
    return int(make_rng(seed).poisson(m))


@dataclass(frozen=True)
class PreparedReference:
    """Pruned reference chain with the edge expectations the test uses."""

    pruned: PruneResult
    eps: float
    ref: EdgeTable
    k: int
    n: float


def prepare_reference(Q: SparseChain, eps: float, k: int | None = None,
                      n: float | None = None) -> PreparedReference:
    k = Q.k if k is None else k
    n = Q.scale if n is None else n
    pr = prune(Q, eps, k, n)
    flows = conditioned_flows(Q, pr.masks)
    table = edge_table(flows, masks=pr.masks)
    return PreparedReference(pr, eps, table, k, n)


def chi2_edge_test(Q: SparseChain, words, eps: float, seed=None, m: float | None = None,
                   threshold: float | None = None, threshold_profile: ThresholdProfile | None = None,
                   prepared: PreparedReference | None = None) -> Verdict:
    """Pruning test followed by the chi-square edge test.

    Draws m' ~ Poisson(m) and uses the first m' words.  Rejects with reason
    ``pruning`` when more than 2 m' eps^2 words use a pruned edge.  Otherwise
    tallies edge counts of the surviving words and accepts iff Z does not
    exceed the threshold (2 sqrt(k) n^{3/2} unless overridden).
    """
    w = np.asarray(words, dtype=np.int64)
    if w.ndim != 2 or w.shape[1] != Q.T + 1:
        raise DimensionMismatchError(f"words must have length T+1 = {Q.T + 1}")
    if m is None:
        m = default_m_for(w.shape[0])
    if m <= 0:
        raise InsufficientSamplesError("need a positive sample size")
    mp = poisson_draw(m, seed)
    if mp > w.shape[0]:
        raise InsufficientSamplesError(f"Poisson draw {mp} exceeds the {w.shape[0]} available words")
    prep = prepared if prepared is not None else prepare_reference(Q, eps)
    if prep.eps != eps:
        raise ValueError("prepared reference was built for a different epsilon")
    kept, rejected = filter_samples(w[:mp], prep.pruned.masks)
    diag = {
        "m": m, "m_prime": mp, "reject_count": rejected,
        "reject_allowance": 2.0 * mp * eps**2,
        "edges": len(prep.ref), "pruned_edges": len(prep.pruned.removed),
        "k": prep.k, "n": prep.n,
    }
    if rejected > 2.0 * mp * eps**2:
        return Verdict(REJECT, None, "pruning", None, diag)
    counts = edge_counts(Q, kept)
    ref = prep.ref
    x = np.concatenate([counts[t - 1][ref.i[ref.t == t], ref.j[ref.t == t]] for t in range(1, Q.T + 1)])
    z = chi2_edge_statistic(ref.q, x, m)
    source = "argument"
    if threshold is None and threshold_profile is not None:
        threshold = threshold_profile.tau(n=prep.n, k=prep.k, epsilon=eps, m=m)
        source = f"profile:{threshold_profile.source}" if threshold is not None else source
    if threshold is None:
        threshold = default_chi2_threshold(prep.k, prep.n)
        source = "2sqrt(k)n^1.5"
    diag["threshold_source"] = source
    return Verdict(ACCEPT if z <= threshold else REJECT, z, "chi2", threshold, diag)
