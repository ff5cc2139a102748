import itertools
import math

import numpy as np
import pytest
from scipy.stats import chisquare

from mcident.errors import (
    DegenerateChainError,
    DimensionMismatchError,
    GuardExceededError,
    InsufficientSamplesError,
    NotStochasticError,
)
from mcident.generators import perturb_sparse_chain, random_sparse_chain
from mcident.hard import sparse_hard_instance
from mcident.shuffle import biased_gsr_model, build_grid_chain, gsr_model
from mcident.sparse import (
    SparseChain,
    block_cyclic_check,
    chi2_edge_statistic,
    chi2_edge_test,
    conditioned_flows,
    default_chi2_threshold,
    default_m_for,
    dist_rounds_bruteforce,
    edge_counts,
    edge_probs,
    edge_table,
    filter_samples,
    hellinger_sq_rounds,
    hellinger_sq_rounds_bruteforce,
    prepare_reference,
    prune,
    prune_threshold,
    sample_round,
    sample_rounds,
    word_log_probs,
)


def enumerate_rounds(chain):
    """Plain-loop oracle: {word: probability} over all round words."""
    out = {}
    dims = chain.dims
    for tail in itertools.product(*[range(d) for d in dims[1:]]):
        w = (chain.start,) + tail
        p = 1.0
        for t, a in enumerate(chain.layers):
            p *= a[w[t], w[t + 1]]
            if p == 0:
                break
        if p > 0:
            out[w] = p
    return out


def deterministic_chain():
    L1 = np.array([[0.0, 1.0]])
    L2 = np.array([[1.0, 0.0], [0.0, 1.0]])
    L3 = np.array([[1.0], [1.0]])
    return SparseChain((L1, L2, L3), 0)


def tv_and_hsq(P, Q):
    a, b = enumerate_rounds(P), enumerate_rounds(Q)
    keys = set(a) | set(b)
    tv = 0.5 * sum(abs(a.get(w, 0) - b.get(w, 0)) for w in keys)
    bc = sum(math.sqrt(a.get(w, 0) * b.get(w, 0)) for w in keys)
    return tv, 1 - bc


# ---- chain structure ----

def test_chain_validation():
    with pytest.raises(DimensionMismatchError):
        SparseChain((np.ones((1, 2)) / 2, np.ones((3, 1))), 0)
    with pytest.raises(NotStochasticError):
        SparseChain((np.array([[0.5, 0.4]]), np.ones((2, 1))), 0)
    with pytest.raises(NotStochasticError):
        SparseChain((np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])), 0)


def test_deterministic_chain_unique_word():
    C = deterministic_chain()
    words = sample_rounds(C, 50, 1)
    assert np.all(words == [0, 1, 1, 0])
    assert sample_round(C, 3).tolist() == [0, 1, 1, 0]
    flows = edge_probs(C)
    assert [int(np.count_nonzero(f)) for f in flows] == [1, 1, 1]
    assert all(f.max() == 1.0 for f in flows)


def test_words_end_at_start_and_follow_support():
    C = random_sparse_chain(5, 6, 3, 2)
    w = sample_rounds(C, 2000, 4)
    assert np.all(w[:, 0] == C.start) and np.all(w[:, -1] == C.start)
    assert np.all(np.isfinite(word_log_probs(C, w)))


def test_layer_flows_sum_to_one():
    C = random_sparse_chain(6, 5, 3, 9, rare_edges=3)
    for f in edge_probs(C):
        assert f.sum() == pytest.approx(1.0, abs=1e-12)


def test_flows_match_enumeration_gsr_two():
    C = build_grid_chain(gsr_model(2))
    words = enumerate_rounds(C)
    flows = edge_probs(C)
    for t, f in enumerate(flows, start=1):
        ref = np.zeros_like(f)
        for w, p in words.items():
            ref[w[t - 1], w[t]] += p
        np.testing.assert_allclose(f, ref, atol=1e-15)


def test_gsr_two_word_frequencies():
    C = build_grid_chain(gsr_model(2))
    exact = enumerate_rounds(C)
    assert sorted(exact.values()) == [0.25] * 4
    w = sample_rounds(C, 10**5, 5)
    keys = sorted(exact)
    index = {k: i for i, k in enumerate(keys)}
    obs = np.bincount([index[tuple(x)] for x in w.tolist()], minlength=len(keys))
    assert chisquare(obs, 10**5 * np.array([exact[k] for k in keys])).pvalue > 0.001


def test_edge_counts_tally_words():
    C = random_sparse_chain(4, 4, 2, 3)
    w = sample_rounds(C, 300, 1)
    counts = edge_counts(C, w)
    assert all(c.sum() == 300 for c in counts)
    assert counts[0][C.start].sum() == 300


# ---- distances ----

def test_hellinger_rounds_zero_on_equal():
    C = random_sparse_chain(5, 5, 3, 1)
    assert hellinger_sq_rounds(C, C) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(15))
def test_hellinger_rounds_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    states, T = int(rng.integers(2, 7)), int(rng.integers(3, 6))
    Q = random_sparse_chain(states, T, 3, (seed, 0))
    P = perturb_sparse_chain(Q, 0.7, (seed, 1))
    tv, hsq = tv_and_hsq(P, Q)
    assert abs(hellinger_sq_rounds(P, Q) - hsq) <= 1e-12
    assert abs(hellinger_sq_rounds_bruteforce(P, Q) - hsq) <= 1e-12
    assert abs(dist_rounds_bruteforce(P, Q) - tv) <= 1e-12


def test_gsr_vs_biased_sandwich():
    P, Q = build_grid_chain(biased_gsr_model(4, 0.4, 2.0)), build_grid_chain(gsr_model(4))
    hsq, tv = hellinger_sq_rounds(P, Q), dist_rounds_bruteforce(P, Q)
    assert hsq <= tv <= math.sqrt(2 * hsq)


def test_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        hellinger_sq_rounds(random_sparse_chain(3, 4, 2, 0), random_sparse_chain(4, 4, 2, 0))


def test_path_guard():
    C = random_sparse_chain(6, 8, 6, 0)
    with pytest.raises(GuardExceededError):
        dist_rounds_bruteforce(C, C, guard=100)


@pytest.mark.parametrize("seed", range(10))
def test_block_cyclic_identity(seed):
    Q = random_sparse_chain(4, 4, 2, (seed, 0))
    P = perturb_sparse_chain(Q, 0.5, (seed, 1))
    rho_T, product = block_cyclic_check(P, Q)
    assert abs(rho_T - product) <= 1e-9


# ---- pruning ----

def test_prune_nothing_to_remove():
    C = random_sparse_chain(4, 4, 2, 1)
    pr = prune(C, 0.01)
    assert pr.removed == ()
    for a, b in zip(pr.chain.layers, C.layers):
        assert np.array_equal(a, b)


def test_prune_single_tiny_edge():
    C = random_sparse_chain(4, 4, 2, 1)
    layers = [np.array(a) for a in C.layers]
    row = layers[1][2].copy()
    j = int(np.flatnonzero(row == 0)[0])
    row = row * (1 - 1e-7)
    row[j] = 1e-7
    layers[1][2] = row
    D = C.with_layers(layers)
    pr = prune(D, 0.1)
    assert [(t, i, jj) for t, i, jj, _ in pr.removed] == [(2, 2, j)]
    assert pr.chain.layers[1][2].sum() == pytest.approx(1.0, abs=1e-15)
    assert pr.chain.layers[1][2, j] == 0.0


def test_prune_fixpoint_and_tv_cost():
    for s in range(20):
        Q = random_sparse_chain(4, 5, 3, s, rare_edges=4)
        eps = 0.1
        pr = prune(Q, eps)
        thr = prune_threshold(eps, Q.k, Q.scale)
        for f in edge_probs(pr.chain):
            assert np.all(f[f > 0] >= thr)
        assert dist_rounds_bruteforce(Q, pr.chain) <= 2 * eps**2


def test_prune_ties_break_lexicographically():
    # four edges with identical tiny flow; the first removal must be the smallest (t, i, j)
    L1 = np.array([[0.5, 0.5]])
    tiny = 1e-9
    L2 = np.array([[1 - tiny, tiny, 0.0], [1 - tiny, 0.0, tiny]])
    L3 = np.ones((3, 1))
    C = SparseChain((L1, L2, L3), 0, 2.0)
    pr = prune(C, 0.1, k=2, n=2.0)
    assert [(t, i, j) for t, i, j, _ in pr.removed] == [(2, 0, 1), (2, 1, 2)]


def test_prune_degenerate_row():
    # both edges of the only row fall below a huge threshold
    C = SparseChain((np.array([[1e-9, 1 - 1e-9]]), np.array([[1.0], [1.0]])), 0, 1e-4)
    with pytest.raises(DegenerateChainError):
        prune(C, 0.99, k=1)


def test_filter_samples_counts_pruned_edges():
    C = random_sparse_chain(4, 4, 2, 1)
    w = sample_rounds(C, 100, 2)
    masks = [f > 0 for f in edge_probs(C)]
    kept, rejected = filter_samples(w, masks)
    assert rejected == 0 and kept.shape == w.shape
    t, (i, j) = 1, (w[0, 1], w[0, 2])
    masks[t] = masks[t].copy()
    masks[t][i, j] = False
    kept, rejected = filter_samples(w, masks)
    assert rejected == int(np.sum((w[:, 1] == i) & (w[:, 2] == j)))
    assert kept.shape[0] + rejected == 100


def test_conditioned_flows_without_pruning_are_edge_flows():
    C = random_sparse_chain(5, 5, 3, 4)
    masks = [f > 0 for f in edge_probs(C)]
    for a, b in zip(conditioned_flows(C, masks), edge_probs(C)):
        np.testing.assert_allclose(a, b, atol=1e-15)


# ---- chi-square statistic ----

def test_statistic_at_expected_counts():
    q = np.array([0.2, 0.3, 0.5, 0.6, 0.4])
    assert chi2_edge_statistic(q, q * 1000, 1000) == pytest.approx(-5.0)


def test_statistic_with_zero_counts():
    C = random_sparse_chain(4, 5, 2, 6)
    table = edge_table(edge_probs(C))
    assert chi2_edge_statistic(table.q, np.zeros(len(table)), 300) == pytest.approx(C.T * 300)


def test_statistic_rejects_zero_reference():
    with pytest.raises(ValueError):
        chi2_edge_statistic([0.5, 0.0], [1, 1], 10)


def test_poissonized_null_mean_is_zero():
    C = random_sparse_chain(4, 4, 2, 7)
    table = edge_table(edge_probs(C))
    rng = np.random.default_rng(3)
    zs = []
    for _ in range(2000):
        w = sample_rounds(C, int(rng.poisson(500)), rng)
        counts = edge_counts(C, w)
        x = np.array([counts[t - 1][i, j] for t, i, j in zip(table.t, table.i, table.j)])
        zs.append(chi2_edge_statistic(table.q, x, 500))
    zs = np.array(zs)
    assert abs(zs.mean()) <= 3 * zs.std(ddof=1) / math.sqrt(zs.size)


# ---- end-to-end test ----

def test_default_m_covers_oversampling():
    for avail in (1, 10, 1000, 12345):
        m = default_m_for(avail)
        assert m + 3 * math.sqrt(m) <= avail


def test_too_few_words():
    C = random_sparse_chain(4, 4, 2, 1)
    with pytest.raises(InsufficientSamplesError):
        chi2_edge_test(C, sample_rounds(C, 10, 1), 0.1, 0, m=1000)


def test_word_length_checked():
    C = random_sparse_chain(4, 4, 2, 1)
    with pytest.raises(DimensionMismatchError):
        chi2_edge_test(C, np.zeros((5, 3), dtype=int), 0.1, 0)


def test_pruning_stage_rejects_heavy_use_of_pruned_edges():
    Q = random_sparse_chain(4, 4, 2, 1, rare_edges=3, rare_mass=(1e-6, 1e-5))
    prep = prepare_reference(Q, 0.1)
    assert prep.pruned.removed
    t, i, j, _ = prep.pruned.removed[0]
    w = sample_rounds(Q, 400, 2)
    # force every word through the pruned edge where that is consistent
    reach = [x for x in w.tolist() if x[t - 1] == i]
    assert reach
    bad = np.array([x[:t] + [j] + x[t + 1:] for x in reach])
    v = chi2_edge_test(Q, bad, 0.1, 0, m=default_m_for(bad.shape[0]), prepared=prep)
    assert v.rejected and v.reason == "pruning"


def test_threshold_precedence():
    Q = random_sparse_chain(4, 4, 2, 1)
    w = sample_rounds(Q, 2000, 3)
    v = chi2_edge_test(Q, w, 0.2, 0)
    assert v.threshold == pytest.approx(default_chi2_threshold(Q.k, Q.scale))
    assert v.threshold == pytest.approx(2 * math.sqrt(Q.k) * Q.scale**1.5)
    assert chi2_edge_test(Q, w, 0.2, 0, threshold=1.5).threshold == 1.5


@pytest.mark.slow
def test_sparse_family_null_and_alternative():
    n, eps = 4, 0.25
    inst = sparse_hard_instance(n, eps, 0)
    prep = prepare_reference(inst.Q, eps)
    m = 4000.0
    acc = rej = 0
    for trial in range(200):
        words = sample_rounds(inst.Q, int(m + 4 * math.sqrt(m)), (trial, 0))
        acc += chi2_edge_test(inst.Q, words, eps, (trial, 1), m=m, prepared=prep).accepted
        P = sparse_hard_instance(n, eps, (trial, 2)).P
        words = sample_rounds(P, int(m + 4 * math.sqrt(m)), (trial, 3))
        rej += chi2_edge_test(inst.Q, words, eps, (trial, 4), m=m, prepared=prep).rejected
    assert acc / 200 >= 4 / 5
    assert rej / 200 >= 4 / 5
