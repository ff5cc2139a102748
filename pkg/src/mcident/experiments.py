"""Acceptance experiments.

Each function runs one experiment from a plain parameter dict, returns a
JSON-serializable dict with the measured quantities and a ``passed`` flag,
and never looks at wall time except to report it.
"""
from __future__ import annotations

import math
import time
from functools import partial

import numpy as np

from .calibrate import calibrate_sample_constant, calibrate_symmetric
from .distance import (
    chain_distance,
    hellinger_sq_words,
    minimal_distinguishing_length,
    word_distances_bruteforce,
)
from .chain_sim import sample_trajectory
from .errors import NotARiffleError
from .generators import (
    clique_plus_vertex,
    complete_walk,
    essential_corpus,
    perturb_sparse_chain,
    random_distribution,
    random_sparse_chain,
    random_stochastic,
)
from .hard import _sparse_trial, power_curve, rates, symmetric_hard_instance, symmetric_radius
from .matrix import geometric_mean, has_identical_essential_class, spectral_radius
from .profiles import Constants
from .rng import make_rng
from .runner import run_trials
from .shuffle import (
    biased_gsr_model,
    build_grid_chain,
    canonical_path,
    encode_shuffle,
    gsr_model,
    riffle,
)
from .sparse import (
    block_cyclic_check,
    chi2_edge_statistic,
    default_chi2_threshold,
    dist_rounds_bruteforce,
    edge_counts,
    edge_probs,
    edge_table,
    filter_samples,
    hellinger_sq_rounds,
    prepare_reference,
    prune,
    recommended_rounds,
    sample_rounds,
)
from .symmetric import recommended_trajectory_length, test_identity_symmetric


def _timed(fn):
    def wrapper(params: dict | None = None, **kw):
        p = dict(params or {})
        p.update(kw)
        t0 = time.perf_counter()
        out = fn(p)
        out["seconds"] = time.perf_counter() - t0
        out["params"] = p
        return out
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def spectral_closed_form(p):
    """Radius of sqrt(P o Q) on symmetric hard instances vs the closed form."""
    worst, min_gap, count = 0.0, math.inf, 0
    for n in p.get("ns", [10, 50]):
        for eps in p.get("epsilons", [0.01, 0.05, 0.1]):
            target = symmetric_radius(math.sqrt(8 * eps))
            for s in range(p.get("seeds", 20)):
                inst = symmetric_hard_instance(n, eps, (p.get("seed", 0), n, s))
                rho = spectral_radius(geometric_mean(inst.P, inst.Q))
                worst = max(worst, abs(rho - target))
                min_gap = min(min_gap, chain_distance(inst.P, inst.Q) - eps)
                count += 1
    return {"instances": count, "max_abs_error": worst, "min_distance_minus_eps": min_gap,
            "passed": worst <= 1e-9 and min_gap >= 0.0}


@_timed
def kazakos_oracle(p):
    """Kazakos recursion vs brute-force enumeration, and the TV-Hellinger sandwich."""
    rng = make_rng(p.get("seed", 0))
    worst, sandwich_bad = 0.0, 0
    N = p.get("instances", 200)
    for _ in range(N):
        n = int(rng.integers(1, 5))
        length = int(rng.integers(0, 7))
        P = random_stochastic(n, rng, density=0.7)
        Q = random_stochastic(n, rng, density=0.7)
        a, b = random_distribution(n, rng), random_distribution(n, rng)
        h = hellinger_sq_words(P, Q, a, b, length)
        rep = word_distances_bruteforce(P, Q, a, length, q_start=b)
        worst = max(worst, abs(h - rep.hellinger_sq))
        H = math.sqrt(rep.hellinger_sq)
        if not (math.sqrt(2) * H + 1e-12 >= rep.tv >= rep.hellinger_sq - 1e-12):
            sandwich_bad += 1
    return {"instances": N, "max_abs_error": worst, "sandwich_violations": sandwich_bad,
            "kazakos_passed": worst <= 1e-12, "sandwich_passed": sandwich_bad == 0,
            "passed": worst <= 1e-12 and sandwich_bad == 0}


@_timed
def essential_spectrum(p):
    """Identical essential class <=> rho = 1 over the example corpus."""
    corpus = essential_corpus(p.get("seed", 0))
    mismatches = []
    for name, P, Q in corpus:
        rho = spectral_radius(geometric_mean(P, Q))
        if has_identical_essential_class(P, Q) != (abs(rho - 1.0) <= 1e-9):
            mismatches.append(name)
    sq = next(c for c in corpus if c[0] == "square+triangle vs clique+triangle")
    d_sq = chain_distance(sq[1], sq[2])
    n = p.get("clique_n", 10)
    lam = spectral_radius(geometric_mean(clique_plus_vertex(n), complete_walk(n, loops=True)))
    lam_err = abs(lam - math.sqrt((n - 1) / n))
    return {"instances": len(corpus), "mismatches": mismatches, "square_triangle_distance": d_sq,
            "clique_lambda1": lam, "clique_lambda1_error": lam_err,
            "passed": not mismatches and abs(d_sq) <= 1e-9 and lam_err <= 1e-9}


@_timed
def distinguishing_length(p):
    """Average-start minimal length on symmetric hard instances vs ln2/(2eps) and 10 log(n)/eps."""
    n = p.get("n", 10)
    rows = []
    for eps in p.get("epsilons", [0.02, 0.05, 0.1]):
        inst = symmetric_hard_instance(n, eps, (p.get("seed", 0), 5))
        ell = minimal_distinguishing_length(inst.P, inst.Q, mode="average")
        lo, hi = math.log(2) / (2 * eps), 10 * math.log(n) / eps
        rows.append({"epsilon": eps, "length": ell, "lower": lo, "upper": hi, "ok": lo <= ell <= hi})
    return {"rows": rows, "passed": all(r["ok"] for r in rows)}


def _sym_setup(p):
    n, eps = p.get("n", 20), p.get("epsilon", 0.25)
    constants = Constants.from_dict(p.get("constants", {}))
    Q = symmetric_hard_instance(n, 0.0, 0).Q
    m = recommended_trajectory_length(Q, eps, constants)
    return n, eps, constants, Q, m


@_timed
def symmetric_power(p):
    """Type I / type II of the symmetric tester at the recommended length."""
    n, eps, constants, Q, m = _sym_setup(p)
    profile = calibrate_symmetric(Q, eps, m, p.get("calibration_trials", 2000),
                                  p.get("calibration_seed", 101), constants=constants)
    dist = p.get("alternative_distance", eps)
    rows = power_curve("symmetric", n, eps, [m], p.get("trials", 200), p.get("seed", 0),
                       p.get("jobs", 1), alternative_distance=dist, constants=constants, profile=profile)
    r = rows[0]
    return {"m": m, "tau": profile.entries[0]["tau"], "type1": r["type1"], "type2": r["type2"],
            "passed": r["type1"] <= 1 / 3 and r["type2"] <= 1 / 3}


def _null_reason(index, master, *, Q, eps, m, constants):
    w = sample_trajectory(Q, np.full(Q.n, 1.0 / Q.n), m, (master, index, 0))
    return test_identity_symmetric(Q, w, eps, (master, index, 1), constants).reason


@_timed
def visit_counts(p):
    """Share of null runs rejected for insufficient visits at the recommended length."""
    n, eps, constants, Q, m = _sym_setup(p)
    trials = p.get("trials", 500)
    reasons = run_trials(partial(_null_reason, Q=Q, eps=eps, m=m, constants=constants),
                         trials, p.get("seed", 0), p.get("jobs", 1))
    rate = sum(r == "insufficient-visits" for r in reasons) / trials
    return {"m": m, "trials": trials, "insufficient_visit_rate": rate, "passed": rate <= 0.05}


def _moment_trial(index, master, *, Q, P, m, table_q, masks):
    rng = make_rng((master, index))
    chain = P if P is not None else Q
    mp = int(rng.poisson(m))
    words = sample_rounds(chain, mp, rng)
    counts = edge_counts(Q, words)
    x = np.concatenate([c[mk] for c, mk in zip(counts, masks)])
    return chi2_edge_statistic(table_q, x, m), x


@_timed
def chi2_moments(p):
    """Moments of Z and Poissonized count independence on a small sparse chain."""
    seed = p.get("seed", 0)
    states, T, k = p.get("states", 5), p.get("T", 5), p.get("k", 3)
    m, trials = float(p.get("m", 2000)), p.get("trials", 2000)
    Q = random_sparse_chain(states, T, k, (seed, 1), scale=p.get("scale", states))
    P = perturb_sparse_chain(Q, p.get("perturbation", 0.5), (seed, 2))
    flows_q, flows_p = edge_probs(Q), edge_probs(P)
    masks = [f > 0 for f in flows_q]
    tab = edge_table(flows_q, masks=masks)
    ptab = np.concatenate([f[mk] for f, mk in zip(flows_p, masks)])
    closed = m * float(np.sum((ptab - tab.q) ** 2 / tab.q))
    dist = dist_rounds_bruteforce(P, Q)
    jobs = p.get("jobs", 1)
    null = run_trials(partial(_moment_trial, Q=Q, P=None, m=m, table_q=tab.q, masks=masks), trials, seed, jobs)
    alt = run_trials(partial(_moment_trial, Q=Q, P=P, m=m, table_q=tab.q, masks=masks), trials, seed + 1, jobs)
    z0 = np.array([z for z, _ in null])
    z1 = np.array([z for z, _ in alt])
    se0, se1 = z0.std(ddof=1) / math.sqrt(trials), z1.std(ddof=1) / math.sqrt(trials)
    var0 = float(z0.var(ddof=1))
    bound = math.sqrt(Q.k) * Q.scale**3
    slack = 3.0 * math.sqrt(2.0 / (trials - 1))
    # Poissonization checks on the null counts
    X = np.array([x for _, x in null])
    mean, var = X.mean(axis=0), X.var(axis=0, ddof=1)
    disp = var / mean
    disp_tol = 4.0 * math.sqrt(2.0 / (trials - 1))
    r_tol = 3.0 / math.sqrt(trials)
    max_r, r_bad, pairs = 0.0, 0, 0
    for t in range(1, Q.T + 1):
        idx = np.flatnonzero(tab.t == t)
        if idx.size < 2:
            continue
        R = np.corrcoef(X[:, idx], rowvar=False)
        iu = np.triu_indices(idx.size, 1)
        r = np.abs(R[iu])
        pairs += r.size
        max_r = max(max_r, float(r.max()))
        r_bad += int((r > r_tol).sum())
    res = {
        "edges": int(tab.q.size), "k": Q.k, "scale": Q.scale,
        "null_mean": float(z0.mean()), "null_se": float(se0),
        "alt_mean": float(z1.mean()), "alt_se": float(se1), "closed_form": closed,
        "dist_bruteforce": dist, "closed_form_lower": m * dist**2 / 4,
        "null_var": var0, "var_bound": bound, "var_slack": slack,
        "max_dispersion_error": float(np.max(np.abs(disp - 1.0))), "dispersion_tol": disp_tol,
        "pairs": pairs, "max_abs_r": max_r, "r_tol": r_tol, "r_violations": r_bad,
    }
    res["null_mean_ok"] = abs(res["null_mean"]) <= 3 * se0
    res["alt_mean_ok"] = abs(res["alt_mean"] - closed) <= 3 * se1
    res["closed_form_ok"] = closed >= m * dist**2 / 4
    res["var_ok"] = var0 <= bound * (1 + slack)
    res["moments_passed"] = res["null_mean_ok"] and res["alt_mean_ok"] and res["closed_form_ok"] and res["var_ok"]
    res["poisson_passed"] = res["max_dispersion_error"] <= disp_tol and r_bad == 0
    res["passed"] = res["moments_passed"] and res["poisson_passed"]
    return res


def _fixed_chain(seed, *, chain):
    return chain


@_timed
def shuffle_power(p):
    """GSR vs drop-biased GSR with the literal chi-square threshold and calibrated C."""
    n, eps = p.get("n_cards", 26), p.get("epsilon", 0.3)
    beta = p.get("drop_bias", 2.1)
    Q = build_grid_chain(gsr_model(n))
    P = build_grid_chain(biased_gsr_model(n, 0.5, beta))
    hsq = hellinger_sq_rounds(P, Q)
    factory = partial(_fixed_chain, chain=P)
    jobs = p.get("jobs", 1)
    cal = calibrate_sample_constant(Q, factory, eps, p.get("c_grid", [2.0**-k for k in range(6, -2, -1)]),
                                    p.get("calibration_trials", 100), p.get("calibration_seed", 202),
                                    p.get("calibration_target", 0.2), jobs)
    C = cal["C"]
    if C is None:
        return {"hellinger_sq": hsq, "calibration": cal, "passed": False}
    m = float(recommended_rounds(n, eps, C))
    prep = prepare_reference(Q, eps)
    kw = dict(Q=Q, P_factory=factory, eps=eps, m=m, prepared=prep, threshold=None, profile=None)
    trials, seed = p.get("trials", 100), p.get("seed", 0)
    null = run_trials(partial(_sparse_trial, alternative=False, **kw), trials, seed, jobs)
    alt = run_trials(partial(_sparse_trial, alternative=True, **kw), trials, seed, jobs)
    t1, t2 = rates(null), 1.0 - rates(alt)
    return {"hellinger_sq": hsq, "distance_lower_bound_ok": hsq >= eps, "C": C, "m": m,
            "threshold": default_chi2_threshold(prep.k, prep.n),
            "type1": t1, "type2": t2, "calibration": cal,
            "passed": hsq >= eps and t1 <= 1 / 3 and t2 <= 1 / 3}


@_timed
def pruning_contract(p):
    """Pruned edges, the TV cost of pruning, and null rejections by the count rule."""
    seed, eps = p.get("seed", 0), p.get("epsilon", 0.1)
    states, T, k = p.get("states", 5), p.get("T", 5), p.get("k", 3)
    worst_ratio, worst_tv, removed_total = math.inf, 0.0, 0
    chains = []
    for c in range(p.get("chains", 50)):
        Q = random_sparse_chain(states, T, k, (seed, c), rare_edges=p.get("rare_edges", 4))
        pr = prune(Q, eps)
        removed_total += len(pr.removed)
        for f, mk in zip(edge_probs(pr.chain), pr.masks):
            if mk.any():
                worst_ratio = min(worst_ratio, float(f[mk].min() / pr.threshold))
        worst_tv = max(worst_tv, dist_rounds_bruteforce(Q, pr.chain))
        chains.append((Q, pr))
    # null rejection rate of the count rule
    Q, pr = max(chains, key=lambda c: len(c[1].removed))
    m, trials = int(p.get("m", 10_000)), p.get("trials", 200)
    rng_master = p.get("seed", 0)
    rejects = 0
    for i in range(trials):
        w = sample_rounds(Q, m, (rng_master, 77, i))
        _, cnt = filter_samples(w, pr.masks)
        rejects += cnt > 2 * m * eps**2
    rate = rejects / trials
    return {"chains": len(chains), "edges_removed": removed_total, "min_flow_over_threshold": worst_ratio,
            "max_tv_q_qstar": worst_tv, "tv_bound": 2 * eps**2, "null_reject_rate": rate,
            "passed": worst_ratio >= 1.0 and worst_tv <= 2 * eps**2 and rate <= 0.1}


@_timed
def encoder_round_trip(p):
    """encode_shuffle(riffle) recovers the sampled walk; non-riffles raise."""
    n = p.get("n_cards", 52)
    model = gsr_model(n)
    deck = list(range(1, n + 1))
    bad, exact = 0, 0
    N = p.get("shuffles", 10_000)
    for i in range(N):
        r = riffle(model, deck, (p.get("seed", 0), i))
        got = encode_shuffle(deck, r.deck)
        bad += got != canonical_path(r.path)
        exact += got == r.path
    rng = make_rng((p.get("seed", 0), 1))
    raised, tried = 0, 0
    while tried < p.get("non_riffles", 200):
        perm = list(rng.permutation(deck))
        pos = {c: i for i, c in enumerate(perm)}
        o = [pos[c] for c in deck]
        if sum(o[v] > o[v + 1] for v in range(n - 1)) < 2:
            continue
        tried += 1
        try:
            encode_shuffle(deck, perm)
        except NotARiffleError:
            raised += 1
    return {"shuffles": N, "mismatches": bad, "exact_matches": exact, "non_riffles": tried,
            "raised": raised, "passed": bad == 0 and raised == tried}


@_timed
def block_cyclic(p):
    """rho(sqrt(P* o Q*))^T vs 1 - H^2 on random small sparse pairs."""
    seed = p.get("seed", 0)
    worst = 0.0
    N = p.get("pairs", 50)
    for c in range(N):
        states = int(make_rng((seed, c, 0)).integers(2, 6))
        T = int(make_rng((seed, c, 1)).integers(3, 6))
        k = min(states, 3)
        Q = random_sparse_chain(states, T, k, (seed, c, 2))
        P = perturb_sparse_chain(Q, 1.0, (seed, c, 3)) if c % 2 else random_sparse_chain(states, T, k, (seed, c, 4))
        a, b = block_cyclic_check(P, Q)
        worst = max(worst, abs(a - b))
    return {"pairs": N, "max_abs_error": worst, "passed": worst <= 1e-9}


@_timed
def lower_bound(p):
    """Combined error of the symmetric tester far below n/eps samples."""
    n, eps = p.get("n", 20), p.get("epsilon", 0.1)
    m = int(round(n / (10 * eps)))
    rows = power_curve("symmetric", n, eps, [m], p.get("trials", 200), p.get("seed", 0), p.get("jobs", 1))
    r = rows[0]
    return {"m": m, "type1": r["type1"], "type2": r["type2"], "combined": r["combined"],
            "passed": r["combined"] > 1 / 3}


EXPERIMENTS = {
    "spectral-closed-form": spectral_closed_form,
    "kazakos-oracle": kazakos_oracle,
    "essential-spectrum": essential_spectrum,
    "distinguishing-length": distinguishing_length,
    "symmetric-power": symmetric_power,
    "visit-counts": visit_counts,
    "chi2-moments": chi2_moments,
    "shuffle-power": shuffle_power,
    "pruning-contract": pruning_contract,
    "encoder-round-trip": encoder_round_trip,
    "block-cyclic": block_cyclic,
    "lower-bound": lower_bound,
}
