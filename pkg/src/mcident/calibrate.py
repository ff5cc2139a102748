"""Null-simulation calibration of test thresholds and sample-size constants."""
from __future__ import annotations

import math
from functools import partial

import numpy as np

from .hard import _sparse_trial, rates, words_needed
from .matrix import as_matrix
from .profiles import Constants, ThresholdProfile
from .rng import make_rng
from .runner import run_trials
from .sparse import (
    SparseChain,
    chi2_edge_test,
    default_chi2_threshold,
    prepare_reference,
    recommended_rounds,
    sample_rounds,
)
from .symmetric import flatten_chain, iid_statistic, planned_samples

MIN_TRIALS = 500


def _check_trials(trials):
    if trials < MIN_TRIALS:
        raise ValueError(f"calibration needs at least {MIN_TRIALS} trials")


def _summary(z: np.ndarray, percentile: float) -> dict:
    z = np.asarray(z, dtype=float)
    return {
        "tau": float(np.quantile(z, percentile, method="higher")),
        "percentile": percentile,
        "null_mean": float(z.mean()),
        "null_sd": float(z.std(ddof=1)),
        "null_se": float(z.std(ddof=1) / math.sqrt(z.size)),
        "null_runs": int(z.size),
    }


def calibrate_iid(q, lam: int, eps: float, trials: int = 2000, seed: int = 0,
                  percentile: float = 0.9, alternative=None) -> dict:
    """Threshold for the i.i.d. tester with ``lam`` samples from reference ``q``.

    Null counts are multinomial, exactly as the pooled pairs of a complete
    visit plan.  When ``alternative`` is given, the rejection rate of the
    calibrated threshold against it is reported as well.
    """
    _check_trials(trials)
    q = np.asarray(q, dtype=float).ravel()
    lam = int(lam)
    rng = make_rng((seed, 0))
    zs = np.array([iid_statistic(q, rng.multinomial(lam, q), eps).z for _ in range(trials)])
    entry = {"s": int(q.size), "epsilon": eps, "lambda": lam, "trials": trials, **_summary(zs, percentile)}
    if alternative is not None:
        p = np.asarray(alternative, dtype=float).ravel()
        arng = make_rng((seed, 1))
        rej = 0
        for _ in range(trials):
            st = iid_statistic(q, arng.multinomial(lam, p), eps)
            rej += st.out_of_bucket > st.allowance or st.z > entry["tau"]
        entry["alt_reject_rate"] = rej / trials
    return entry


def calibrate_symmetric(Q, eps: float, m: int, trials: int = 2000, seed: int = 0,
                        percentile: float = 0.9, constants: Constants | None = None,
                        profile: ThresholdProfile | None = None) -> ThresholdProfile:
    """iid-profile entry for testing symmetric ``Q`` from trajectories of length m."""
    a = as_matrix(Q)
    c = constants or Constants()
    lam = planned_samples(m, a.shape[0], eps, c.c_plan)
    entry = calibrate_iid(flatten_chain(a), lam, eps, trials, seed, percentile)
    entry["m"] = int(m)
    prof = profile or ThresholdProfile("iid")
    prof.add(entry)
    return prof


def _chi2_null_trial(index, master, *, Q, eps, m, prepared):
    tseed = (master, index, 1)
    words = sample_rounds(Q, words_needed(m, tseed), (master, index, 0))
    v = chi2_edge_test(Q, words, eps, tseed, m=m, threshold=math.inf, prepared=prepared)
    return v.statistic


def calibrate_chi2_edge(Q: SparseChain, eps: float, m: float, trials: int = 2000, seed: int = 0,
                        percentile: float = 0.9, jobs: int | None = 1,
                        profile: ThresholdProfile | None = None) -> ThresholdProfile:
    """chi2-edge profile entry from null runs of the full pruning + chi-square pipeline.

    Runs that the pruning stage rejects do not reach the statistic and are
    left out of the percentile; their share is recorded.
    """
    _check_trials(trials)
    prep = prepare_reference(Q, eps)
    zs = run_trials(partial(_chi2_null_trial, Q=Q, eps=eps, m=m, prepared=prep), trials, seed, jobs)
    z = np.array([x for x in zs if x is not None])
    entry = {"n": prep.n, "k": prep.k, "epsilon": eps, "m": m, "trials": trials,
             "pruning_rejects": trials - int(z.size),
             "literal_threshold": default_chi2_threshold(prep.k, prep.n), **_summary(z, percentile)}
    prof = profile or ThresholdProfile("chi2-edge")
    prof.add(entry)
    return prof


def calibrate_sample_constant(Q: SparseChain, P_factory, eps: float, c_grid, trials: int = 100,
                              seed: int = 0, target: float = 0.2, jobs: int | None = 1,
                              threshold: float | None = None) -> dict:
    """Smallest C in ``c_grid`` whose m = C n^{3/2}/eps^2 keeps both error
    rates at or below ``target`` under the given threshold.

    ``P_factory(seed)`` returns an alternative chain.
    """
    prep = prepare_reference(Q, eps)
    rows = []
    chosen = None
    for gi, C in enumerate(sorted(c_grid)):
        m = float(recommended_rounds(prep.n, eps, C))
        kw = dict(Q=Q, P_factory=P_factory, eps=eps, m=m, prepared=prep, threshold=threshold, profile=None)
        mseed = seed + 7919 * gi
        t1 = rates(run_trials(partial(_sparse_trial, alternative=False, **kw), trials, mseed, jobs))
        t2 = 1.0 - rates(run_trials(partial(_sparse_trial, alternative=True, **kw), trials, mseed, jobs))
        rows.append({"C": C, "m": m, "type1": t1, "type2": t2})
        if chosen is None and t1 <= target and t2 <= target:
            chosen = C
            break
    return {"C": chosen, "target": target, "trials": trials, "grid": rows}
