"""Identity testing of symmetric chains from a single trajectory.

A visit plan fixes how many outgoing transitions to record at each state.
Recording the first k_i departures from every state i turns one trajectory
into i.i.d. draws of (state, successor) pairs from Q/n, which are then fed
to an i.i.d. identity tester over n^2 outcomes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain_sim import _irreducible, as_states, hitting_time
from .errors import (
    InfiniteHittingTimeError,
    InsufficientSamplesError,
    NotSymmetricError,
)
from .matrix import as_matrix
from .profiles import Constants, ThresholdProfile
from .rng import make_rng
from .verdict import ACCEPT, REJECT, Verdict

SYMMETRY_TOL = 1e-9


def log_sq(n: int, eps: float) -> float:
    return math.log(n / eps) ** 2


def _check_eps(eps):
    if not 0.0 < eps < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")


@dataclass(frozen=True)
class VisitPlan:
    k: np.ndarray = field(repr=False)
    m_prime: int

    def __post_init__(self):
        k = np.asarray(self.k, dtype=np.int64).ravel()
        if np.any(k < 0) or k.sum() != self.m_prime:
            raise ValueError("quotas must be nonnegative and sum to m'")
        k.setflags(write=False)
        object.__setattr__(self, "k", k)

    @classmethod
    def from_quotas(cls, k) -> "VisitPlan":
        k = np.asarray(k, dtype=np.int64)
        return cls(k, int(k.sum()))

    @property
    def n(self) -> int:
        return self.k.size


def planned_samples(m: int, n: int, eps: float, c_plan: float = 1.0) -> int:
    return math.ceil(c_plan * m / log_sq(n, eps))


def draw_visit_plan(m: int, n: int, eps: float, seed=None, c_plan: float = 1.0) -> VisitPlan:
    """Quotas = histogram of m' uniform draws over [n], m' = ceil(c m / log^2(n/eps))."""
    if n < 2:
        raise ValueError("need n >= 2")
    if m < 1:
        raise InsufficientSamplesError("no transitions to plan samples from")
    _check_eps(eps)
    mp = planned_samples(m, n, eps, c_plan)
    if mp < 1:
        raise InsufficientSamplesError("trajectory too short for any planned sample")
    rng = make_rng(seed)
    k = np.bincount(rng.integers(0, n, size=mp), minlength=n)
    return VisitPlan(k, mp)


@dataclass(frozen=True)
class EdgeSampleSet:
    """Recorded successors per state, in order of observation."""

    successors: tuple
    quotas: np.ndarray = field(repr=False)

    @property
    def complete(self) -> bool:
        return all(len(s) == q for s, q in zip(self.successors, self.quotas))

    def pairs(self) -> np.ndarray:
        """(state, successor) pairs as an array of shape (N, 2)."""
        out = [(i, j) for i, lst in enumerate(self.successors) for j in lst]
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    def shortfall(self) -> np.ndarray:
        return self.quotas - np.array([len(s) for s in self.successors])


def collect_edge_samples(w, plan: VisitPlan) -> EdgeSampleSet:
    """Record s_{t+1} for each departure from s_t while s_t is under quota."""
    s = as_states(w).tolist()
    quota = plan.k.tolist()
    lists = [[] for _ in quota]
    if s and max(s) >= len(quota):
        raise ValueError("trajectory visits a state outside the plan")
    remaining = sum(1 for q in quota if q > 0)
    for a, b in zip(s[:-1], s[1:]):
        lst = lists[a]
        if len(lst) < quota[a]:
            lst.append(b)
            if len(lst) == quota[a]:
                remaining -= 1
                if remaining == 0:
                    break
    return EdgeSampleSet(tuple(tuple(x) for x in lists), plan.k)


def flatten_chain(Q) -> np.ndarray:
    """Distribution Q_ij / n over the n^2 pairs, indexed i*n + j."""
    a = as_matrix(Q)
    return (a / a.shape[0]).ravel()


def default_iid_tau(bucket_size: int, confidence: float = 0.8) -> float:
    """One-sided Chebyshev bound: Var Z = 2|A| under the Poisson null, so
    Pr[Z > tau] <= 1 - confidence at tau = sqrt(2|A|) sqrt(c / (1 - c))."""
    return math.sqrt(2.0 * bucket_size) * math.sqrt(confidence / (1.0 - confidence))


@dataclass(frozen=True)
class IIDStatistic:
    z: float
    lam: float
    bucket_size: int
    out_of_bucket: float
    allowance: float


def iid_statistic(q, counts, eps: float) -> IIDStatistic:
    """Bucketed chi-square statistic for counts against reference q."""
    q = np.asarray(q, dtype=float).ravel()
    x = np.asarray(counts, dtype=float).ravel()
    if x.shape != q.shape:
        raise ValueError("counts and reference must have the same length")
    lam = float(x.sum())
    if lam <= 0:
        raise InsufficientSamplesError("no samples")
    s = q.size
    A = q >= eps**2 / (50.0 * s)
    mu = lam * q[A]
    xa = x[A]
    z = float(np.sum(((xa - mu) ** 2 - xa) / mu))
    return IIDStatistic(z, lam, int(A.sum()), float(x[~A].sum()), 2.0 * lam * eps**2 / 25.0)


def iid_identity_test(q, samples, eps: float, threshold_profile: ThresholdProfile | None = None,
                      tau: float | None = None, inner_confidence: float = 0.8,
                      counts=None) -> Verdict:
    """Test whether i.i.d. ``samples`` (outcome indices) come from ``q``.

    Rejects outright when too many samples land on the low-mass outcomes,
    otherwise compares the bucketed statistic with a threshold taken from
    ``tau``, the profile, or the one-sided Chebyshev default, in that order.
    """
    _check_eps(eps)
    q = np.asarray(q, dtype=float).ravel()
    if counts is None:
        samples = np.asarray(samples, dtype=np.int64).ravel()
        if samples.size == 0:
            raise InsufficientSamplesError("no samples")
        counts = np.bincount(samples, minlength=q.size)
        if counts.size > q.size:
            raise ValueError("sample outside the reference support")
    st = iid_statistic(q, counts, eps)
    source = "argument"
    if tau is None and threshold_profile is not None:
        tau = threshold_profile.tau(s=q.size, epsilon=eps, **{"lambda": st.lam})
        source = f"profile:{threshold_profile.source}" if tau is not None else source
    if tau is None:
        tau = default_iid_tau(st.bucket_size, inner_confidence)
        source = "chebyshev-default"
    diag = {
        "lambda": st.lam,
        "bucket_size": st.bucket_size,
        "out_of_bucket": st.out_of_bucket,
        "out_of_bucket_allowance": st.allowance,
        "tau": tau,
        "tau_source": source,
    }
    if st.out_of_bucket > st.allowance:
        diag["stage"] = "out-of-bucket"
        return Verdict(REJECT, st.z, "iid-test", tau, diag)
    diag["stage"] = "statistic"
    return Verdict(ACCEPT if st.z <= tau else REJECT, st.z, "iid-test", tau, diag)


def _check_symmetric(a: np.ndarray):
    gap = float(np.max(np.abs(a - a.T)))
    if gap > SYMMETRY_TOL:
        raise NotSymmetricError(f"reference chain is not symmetric (max gap {gap:.3g})")


def test_identity_symmetric(Q, w, eps: float, seed=None, constants: Constants | None = None,
                            threshold_profile: ThresholdProfile | None = None,
                            tau: float | None = None) -> Verdict:
    """Decide whether trajectory ``w`` was generated by symmetric ``Q``.

    Rejects with reason ``insufficient-visits`` when some state was left
    before its quota filled; otherwise returns the i.i.d. tester's verdict on
    the pooled (state, successor) pairs.
    """
    a = as_matrix(Q)
    _check_symmetric(a)
    _check_eps(eps)
    if not _irreducible(a):
        raise InfiniteHittingTimeError("reference chain is reducible")
    c = constants or Constants()
    n = a.shape[0]
    states = as_states(w)
    m = states.size - 1
    plan = draw_visit_plan(max(m, 1), n, eps, seed, c.c_plan)
    samples = collect_edge_samples(states, plan)
    if not samples.complete:
        short = samples.shortfall()
        return Verdict(REJECT, None, "insufficient-visits", None, {
            "m": m, "m_prime": plan.m_prime,
            "states_short": int(np.count_nonzero(short)),
            "missing_samples": int(short.sum()),
        })
    pairs = samples.pairs()
    v = iid_identity_test(flatten_chain(a), pairs[:, 0] * n + pairs[:, 1], eps,
                          threshold_profile, tau, c.inner_confidence)
    diag = dict(v.diagnostics, m=m, m_prime=plan.m_prime)
    return Verdict(v.decision, v.statistic, v.reason, v.threshold, diag)


test_identity_symmetric.__test__ = False  # keep pytest from collecting it


def recommended_trajectory_length(Q, eps: float, constants: Constants | None = None) -> int:
    """c_hit H log(H+2) L + c_lin (n/eps) L with L = log^2(n/eps)."""
    a = as_matrix(Q)
    _check_eps(eps)
    c = constants or Constants()
    n = a.shape[0]
    H = hitting_time(a)
    L = log_sq(n, eps)
    return math.ceil(c.c_hit * H * math.log(H + 2.0) * L + c.c_lin * (n / eps) * L)
