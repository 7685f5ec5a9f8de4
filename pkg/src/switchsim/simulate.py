"""Single-trajectory simulation.

The slot loop runs inside one jitted function.  Per slot: the policy picks
s(t) from q(t), arrivals a(t) are drawn, and q(t+1) = [q(t) + a(t) - s(t)]^+.

Post-warmup Σq is stored as block means over ``thinning`` consecutive slots:
batch means built from whole blocks are then identical to batch means of the
raw per-slot series, at a fraction of the memory.  SSC norms are point
samples every ``ssc_every`` post-warmup slots.  The decision trace (chosen,
MaxWeight and previous-schedule weights plus flags) covers every
``trace_every``-th slot from t = 0, since the class audits are per-slot
statements rather than steady-state ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import QUEUE_LIMIT, ConfigurationError, perm_weight, step_inplace
from .geometry import DYKSTRA_MAX_ITER, DYKSTRA_TOL, ssc_into
from .matching import max_weight_value
from .schedulers import (
    BURSTY_MW,
    MAXWEIGHT,
    POLICIES,
    RANDOMLY_DELAYED_MW,
    choose,
    validate_policy,
)
from .traffic import TrafficSpec, sample_into

IS_MW = 1
RECOMPUTED = 2


@njit(nogil=True, cache=True)
def _run(
    code, d, m, delta, probs, value, n_slots, warmup, block, ssc_every, trace_every,
    rng, q, prev, sum_q_out, ssc_out, w_out, mw_out, prev_out, flags_out,
    ssc_tol, ssc_max_iter,
):
    n = q.shape[0]
    out = np.empty(n, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)
    pipe = np.empty((m, n), dtype=np.int64)
    for k in range(m):
        pipe[k, :] = prev
    counters = np.zeros(2, dtype=np.int64)
    a = np.zeros((n, n), dtype=np.int64)
    unused = np.zeros((n, n), dtype=np.int64)
    work = np.empty((n, n))
    n_blocks = sum_q_out.size
    n_ssc = ssc_out.shape[0]
    n_trace = w_out.size
    bad_identity = 0
    ssc_fail = 0
    acc = 0
    filled = 0
    ssc_k = 0
    trace_k = 0
    for t in range(n_slots):
        record_trace = trace_k < n_trace and t % trace_every == 0
        prev_w = 0
        if record_trace:
            prev_w = perm_weight(q, prev)
        recomputed = choose(code, d, m, delta, q, prev, pipe, counters, rng, out, scratch)
        if record_trace:
            w = perm_weight(q, out)
            if code == MAXWEIGHT or (recomputed and (code == BURSTY_MW or code == RANDOMLY_DELAYED_MW)):
                mw = w
            else:
                mw = max_weight_value(q)
            w_out[trace_k] = w
            mw_out[trace_k] = mw
            prev_out[trace_k] = prev_w
            flags_out[trace_k] = (IS_MW if w == mw else 0) | (RECOMPUTED if recomputed else 0)
            trace_k += 1
        if t >= warmup:
            s = t - warmup
            if filled < n_blocks:
                tot = 0
                for i in range(n):
                    for j in range(n):
                        tot += q[i, j]
                acc += tot
                if (s + 1) % block == 0:
                    sum_q_out[filled] = acc / block
                    filled += 1
                    acc = 0
            if ssc_k < n_ssc and s % ssc_every == 0:
                a1, a2, a3, ok = ssc_into(q, ssc_tol, ssc_max_iter, work)
                if not ok:
                    ssc_fail += 1
                ssc_out[ssc_k, 0] = a1
                ssc_out[ssc_k, 1] = a2
                ssc_out[ssc_k, 2] = a3
                ssc_k += 1
        sample_into(probs, value, rng, a)
        bad_identity += step_inplace(q, a, out, unused)
        if t % 1024 == 0:
            for i in range(n):
                for j in range(n):
                    if q[i, j] > QUEUE_LIMIT:
                        raise OverflowError("queue length exceeded the int64 safety limit")
    return bad_identity, ssc_fail


@dataclass
class RunRecord:
    """Measurements from one trajectory."""

    policy: str
    params: dict
    n: int
    epsilon: float
    horizon: int
    warmup: int
    thinning: int
    sum_q: np.ndarray  # post-warmup block means of Σ_ij q_ij
    ssc: np.ndarray | None = None  # columns: ||q_perp_K||, ||q_par_K||, ||q_perp_S||
    ssc_every: int = 0
    weight: np.ndarray | None = None
    mw_weight: np.ndarray | None = None
    prev_weight: np.ndarray | None = None
    flags: np.ndarray | None = None
    trace_every: int = 1
    identity_violations: int = 0
    ssc_failures: int = 0
    final_q: np.ndarray = field(default=None, repr=False)

    @property
    def is_mw(self) -> np.ndarray | None:
        return None if self.flags is None else (self.flags & IS_MW).astype(bool)

    @property
    def recomputed(self) -> np.ndarray | None:
        return None if self.flags is None else (self.flags & RECOMPUTED).astype(bool)

    @property
    def norm_perp_k(self):
        return None if self.ssc is None else self.ssc[:, 0]

    @property
    def norm_parallel_k(self):
        return None if self.ssc is None else self.ssc[:, 1]

    @property
    def norm_perp_s(self):
        return None if self.ssc is None else self.ssc[:, 2]


def default_horizon(epsilon: float) -> int:
    return math.ceil(400 / epsilon**2)


def simulate(
    traffic: TrafficSpec,
    policy: str,
    params: dict | None = None,
    *,
    horizon: int | None = None,
    warmup_fraction: float = 0.2,
    thinning: int = 1,
    ssc_every: int = 0,
    trace: bool = False,
    trace_every: int = 1,
    rng: np.random.Generator,
    initial_schedule=None,
    q0=None,
) -> RunRecord:
    """Run one trajectory from ``q0`` (empty by default) and collect a RunRecord.

    ``ssc_every = 0`` disables the SSC samples; ``trace`` enables the
    per-slot decision trace.
    """
    params = validate_policy(policy, dict(params or {}))
    n = traffic.n
    T = default_horizon(traffic.epsilon) if horizon is None else int(horizon)
    if T < 1:
        raise ConfigurationError("horizon must be positive")
    if not 0.0 <= warmup_fraction < 1.0:
        raise ConfigurationError("warmup_fraction must lie in [0, 1)")
    if thinning < 1 or trace_every < 1 or ssc_every < 0:
        raise ConfigurationError("thinning and trace_every must be >= 1, ssc_every >= 0")
    warmup = int(warmup_fraction * T)
    post = T - warmup
    n_blocks = post // thinning
    ssc_k = 0 if ssc_every == 0 else (post + ssc_every - 1) // ssc_every
    n_trace = (T + trace_every - 1) // trace_every if trace else 0

    q = np.zeros((n, n), dtype=np.int64) if q0 is None else np.array(q0, dtype=np.int64)
    prev = np.arange(n, dtype=np.int64)
    if initial_schedule is not None:
        prev = np.array(initial_schedule.perm, dtype=np.int64)
    sum_q = np.zeros(n_blocks)
    ssc = np.zeros((ssc_k, 3))
    w = np.zeros(n_trace, dtype=np.int64)
    mw = np.zeros(n_trace, dtype=np.int64)
    pw = np.zeros(n_trace, dtype=np.int64)
    flags = np.zeros(n_trace, dtype=np.uint8)

    code = POLICIES[policy][0]
    bad, ssc_fail = _run(
        code, params.get("d", 1), params.get("m", 1), params.get("delta", 1.0),
        traffic.probs, traffic.a_max, T, warmup, thinning, max(ssc_every, 1), trace_every,
        rng, q, prev, sum_q, ssc, w, mw, pw, flags, DYKSTRA_TOL, DYKSTRA_MAX_ITER,
    )
    return RunRecord(
        policy=policy,
        params=params,
        n=n,
        epsilon=traffic.epsilon,
        horizon=T,
        warmup=warmup,
        thinning=thinning,
        sum_q=sum_q,
        ssc=ssc if ssc_every else None,
        ssc_every=ssc_every,
        weight=w if trace else None,
        mw_weight=mw if trace else None,
        prev_weight=pw if trace else None,
        flags=flags if trace else None,
        trace_every=trace_every,
        identity_violations=int(bad),
        ssc_failures=int(ssc_fail),
        final_q=q,
    )
