"""Scheduling policies.

All policies share one jitted dispatch, :func:`choose`, which operates on raw
arrays so that the simulation kernel and the Python-level
:class:`SchedulerState` run exactly the same code and consume the random
stream in the same order.

Random indices are drawn as ``int(rng.random() * k)``; the bias from the
53-bit mantissa is far below anything a simulation can resolve and it is an
order of magnitude faster than ``Generator.integers`` inside numba.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from numba import njit

from .core import ConfigurationError, Schedule, as_queue_matrix, perm_weight
from .matching import max_weight_perm, max_weight_value

MAXWEIGHT = 0
RANDOM = 1
POWER_OF_D = 2
RANDOM_D_FLIP = 3
D_FLIP = 4
BURSTY_MW = 5
PIPELINED_MW = 6
RANDOMLY_DELAYED_MW = 7
PICK_AND_COMPARE = 8

# name -> (code, required parameter or None)
POLICIES = {
    "maxweight": (MAXWEIGHT, None),
    "random": (RANDOM, None),
    "power_of_d": (POWER_OF_D, "d"),
    "random_d_flip": (RANDOM_D_FLIP, "d"),
    "d_flip": (D_FLIP, "d"),
    "bursty_mw": (BURSTY_MW, "m"),
    "pipelined_mw": (PIPELINED_MW, "m"),
    "randomly_delayed_mw": (RANDOMLY_DELAYED_MW, "delta"),
    "pick_and_compare": (PICK_AND_COMPARE, "d"),
}

# policies whose choice depends on the previous schedule
MEMORY_POLICIES = ("d_flip", "randomly_delayed_mw", "pick_and_compare")


# ---------------------------------------------------------------- primitives


@njit(nogil=True, cache=True)
def _randint(rng, k):
    return int(rng.random() * k)


@njit(nogil=True, cache=True)
def shuffle_into(rng, perm):
    """Fisher-Yates: overwrite ``perm`` with a uniform random permutation."""
    n = perm.size
    for i in range(n):
        perm[i] = i
    for i in range(n - 1, 0, -1):
        j = _randint(rng, i + 1)
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t


@njit(nogil=True, cache=True)
def power_of_d_into(q, d, rng, out, scratch):
    """Best of ``d`` uniform samples (with replacement); earliest wins ties."""
    shuffle_into(rng, out)
    best = perm_weight(q, out)
    for _ in range(d - 1):
        shuffle_into(rng, scratch)
        w = perm_weight(q, scratch)
        if w > best:
            best = w
            out[:] = scratch
    return best


@njit(nogil=True, cache=True)
def flip_inplace(q, perm, rng):
    """One flip step on ``perm``; returns the weight change (>= 0)."""
    n = perm.size
    if n < 2:
        return 0
    i = _randint(rng, n)
    k = _randint(rng, n - 1)
    if k >= i:
        k += 1
    j = perm[i]
    l = perm[k]
    gain = q[i, l] + q[k, j] - q[i, j] - q[k, l]
    if gain > 0:
        perm[i] = l
        perm[k] = j
        return gain
    return 0


@njit(nogil=True, cache=True)
def flips_inplace(q, perm, d, rng):
    gain = 0
    for _ in range(d):
        gain += flip_inplace(q, perm, rng)
    return gain


# ------------------------------------------------------------------ dispatch


@njit(nogil=True, cache=True)
def choose(code, d, m, delta, q, prev, pipe, counters, rng, out, scratch):
    """Pick the schedule for this slot into ``out``.

    ``prev`` holds s(t-1) on entry and s(t) on exit.  ``pipe`` is the
    pipelined-MaxWeight ring buffer (m x n), ``counters`` = [slot counter,
    ring head].  Returns True when a MaxWeight matching was (re)computed this
    slot.
    """
    recomputed = False
    if code == MAXWEIGHT:
        max_weight_perm(q, out)
        recomputed = True
    elif code == RANDOM:
        shuffle_into(rng, out)
    elif code == POWER_OF_D:
        power_of_d_into(q, d, rng, out, scratch)
    elif code == RANDOM_D_FLIP:
        shuffle_into(rng, out)
        flips_inplace(q, out, d, rng)
    elif code == D_FLIP:
        out[:] = prev
        flips_inplace(q, out, d, rng)
    elif code == BURSTY_MW:
        empty = True
        for i in range(q.shape[0]):
            for j in range(q.shape[1]):
                if q[i, j] != 0:
                    empty = False
        if empty:
            counters[0] = 0
        if counters[0] % m == 0:
            max_weight_perm(q, scratch)
            pipe[0, :] = scratch
            recomputed = True
        out[:] = pipe[0]
        counters[0] += 1
    elif code == PIPELINED_MW:
        # slot t uses the matching computed from q(t - m)
        head = counters[1]
        out[:] = pipe[head]
        max_weight_perm(q, scratch)
        pipe[head, :] = scratch
        counters[1] = (head + 1) % m
        recomputed = True
    elif code == RANDOMLY_DELAYED_MW:
        if rng.random() < delta:
            max_weight_perm(q, out)
            recomputed = True
        else:
            out[:] = prev
    elif code == PICK_AND_COMPARE:
        cand = power_of_d_into(q, d, rng, out, scratch)
        if cand <= perm_weight(q, prev):
            out[:] = prev
    prev[:] = out
    return recomputed


# ---------------------------------------------------------------- Python API


def max_weight_matching(q) -> Schedule:
    """MaxWeight schedule; the lexicographically smallest one on ties."""
    q = as_queue_matrix(q)
    perm = np.empty(q.shape[0], dtype=np.int64)
    max_weight_perm(q, perm)
    return Schedule(perm)


def random_schedule(n: int, rng: np.random.Generator) -> Schedule:
    if n < 1:
        raise ConfigurationError("n must be positive")
    perm = np.empty(n, dtype=np.int64)
    shuffle_into(rng, perm)
    return Schedule(perm)


def power_of_d(q, d: int, rng: np.random.Generator) -> Schedule:
    if d < 1:
        raise ConfigurationError("power-of-d needs d >= 1")
    q = as_queue_matrix(q)
    out = np.empty(q.shape[0], dtype=np.int64)
    scratch = np.empty_like(out)
    power_of_d_into(q, d, rng, out, scratch)
    return Schedule(out)


def flip_step(q, s: Schedule, rng: np.random.Generator) -> Schedule:
    q = as_queue_matrix(q)
    perm = s.perm.copy()
    flip_inplace(q, perm, rng)
    return Schedule(perm)


def random_d_flip(q, d: int, rng: np.random.Generator) -> Schedule:
    if d < 0:
        raise ConfigurationError("random d-flip needs d >= 0")
    q = as_queue_matrix(q)
    perm = np.empty(q.shape[0], dtype=np.int64)
    shuffle_into(rng, perm)
    flips_inplace(q, perm, d, rng)
    return Schedule(perm)


@dataclass
class DecisionTrace:
    chosen: Schedule
    chosen_weight: int
    maxweight_weight: int
    is_maxweight: bool
    prev_weight: int
    recomputed: bool
    candidates_considered: int


def _candidates(name: str, params: dict) -> int:
    if name in ("maxweight", "bursty_mw", "pipelined_mw"):
        return 1
    if name == "random":
        return 1
    if name == "power_of_d":
        return params["d"]
    if name in ("random_d_flip", "d_flip"):
        return params["d"] + 1
    if name == "randomly_delayed_mw":
        return 2
    return params["d"] + 1  # pick_and_compare


def validate_policy(name: str, params: dict) -> dict:
    """Check a policy name and its parameters; returns the normalized params."""
    if name not in POLICIES:
        raise ConfigurationError(
            f"unknown scheduler {name!r}; choose from {', '.join(sorted(POLICIES))}"
        )
    _, needed = POLICIES[name]
    extra = set(params) - ({needed} if needed else set())
    if extra:
        raise ConfigurationError(f"{name} does not take parameter(s) {sorted(extra)}")
    if needed and needed not in params:
        raise ConfigurationError(f"{name} requires parameter {needed!r}")
    out = dict(params)
    if needed == "d":
        d = out["d"]
        if int(d) != d:
            raise ConfigurationError("d must be an integer")
        out["d"] = int(d)
        low = 0 if name in ("random_d_flip", "d_flip") else 1
        if out["d"] < low:
            raise ConfigurationError(f"{name} needs d >= {low}")
    elif needed == "m":
        m = out["m"]
        if int(m) != m or m < 1:
            raise ConfigurationError(f"{name} needs an integer m >= 1")
        out["m"] = int(m)
    elif needed == "delta":
        delta = float(out["delta"])
        if not 0.0 < delta <= 1.0:
            raise ConfigurationError("delta must lie in (0, 1]")
        out["delta"] = delta
    return out


@dataclass
class SchedulerState:
    """One policy instance with its memory; serves a single trajectory.

    Memory-carrying policies start from ``initial`` (identity by default).
    """

    name: str
    n: int
    params: dict = field(default_factory=dict)
    initial: Schedule | None = None

    def __post_init__(self):
        self.params = validate_policy(self.name, self.params)
        self.code = POLICIES[self.name][0]
        self.d = self.params.get("d", 1)
        self.m = self.params.get("m", 1)
        self.delta = self.params.get("delta", 1.0)
        start = self.initial.perm if self.initial is not None else np.arange(self.n)
        if start.size != self.n:
            raise ConfigurationError("initial schedule has the wrong size")
        self.prev = np.array(start, dtype=np.int64)
        self.pipe = np.tile(self.prev, (self.m, 1))
        self.counters = np.zeros(2, dtype=np.int64)
        self._out = np.empty(self.n, dtype=np.int64)
        self._scratch = np.empty(self.n, dtype=np.int64)

    @property
    def prev_schedule(self) -> Schedule:
        return Schedule(self.prev.copy())

    @property
    def slot_counter(self) -> int:
        return int(self.counters[0])

    @property
    def pipeline(self) -> list:
        head = int(self.counters[1])
        return [Schedule(self.pipe[(head + k) % self.m].copy()) for k in range(self.m)]

    def decide(self, q, rng: np.random.Generator) -> DecisionTrace:
        q = as_queue_matrix(q)
        if q.shape[0] != self.n:
            raise ConfigurationError("queue matrix does not match the scheduler size")
        prev_weight = int(perm_weight(q, self.prev))
        recomputed = choose(
            self.code, self.d, self.m, self.delta, q, self.prev, self.pipe,
            self.counters, rng, self._out, self._scratch,
        )
        chosen = Schedule(self._out.copy())
        w = int(perm_weight(q, self._out))
        mw = int(max_weight_value(q))
        return DecisionTrace(
            chosen=chosen,
            chosen_weight=w,
            maxweight_weight=mw,
            is_maxweight=w == mw,
            prev_weight=prev_weight,
            recomputed=bool(recomputed),
            candidates_considered=_candidates(self.name, self.params),
        )

    def __call__(self, q, rng: np.random.Generator) -> Schedule:
        return self.decide(q, rng).chosen


def make_scheduler(name: str, n: int, **params) -> SchedulerState:
    return SchedulerState(name, n, params)


def pc_delta(d: int, n: int) -> float:
    """Per-slot MaxWeight probability credited to pick-and-compare."""
    return d / factorial(n)
