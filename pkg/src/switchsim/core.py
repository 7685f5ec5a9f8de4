"""Switch state and the one-slot queue update.

Queue matrices are plain ``int64`` numpy arrays of shape ``(n, n)``.  A
schedule is stored as a permutation ``perm`` where ``perm[i] = j`` means
input ``i`` is connected to output ``j``; the 0/1 matrix is derived on
demand.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


class ConfigurationError(ValueError):
    """Inputs with inconsistent shapes or out-of-range parameters."""


# entries above this abort the run instead of wrapping around
QUEUE_LIMIT = 2**62


def as_queue_matrix(q) -> np.ndarray:
    q = np.asarray(q)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ConfigurationError(f"queue matrix must be square, got shape {q.shape}")
    if q.shape[0] < 2:
        raise ConfigurationError("a switch needs n >= 2 ports")
    if np.issubdtype(q.dtype, np.floating):
        if not np.all(q == np.round(q)):
            raise ConfigurationError("queue lengths must be integers")
    q = q.astype(np.int64)
    if (q < 0).any():
        raise ConfigurationError("queue lengths must be nonnegative")
    return q


@dataclass(frozen=True, eq=False)
class Schedule:
    """A perfect matching between inputs and outputs."""

    perm: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ConfigurationError(f"not a permutation: {self.perm!r}")
        perm.setflags(write=False)
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, n: int) -> "Schedule":
        return cls(np.arange(n))

    @classmethod
    def anti_diagonal(cls, n: int) -> "Schedule":
        return cls(np.arange(n)[::-1].copy())

    @classmethod
    def from_matrix(cls, s) -> "Schedule":
        s = np.asarray(s)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ConfigurationError("schedule matrix must be square")
        if not (np.isin(s, (0, 1)).all() and (s.sum(0) == 1).all() and (s.sum(1) == 1).all()):
            raise ConfigurationError("schedule matrix must be a permutation matrix")
        return cls(np.argmax(s, axis=1))

    @property
    def n(self) -> int:
        return self.perm.size

    def matrix(self) -> np.ndarray:
        s = np.zeros((self.n, self.n), dtype=np.int64)
        s[np.arange(self.n), self.perm] = 1
        return s

    def __eq__(self, other):
        if not isinstance(other, Schedule):
            return NotImplemented
        return np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())

    def __repr__(self):
        return f"Schedule({self.perm.tolist()})"


@dataclass(frozen=True, eq=False)
class SlotOutcome:
    arrivals: np.ndarray
    served: Schedule
    unused: np.ndarray
    next_q: np.ndarray


@njit(nogil=True, cache=True)
def perm_weight(q, perm):
    w = 0
    for i in range(perm.size):
        w += q[i, perm[i]]
    return w


@njit(nogil=True, cache=True)
def step_inplace(q, a, perm, unused):
    """Apply one slot to ``q`` in place and fill ``unused``.

    Returns 1 if the inner product of the new queue with the unused
    service is nonzero (never happens unless the update is broken).
    """
    n = q.shape[0]
    for i in range(n):
        for j in range(n):
            unused[i, j] = 0
            q[i, j] += a[i, j]
    bad = 0
    for i in range(n):
        j = perm[i]
        if q[i, j] > 0:
            q[i, j] -= 1
        else:
            unused[i, j] = 1
        if q[i, j] * unused[i, j] != 0:
            bad = 1
    return bad


def _check_dims(q, a, s):
    n = q.shape[0]
    if a.shape != q.shape or s.n != n:
        raise ConfigurationError(
            f"dimension mismatch: q {q.shape}, a {a.shape}, schedule of size {s.n}"
        )


def step(q, a, s: Schedule) -> SlotOutcome:
    """Advance the switch by one slot: ``next_q = [q + a - s]^+``."""
    q = as_queue_matrix(q)
    a = np.asarray(a, dtype=np.int64)
    _check_dims(q, a, s)
    if (a < 0).any():
        raise ConfigurationError("arrivals must be nonnegative")
    nxt = q.copy()
    unused = np.zeros_like(q)
    step_inplace(nxt, a, s.perm, unused)
    if nxt.max(initial=0) > QUEUE_LIMIT:
        raise OverflowError("queue length exceeded the int64 safety limit")
    return SlotOutcome(arrivals=a, served=s, unused=unused, next_q=nxt)


def weight(q, s: Schedule) -> int:
    """Sum of the queue lengths served by ``s``."""
    q = as_queue_matrix(q)
    if s.n != q.shape[0]:
        raise ConfigurationError(f"dimension mismatch: q {q.shape}, schedule of size {s.n}")
    return int(perm_weight(q, s.perm))
