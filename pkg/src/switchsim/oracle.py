"""Brute-force reference computations.

Nothing here calls into the jitted code paths it is used to certify: matching
is checked by enumeration, the cone projection by an active-set search with
dense least squares, and expected weights by enumerating every random choice.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MAX_BRUTE_N = 8
MAX_ACTIVE_SET_N = 3


@dataclass(frozen=True)
class BirthDeathSolution:
    lam: float
    mu: float
    q_max: int
    pi: np.ndarray
    mean: float

    def detailed_balance_residual(self) -> float:
        up = self.lam * (1 - self.mu)
        down = self.mu * (1 - self.lam)
        return float(np.max(np.abs(self.pi[:-1] * up - self.pi[1:] * down), initial=0.0))


def _stationary(lam, mu, q_max):
    """Stationary law of ``q' = [q + a - s]^+`` on ``{0..q_max}`` by a dense solve."""
    up = lam * (1 - mu)
    down = mu * (1 - lam)
    size = q_max + 1
    P = np.zeros((size, size))
    for k in range(size):
        if k + 1 < size:
            P[k, k + 1] = up
        if k > 0:
            P[k, k - 1] = down
        P[k, k] = 1.0 - P[k].sum()
    A = P.T - np.eye(size)
    A[-1, :] = 1.0
    b = np.zeros(size)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def exact_single_queue_mean(lam: float, mu: float, q_max: int = 64) -> BirthDeathSolution:
    """Mean of the single Bernoulli-arrival, Bernoulli-service discrete queue."""
    if not 0.0 <= lam < mu <= 1.0:
        raise ValueError(f"need 0 <= lam < mu <= 1 for stability, got lam={lam}, mu={mu}")
    if lam == 0.0:
        pi = np.zeros(q_max + 1)
        pi[0] = 1.0
        return BirthDeathSolution(lam, mu, q_max, pi, 0.0)
    while True:
        pi = _stationary(lam, mu, q_max)
        if pi[-1] < 1e-10:
            break
        q_max *= 2
    mean = float(np.dot(np.arange(q_max + 1), pi))
    return BirthDeathSolution(lam, mu, q_max, pi, mean)


def _all_perms(n):
    return list(itertools.permutations(range(n)))


def _w(q, perm):
    return sum(int(q[i][perm[i]]) for i in range(len(perm)))


def brute_force_matching(q):
    """``(weight, perm)`` for the lexicographically smallest maximizer."""
    q = np.asarray(q)
    n = q.shape[0]
    if n > MAX_BRUTE_N:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_N}")
    best, arg = None, None
    for perm in _all_perms(n):  # itertools yields lexicographic order
        w = _w(q, perm)
        if best is None or w > best:
            best, arg = w, perm
    return best, np.array(arg, dtype=np.int64)


def _expected_power_of_d(q, d, n):
    perms = _all_perms(n)
    if n > 4 or d > 3:
        raise ValueError("power-of-d enumeration limited to n <= 4 and d <= 3")
    weights = [_w(q, p) for p in perms]
    total = 0
    for combo in itertools.product(weights, repeat=d):
        total += max(combo)
    return Fraction(total, len(perms) ** d)


def _expected_random_1_flip(q, n):
    if n > 5:
        raise ValueError("random 1-flip enumeration limited to n <= 5")
    perms = _all_perms(n)
    pairs = list(itertools.combinations(range(n), 2))
    total = 0
    for perm in perms:
        base = _w(q, perm)
        for i, k in pairs:
            j, l = perm[i], perm[k]
            flipped = base - int(q[i][j]) - int(q[k][l]) + int(q[i][l]) + int(q[k][j])
            total += max(base, flipped)
    return Fraction(total, len(perms) * len(pairs))


def exact_expected_weight(q, policy: str, d: int = 2) -> Fraction:
    """Exact ``E[<q, s>]`` for ``power_of_d`` (with replacement) or ``random_1_flip``."""
    q = np.asarray(q)
    n = q.shape[0]
    if policy == "power_of_d":
        return _expected_power_of_d(q, d, n)
    if policy == "random_1_flip":
        return _expected_random_1_flip(q, n)
    raise ValueError(f"unknown policy {policy!r}")


def _subspace_basis(n):
    B = np.zeros((n * n, 2 * n))
    for i in range(n):
        for j in range(n):
            B[i * n + j, i] = 1.0
            B[i * n + j, n + j] = 1.0
    return B


def _null_space(A, rtol=1e-12):
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    _, s, vt = np.linalg.svd(A)
    rank = int((s > rtol * max(A.shape) * (s[0] if s.size else 0.0)).sum())
    return vt[rank:].T


def active_set_projection(x, feas_tol: float = 1e-10):
    """Projection onto the cone by enumerating the set of zero entries.

    For every zero pattern Z, project onto the linear space S ∩ {y_Z = 0}; the
    true projection is one of these candidates, and every nonnegative
    candidate lies in the cone, so the closest feasible candidate is exact.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n > MAX_ACTIVE_SET_N:
        raise ValueError(f"active-set enumeration limited to n <= {MAX_ACTIVE_SET_N}")
    B = _subspace_basis(n)
    flat = x.ravel()
    best, best_dist = None, np.inf
    for mask in range(1 << (n * n)):
        zeros = [k for k in range(n * n) if mask >> k & 1]
        # orthonormal basis of S ∩ {y_Z = 0}; B has O(1) entries so an
        # absolute singular-value cutoff is safe
        N = _null_space(B[zeros])
        U, s, _ = np.linalg.svd(B @ N, full_matrices=False)
        U = U[:, s > 1e-9]
        y = U @ (U.T @ flat)
        if y.min() < -feas_tol * max(1.0, np.abs(flat).max()):
            continue
        dist = np.linalg.norm(flat - y)
        if dist < best_dist - 1e-14:
            best, best_dist = y, dist
    return best.reshape(n, n)
