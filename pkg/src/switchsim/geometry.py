"""Projections onto the subspace S and the cone K = S ∩ R_+^{n x n}.

S is spanned by the row-indicator and column-indicator matrices, so its
projection is the row mean plus column mean minus grand mean.  The cone has
no closed form; it is computed with Dykstra's alternating projections between
S and the nonnegative orthant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

DYKSTRA_TOL = 1e-9
DYKSTRA_MAX_ITER = 100_000


class ProjectionError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class Decomposition:
    parallel: np.ndarray
    perp: np.ndarray

    @property
    def norm_parallel(self) -> float:
        return float(np.linalg.norm(self.parallel))

    @property
    def norm_perp(self) -> float:
        return float(np.linalg.norm(self.perp))


@njit(nogil=True, cache=True)
def subspace_into(x, out):
    n = x.shape[0]
    rows = np.zeros(n)
    cols = np.zeros(n)
    total = 0.0
    for i in range(n):
        for j in range(n):
            rows[i] += x[i, j]
            cols[j] += x[i, j]
            total += x[i, j]
    for i in range(n):
        for j in range(n):
            out[i, j] = rows[i] / n + cols[j] / n - total / (n * n)


@njit(nogil=True, cache=True)
def dykstra_into(x, out, tol, max_iter):
    """Projection of ``x`` onto K written to ``out``.

    Returns ``(iterations, residual)``; ``iterations == -1`` flags
    non-convergence.  The result is the last S-step iterate, so it lies in S
    exactly and is nonnegative up to the residual.  Stops when both the
    change between sweeps and the gap between the S-iterate and its clipped
    version are below ``tol * max(1, ||x||)``.
    """
    n = x.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += x[i, j] * x[i, j]
    scale = max(1.0, np.sqrt(scale))
    y = np.empty((n, n))
    z = x.copy()  # orthant iterate
    r = np.zeros((n, n))  # correction for the orthant
    residual = np.inf
    for it in range(max_iter):
        # projection onto a subspace is linear, so S needs no correction term
        subspace_into(z, y)
        change = 0.0
        gap = 0.0
        for i in range(n):
            for j in range(n):
                t = y[i, j] + r[i, j]
                zn = t if t > 0.0 else 0.0
                r[i, j] = t - zn
                change += (zn - z[i, j]) ** 2
                gap += (zn - y[i, j]) ** 2
                z[i, j] = zn
        residual = max(np.sqrt(change), np.sqrt(gap)) / scale
        if residual <= tol:
            out[:, :] = y
            return it + 1, residual
    out[:, :] = y
    return -1, residual


def project_subspace(x) -> Decomposition:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("expected a square matrix")
    par = np.empty_like(x)
    subspace_into(x, par)
    return Decomposition(par, x - par)


def project_cone(x, tol: float = DYKSTRA_TOL, max_iter: int = DYKSTRA_MAX_ITER) -> Decomposition:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("expected a square matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    par = np.empty_like(x)
    iters, residual = dykstra_into(x, par, tol, max_iter)
    if iters < 0:
        raise ProjectionError("cone projection did not converge", residual)
    return Decomposition(par, x - par)


@njit(nogil=True, cache=True)
def ssc_into(q, tol, max_iter, work):
    """``(||q_perp_K||, ||q_par_K||, ||q_perp_S||, converged)`` for integer ``q``."""
    n = q.shape[0]
    x = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            x[i, j] = q[i, j]
    subspace_into(x, work)
    perp_s = 0.0
    nonneg = True
    for i in range(n):
        for j in range(n):
            perp_s += (x[i, j] - work[i, j]) ** 2
            if work[i, j] < 0.0:
                nonneg = False
    # a nonnegative subspace projection already is the cone projection
    if not nonneg:
        iters, _ = dykstra_into(x, work, tol, max_iter)
        if iters < 0:
            return np.nan, np.nan, np.sqrt(perp_s), False
    perp_k = 0.0
    par_k = 0.0
    for i in range(n):
        for j in range(n):
            perp_k += (x[i, j] - work[i, j]) ** 2
            par_k += work[i, j] ** 2
    return np.sqrt(perp_k), np.sqrt(par_k), np.sqrt(perp_s), True


def ssc_metrics(q, tol: float = DYKSTRA_TOL, max_iter: int = DYKSTRA_MAX_ITER):
    """``(norm_perp_K, norm_parallel_K, norm_perp_S)`` of a queue matrix."""
    q = np.asarray(q)
    work = np.empty(q.shape)
    a, b, c, ok = ssc_into(q.astype(np.int64), tol, max_iter, work)
    if not ok:
        raise ProjectionError("cone projection did not converge", np.nan)
    return float(a), float(b), float(c)
