"""Exact maximum-weight perfect matching on the complete bipartite graph.

Shortest-augmenting-path Hungarian method in O(n^3) on integer weights.  The
dual potentials stay integral, so the tight-edge subgraph is exact; every
optimal assignment lives on it, which is what the lexicographic
canonicalization relies on.
"""
import numpy as np
from numba import njit

_INF = np.int64(2**62)


@njit(nogil=True, cache=True)
def hungarian_max(w, perm, u, v):
    """Fill ``perm`` with a maximum-weight assignment of ``w`` (int64, n x n).

    ``u`` and ``v`` receive dual potentials for the cost ``c = wmax - w``:
    ``u[i] + v[j] <= c[i, j]`` with equality on ``perm``.  Returns the weight.
    """
    n = w.shape[0]
    wmax = w[0, 0]
    for i in range(n):
        for j in range(n):
            if w[i, j] > wmax:
                wmax = w[i, j]
    # 1-based arrays, column 0 is the virtual root
    uu = np.zeros(n + 1, dtype=np.int64)
    vv = np.zeros(n + 1, dtype=np.int64)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1, dtype=np.int64)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = _INF
            used[j] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = _INF
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = (wmax - w[i0 - 1, j - 1]) - uu[i0] - vv[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    uu[p[j]] += delta
                    vv[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    total = 0
    for j in range(1, n + 1):
        perm[p[j] - 1] = j - 1
    for i in range(n):
        u[i] = uu[i + 1]
        v[i] = vv[i + 1]
        total += w[i, perm[i]]
    return total


@njit(nogil=True, cache=True)
def max_weight_value(w):
    n = w.shape[0]
    perm = np.empty(n, dtype=np.int64)
    u = np.empty(n, dtype=np.int64)
    v = np.empty(n, dtype=np.int64)
    return hungarian_max(w, perm, u, v)


@njit(nogil=True, cache=True)
def _canonicalize(w, perm, u, v):
    """Rewrite ``perm`` into the lexicographically smallest optimal assignment.

    Row by row, take the smallest tight column that still leaves a perfect
    matching on the remaining tight subgraph; rerouting uses one BFS for an
    alternating path, so each row costs O(n^3) in the worst case.
    """
    n = w.shape[0]
    wmax = w[0, 0]
    for i in range(n):
        for j in range(n):
            if w[i, j] > wmax:
                wmax = w[i, j]
    tight = np.empty((n, n), dtype=np.bool_)
    for i in range(n):
        for j in range(n):
            tight[i, j] = u[i] + v[j] == wmax - w[i, j]
    col_of = perm
    row_of = np.empty(n, dtype=np.int64)
    for i in range(n):
        row_of[col_of[i]] = i
    fixed_col = np.zeros(n, dtype=np.bool_)
    seen = np.empty(n, dtype=np.bool_)
    parent = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if fixed_col[j] or not tight[i, j]:
                continue
            if col_of[i] == j:
                break
            # give j to i; the row holding j must reach i's old column
            r = row_of[j]
            f = col_of[i]
            for c in range(n):
                seen[c] = False
            head = 0
            tail = 1
            queue[0] = r
            found = False
            while head < tail and not found:
                x = queue[head]
                head += 1
                for c in range(n):
                    if seen[c] or fixed_col[c] or c == j or not tight[x, c]:
                        continue
                    seen[c] = True
                    parent[c] = x
                    if c == f:
                        found = True
                        break
                    queue[tail] = row_of[c]
                    tail += 1
            if not found:
                continue
            c = f
            while True:
                x = parent[c]
                old = col_of[x]
                col_of[x] = c
                row_of[c] = x
                if x == r:
                    break
                c = old
            col_of[i] = j
            row_of[j] = i
            break
        fixed_col[col_of[i]] = True


@njit(nogil=True, cache=True)
def max_weight_perm(w, perm):
    """Lexicographically smallest maximum-weight permutation; returns its weight."""
    n = w.shape[0]
    u = np.empty(n, dtype=np.int64)
    v = np.empty(n, dtype=np.int64)
    total = hungarian_max(w, perm, u, v)
    _canonicalize(w, perm, u, v)
    return total
