"""Compiled inner loops for tree induction and routing.

Trees are stored flat: node ``k`` is a split when ``feature[k] >= 0`` and a
leaf otherwise. Children indices point into the same arrays.

Induction works on a presorted layout: ``order[f, lo:hi]`` lists the rows of
the current node sorted by feature ``f`` (ties by row index), and a node split
stable-partitions every row of ``order`` so no sorting happens below the root.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Candidate splits whose children SSE lies within this fraction of the parent
# SSE of the minimum are treated as tied.
TIE_RTOL = 1e-9


@njit(cache=True, nogil=True)
def reciprocals(n):
    inv = np.empty(n + 1)
    inv[0] = 0.0
    for k in range(1, n + 1):
        inv[k] = 1.0 / k
    return inv


@njit(cache=True, nogil=True)
def split_search(X, y, order, lo, hi, features, sse, thr, yc, inv):
    """Best ``(feature, threshold, reduction)`` for the node ``order[:, lo:hi]``.

    ``features`` must be sorted ascending. ``sse``/``thr`` are scratch of
    shape ``(>= len(features), >= hi - lo - 1)``; ``yc`` is scratch indexed by
    row; ``inv[k] == 1 / k``. Returns feature ``-1`` when no split reduces the
    SSE.
    """
    n = hi - lo
    nf = features.shape[0]
    if n < 2 or nf == 0:
        return -1, 0.0, 0.0

    rows = order[0, lo:hi]
    mean = 0.0
    for i in range(n):
        mean += y[rows[i]]
    mean /= n
    parent = 0.0
    tot = 0.0
    for i in range(n):
        r = rows[i]
        yc[r] = y[r] - mean
        parent += yc[r] * yc[r]
        tot += yc[r]
    if parent <= 0.0:
        return -1, 0.0, 0.0
    tol = TIE_RTOL * parent

    # sse[j, i]: children SSE when the first i+1 sorted rows go left; inf marks
    # positions with no threshold between distinct values.
    best = np.inf
    for j in range(nf):
        f = features[j]
        srt = order[f, lo:hi]
        ls = 0.0
        lq = 0.0
        for i in range(n - 1):
            v = yc[srt[i]]
            ls += v
            lq += v * v
            a = X[srt[i], f]
            b = X[srt[i + 1], f]
            if not a < b:
                sse[j, i] = np.inf
                continue
            rs = tot - ls
            rq = parent - lq
            s = (lq - ls * ls * inv[i + 1]) + (rq - rs * rs * inv[n - i - 1])
            if s < 0.0:
                s = 0.0
            t = 0.5 * (a + b)
            if t >= b:
                t = a
            sse[j, i] = s
            thr[j, i] = t
            if s < best:
                best = s

    if not best < parent - tol:
        return -1, 0.0, 0.0

    # lowest feature index first; within a feature thresholds ascend with i
    for j in range(nf):
        for i in range(n - 1):
            if sse[j, i] <= best + tol:
                return features[j], thr[j, i], parent - sse[j, i]
    return -1, 0.0, 0.0


@njit(cache=True, nogil=True)
def grow_tree(X, y, order, mtry, min_node_size, keys):
    """Induce one tree.

    ``order`` is the presorted layout for the whole sample (modified in
    place); ``keys`` holds one row of uniforms per split attempt, consumed by
    a partial Fisher-Yates shuffle to draw ``mtry`` distinct features.
    """
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1
    n_nodes = 1
    attempt = 0

    all_features = np.arange(p)
    pool = np.empty(p, dtype=np.int64)
    fbuf = np.empty(p, dtype=np.int64)
    sse = np.empty((p, max(n - 1, 1)))
    thr = np.empty_like(sse)
    yc = np.empty(n)
    inv = reciprocals(n)
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo

        rows = order[0, lo:hi]
        s = 0.0
        ymin = y[rows[0]]
        ymax = ymin
        for i in range(m):
            v = y[rows[i]]
            s += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        mean = s / m
        if mean < ymin:
            mean = ymin
        if mean > ymax:
            mean = ymax
        if ymin == ymax:
            mean = ymin
        value[node] = mean
        count[node] = m

        if m < 2 * min_node_size or ymin == ymax:
            continue

        if mtry >= p:
            feats = all_features
        else:
            # partial Fisher-Yates over a fresh 0..p-1, then ascending order
            for i in range(p):
                pool[i] = i
            for i in range(mtry):
                j = i + int(keys[attempt, i] * (p - i))
                if j >= p:
                    j = p - 1
                tmp = pool[i]
                pool[i] = pool[j]
                pool[j] = tmp
            # insertion sort of the tiny draw; np.sort allocates per node
            for i in range(mtry):
                v = pool[i]
                j = i - 1
                while j >= 0 and fbuf[j] > v:
                    fbuf[j + 1] = fbuf[j]
                    j -= 1
                fbuf[j + 1] = v
            feats = fbuf[:mtry]
        attempt += 1

        f, t, red = split_search(X, y, order, lo, hi, feats, sse, thr, yc, inv)
        if f < 0:
            continue

        nleft = 0
        for i in range(lo, hi):
            r = order[0, i]
            gl = X[r, f] <= t
            goes_left[r] = gl
            nleft += gl
        mid = lo + nleft
        # leaves only read order[0]; skip the rest when neither child can split
        n_lists = p if max(nleft, m - nleft) >= 2 * min_node_size else 1
        for g in range(n_lists):
            # branchless: write every row to both sides, advance one cursor
            kl = lo
            kr = 0
            for i in range(lo, hi):
                r = order[g, i]
                gl = goes_left[r]
                order[g, kl] = r
                buf[kr] = r
                kl += gl
                kr += 1 - gl
            for i in range(kr):
                order[g, mid + i] = buf[i]

        feature[node] = f
        threshold[node] = t
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # right pushed first so the left subtree is expanded first
        stack_node[top] = rnode
        stack_lo[top] = mid
        stack_hi[top] = hi
        top += 1
        stack_node[top] = lnode
        stack_lo[top] = lo
        stack_hi[top] = mid
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        count[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def dense_ranks(X):
    """Per-column dense ranks (0-based, ties share a rank) and rank counts."""
    n, p = X.shape
    ranks = np.empty((n, p), dtype=np.int64)
    n_ranks = np.empty(p, dtype=np.int64)
    for f in range(p):
        srt = np.argsort(X[:, f], kind="mergesort")
        k = 0
        for i in range(n):
            if i > 0 and X[srt[i], f] != X[srt[i - 1], f]:
                k += 1
            ranks[srt[i], f] = k
        n_ranks[f] = k + 1
    return ranks, n_ranks


@njit(cache=True, nogil=True)
def presort_rows(ranks, n_ranks, idx):
    """Layout for the resample ``idx``: rows ordered by rank, ties by row.

    Equals a stable argsort of each column of the resampled matrix.
    """
    n = idx.shape[0]
    p = ranks.shape[1]
    order = np.empty((p, n), dtype=np.int64)
    for f in range(p):
        start = np.zeros(n_ranks[f] + 1, dtype=np.int64)
        for r in range(n):
            start[ranks[idx[r], f] + 1] += 1
        for k in range(n_ranks[f]):
            start[k + 1] += start[k]
        for r in range(n):
            k = ranks[idx[r], f]
            order[f, start[k]] = r
            start[k] += 1
    return order


@njit(cache=True, nogil=True)
def grow_resampled(X, y, ranks, n_ranks, idx, mtry, min_node_size, keys):
    """``grow_tree`` on the rows ``idx`` of ``(X, y)``."""
    n, p = X.shape
    m = idx.shape[0]
    Xb = np.empty((m, p))
    yb = np.empty(m)
    for r in range(m):
        yb[r] = y[idx[r]]
        for f in range(p):
            Xb[r, f] = X[idx[r], f]
    order = presort_rows(ranks, n_ranks, idx)
    return grow_tree(Xb, yb, order, mtry, min_node_size, keys)


@njit(cache=True, nogil=True)
def route(feature, threshold, left, right, value, x):
    k = 0
    while feature[k] >= 0:
        if x[feature[k]] <= threshold[k]:
            k = left[k]
        else:
            k = right[k]
    return value[k]


@njit(cache=True, nogil=True)
def route_many(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = route(feature, threshold, left, right, value, X[i])
    return out
