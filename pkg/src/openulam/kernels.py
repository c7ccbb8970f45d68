"""Hot loops, each with a numba implementation and a numpy twin.

``ulam_sweep``
    splits a branch's live domain at source-cell edges and target-cell
    preimages and returns (row, col, length) per elementary segment.
``power_iterate``
    l1-normalized power iteration with a CSR matrix, acting on rows
    (left eigenvector) or columns (right eigenvector).
``simulate_orbits``
    iterates points until they leave the survivor set.

The public functions dispatch on ``backend`` (``"numba"`` or ``"numpy"``,
default from :mod:`openulam._jit`).
"""

from __future__ import annotations

import numpy as np

from ._jit import njit, resolve
from .maps import KIND_LINEAR

# ---------------------------------------------------------------------------
# Ulam assembly sweep
# ---------------------------------------------------------------------------

# segments shorter than this fraction of the partition span are roundoff slivers
SLIVER = 1e-15


def _clip_live(live_lo, live_hi, pre):
    lo = np.maximum(live_lo, pre[0])
    hi = np.minimum(live_hi, pre[-1])
    keep = hi > lo
    return lo[keep], hi[keep]


def _sweep_numpy(edges, live_lo, live_hi, pre, cols):
    lo, hi = _clip_live(live_lo, live_hi, pre)
    if lo.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    a, b = lo[0], hi[-1]
    e0, e1 = np.searchsorted(edges, [a, b])
    q0, q1 = np.searchsorted(pre, [a, b])
    pts = np.unique(np.concatenate([lo, hi, edges[e0:e1 + 1], pre[q0:q1 + 1]]))
    pts = pts[(pts >= a) & (pts <= b)]
    u, v = pts[:-1], pts[1:]
    mid = 0.5 * (u + v)
    idx = np.searchsorted(lo, mid, side="right") - 1
    ok = (idx >= 0) & (mid < hi[np.maximum(idx, 0)])
    k = edges.size - 1
    rows = np.clip(np.searchsorted(edges, mid, side="right") - 1, 0, k - 1)
    g = np.clip(np.searchsorted(pre, mid, side="right") - 1, 0, cols.size - 1)
    return rows[ok].astype(np.int64), cols[g][ok].astype(np.int64), (v - u)[ok]


@njit
def _sweep_loops(edges, live_lo, live_hi, pre, cols):
    k = edges.size - 1
    G = cols.size
    cap = 2 * (edges.size + pre.size + 2 * live_lo.size) + 4
    rows_out = np.empty(cap, np.int64)
    cols_out = np.empty(cap, np.int64)
    len_out = np.empty(cap)
    n = 0
    for s in range(live_lo.size):
        a = max(live_lo[s], pre[0])
        b = min(live_hi[s], pre[G])
        if not b > a:
            continue
        ie = np.searchsorted(edges, a, side="right") - 1
        ig = np.searchsorted(pre, a, side="right") - 1
        x = a
        while x < b:
            if ie > k - 1:
                ie = k - 1
            if ig > G - 1:
                ig = G - 1
            nxt = b
            if ie + 1 <= k and edges[ie + 1] < nxt and edges[ie + 1] > x:
                nxt = edges[ie + 1]
            if ig + 1 <= G and pre[ig + 1] < nxt and pre[ig + 1] > x:
                nxt = pre[ig + 1]
            rows_out[n] = ie
            cols_out[n] = cols[ig]
            len_out[n] = nxt - x
            n += 1
            x = nxt
            while ie + 1 <= k and ie < k - 1 and edges[ie + 1] <= x:
                ie += 1
            while ig + 1 <= G and ig < G - 1 and pre[ig + 1] <= x:
                ig += 1
    return rows_out[:n], cols_out[:n], len_out[:n]


def ulam_sweep(edges, live_lo, live_hi, pre, cols, backend=None):
    """Elementary overlaps of live domain, source cells and target preimages.

    Parameters
    ----------
    edges : ndarray
        Source partition edges, increasing, length k + 1.
    live_lo, live_hi : ndarray
        Sorted disjoint pieces of the branch domain that lie in X_0.
    pre : ndarray
        Increasing preimages of the target-cell boundaries, length G + 1.
    cols : ndarray of int
        Target column for each of the G preimage gaps.

    Returns
    -------
    rows, cols, lengths : ndarray
        Segments shorter than ``SLIVER`` times the partition span are
        dropped, so both backends agree on the sparsity pattern.
    """
    args = (np.ascontiguousarray(edges, float), np.ascontiguousarray(live_lo, float),
            np.ascontiguousarray(live_hi, float), np.ascontiguousarray(pre, float),
            np.ascontiguousarray(cols, np.int64))
    if resolve(backend) == "numba":
        r, c, ln = _sweep_loops(*args)
    else:
        r, c, ln = _sweep_numpy(*args)
    keep = ln > SLIVER * (args[0][-1] - args[0][0])
    return r[keep], c[keep], ln[keep]


# ---------------------------------------------------------------------------
# Power iteration
# ---------------------------------------------------------------------------

HISTORY = 8


def _power_numpy(indptr, indices, data, x, tol, max_iter, left):
    import scipy.sparse as sp

    n = x.size
    P = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    op = P.T.tocsr() if left else P
    x = x / x.sum()
    hist = np.full(HISTORY, np.nan)
    rho = 0.0
    it = 0
    res = np.inf
    while it < max_iter:
        it += 1
        y = op @ x
        rho = y.sum()
        if rho <= 0.0:
            return np.zeros(n), 0.0, it, 0.0, hist
        res = np.abs(y - rho * x).sum()
        x = y / rho
        hist = np.roll(hist, -1)
        hist[-1] = res
        if res <= tol:
            break
    return x, rho, it, res, hist


@njit
def _power_loops(indptr, indices, data, x, tol, max_iter, left):
    n = x.size
    x = x / x.sum()
    y = np.zeros(n)
    hist = np.full(HISTORY, np.nan)
    rho = 0.0
    res = np.inf
    it = 0
    while it < max_iter:
        it += 1
        if left:
            y[:] = 0.0
            for i in range(n):
                xi = x[i]
                if xi != 0.0:
                    for p in range(indptr[i], indptr[i + 1]):
                        y[indices[p]] += xi * data[p]
        else:
            for i in range(n):
                acc = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    acc += data[p] * x[indices[p]]
                y[i] = acc
        rho = 0.0
        for i in range(n):
            rho += y[i]
        if rho <= 0.0:
            return np.zeros(n), 0.0, it, 0.0, hist
        res = 0.0
        for i in range(n):
            res += abs(y[i] - rho * x[i])
        for i in range(n):
            x[i] = y[i] / rho
        for h in range(HISTORY - 1):
            hist[h] = hist[h + 1]
        hist[HISTORY - 1] = res
        if res <= tol:
            break
    return x, rho, it, res, hist


def power_iterate(indptr, indices, data, x0, tol, max_iter, left, backend=None):
    """Power iteration on a non-negative CSR matrix.

    Returns ``(x, rho, iterations, last_residual, residual_history)`` where
    ``x`` is l1-normalized and the residual is ``||xP - rho x||_1`` (left)
    or ``||Px - rho x||_1`` (right) of the iterate before the last update.
    """
    args = (np.ascontiguousarray(indptr, np.int64), np.ascontiguousarray(indices, np.int64),
            np.ascontiguousarray(data, float), np.array(x0, dtype=float), float(tol),
            int(max_iter), bool(left))
    if resolve(backend) == "numba":
        return _power_loops(*args)
    return _power_numpy(*args)


# ---------------------------------------------------------------------------
# Orbit simulation
# ---------------------------------------------------------------------------


@njit
def _table_eval(table, his, x):
    nb = table.shape[0]
    i = np.searchsorted(his, x, side="left")
    if i >= nb or table[i, 0] > x:
        return np.nan
    kind = table[i, 2]
    if kind == KIND_LINEAR:
        return table[i, 3] * x + table[i, 4]
    return table[i, 3] + table[i, 4] * abs(x) ** table[i, 5]


@njit
def _in_set(lo, hi, x):
    if lo.size == 0:
        return False
    i = np.searchsorted(lo, x, side="right") - 1
    return i >= 0 and x <= hi[i]


@njit
def _orbits_loops(table, hole_lo, hole_hi, d0, d1, x0, n_max, record):
    N = x0.size
    his = table[:, 1].copy()
    tau = np.empty(N, np.int64)
    pos = np.full(N, np.nan)
    for p in range(N):
        x = x0[p]
        t = n_max + 1
        for j in range(n_max + 1):
            if j == record:
                pos[p] = x
            if not (x >= d0 and x <= d1) or _in_set(hole_lo, hole_hi, x):
                t = j
                break
            x = _table_eval(table, his, x)
        tau[p] = t
    return tau, pos


def _orbits_numpy(tmap, hole, x0, n_max, record):
    d0, d1 = tmap.domain
    N = x0.size
    tau = np.full(N, n_max + 1, dtype=np.int64)
    pos = np.full(N, np.nan)
    alive = np.arange(N)
    x = x0.copy()
    for j in range(n_max + 1):
        if j == record:
            pos[alive] = x
        dead = ~((x >= d0) & (x <= d1)) | hole.contains(x)
        tau[alive[dead]] = j
        alive = alive[~dead]
        x = x[~dead]
        if alive.size == 0:
            break
        x = tmap.evaluate_array(x)
    return tau, pos


def simulate_orbits(tmap, hole, x0, n_max, record=-1, backend=None):
    """First exit time from X_0 (capped at ``n_max + 1``) for every point.

    ``pos`` holds the iterate at step ``record`` for points that were in
    X_0 at all earlier steps, NaN otherwise.  The numba path needs a map
    made of linear/power branches; other maps fall back to numpy.
    """
    x0 = np.ascontiguousarray(x0, float)
    table = tmap.kernel_table()
    if resolve(backend) == "numba" and table is not None:
        d0, d1 = tmap.domain
        return _orbits_loops(table, np.ascontiguousarray(hole.lo), np.ascontiguousarray(hole.hi),
                             float(d0), float(d1), x0, int(n_max), int(record))
    return _orbits_numpy(tmap, hole, x0, int(n_max), int(record))
