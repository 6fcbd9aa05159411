"""Hot loops behind the envelope operators.

Every kernel comes in two flavours: ``*_nb`` (numba, explicit loops) and
``*_np`` (vectorised numpy). The public names dispatch on
``envkit._accel.NUMBA_ENABLED``. Both flavours return bit-identical arrays;
max/min of a fixed finite set does not depend on evaluation order.
"""

import numpy as np

from ._accel import NUMBA_ENABLED, njit

# Caps the temporary (rows x nnz) gather buffer of the numpy path.
_GATHER_CHUNK_ELEMS = 1 << 24


# --------------------------------------------------------------------------
# window bounds on a sorted axis
# --------------------------------------------------------------------------


@njit
def window_bounds_nb(coords, radius):
    n = coords.shape[0]
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    j = 0
    for i in range(n):
        while coords[i] - coords[j] >= radius:
            j += 1
        lo[i] = j
    k = 0
    for i in range(n):
        if k < i:
            k = i
        while k + 1 < n and coords[k + 1] - coords[i] < radius:
            k += 1
        hi[i] = k
    return lo, hi


def window_bounds_np(coords, radius):
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    idx = np.arange(n)
    # searchsorted gives a guess; the loops below settle it against the
    # exact difference test used everywhere else.
    lo = np.minimum(np.searchsorted(coords, coords - radius, side="right"), idx)
    while True:
        grow = (lo > 0) & (coords - coords[np.maximum(lo - 1, 0)] < radius)
        shrink = coords - coords[lo] >= radius
        if not (grow.any() or shrink.any()):
            break
        lo = lo - grow + shrink
    hi = np.maximum(np.searchsorted(coords, coords + radius, side="left") - 1, idx)
    while True:
        grow = (hi < n - 1) & (coords[np.minimum(hi + 1, n - 1)] - coords < radius)
        shrink = coords[hi] - coords >= radius
        if not (grow.any() or shrink.any()):
            break
        hi = hi + grow - shrink
    return lo.astype(np.int64), hi.astype(np.int64)


# --------------------------------------------------------------------------
# sliding extremum along the last axis of a 2-D array
# --------------------------------------------------------------------------


@njit
def sliding_extremum_nb(a, lo, hi, is_max):
    # Monotone wedge: q holds indices whose values are strictly decreasing
    # (max) or increasing (min); lo/hi must be nondecreasing.
    rows, n = a.shape
    out = np.empty_like(a)
    q = np.empty(n, dtype=np.int64)
    for r in range(rows):
        head = 0
        tail = 0
        nxt = 0
        for i in range(n):
            while nxt <= hi[i]:
                v = a[r, nxt]
                if is_max:
                    while tail > head and a[r, q[tail - 1]] <= v:
                        tail -= 1
                else:
                    while tail > head and a[r, q[tail - 1]] >= v:
                        tail -= 1
                q[tail] = nxt
                tail += 1
                nxt += 1
            while q[head] < lo[i]:
                head += 1
            out[r, i] = a[r, q[head]]
    return out


def sliding_extremum_np(a, lo, hi, is_max):
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[1]
    op = np.maximum if is_max else np.minimum
    out = a.copy()
    idx = np.arange(n)
    reach = int(max(np.max(hi - idx), np.max(idx - lo), 0))
    for k in range(1, reach + 1):
        right = (idx[: n - k] + k) <= hi[: n - k]
        if right.any():
            op(out[:, : n - k], a[:, k:], out=out[:, : n - k], where=right[None, :])
        left = (idx[k:] - k) >= lo[k:]
        if left.any():
            op(out[:, k:], a[:, : n - k], out=out[:, k:], where=left[None, :])
    return out


# --------------------------------------------------------------------------
# gather extremum over a CSR neighbour list
# --------------------------------------------------------------------------


@njit
def gather_extremum_nb(a, indptr, indices, is_max):
    rows, m = a.shape
    out = np.empty_like(a)
    for r in range(rows):
        for j in range(m):
            best = a[r, indices[indptr[j]]]
            for p in range(indptr[j] + 1, indptr[j + 1]):
                v = a[r, indices[p]]
                if is_max:
                    if v > best:
                        best = v
                elif v < best:
                    best = v
            out[r, j] = best
    return out


def gather_extremum_np(a, indptr, indices, is_max):
    a = np.asarray(a, dtype=np.float64)
    rows = a.shape[0]
    ufunc = np.maximum if is_max else np.minimum
    out = np.empty_like(a)
    step = max(1, _GATHER_CHUNK_ELEMS // max(1, indices.shape[0]))
    starts = indptr[:-1]
    for r0 in range(0, rows, step):
        taken = a[r0 : r0 + step][:, indices]
        out[r0 : r0 + step] = ufunc.reduceat(taken, starts, axis=1)
    return out


if NUMBA_ENABLED:
    window_bounds = window_bounds_nb
    sliding_extremum = sliding_extremum_nb
    gather_extremum = gather_extremum_nb
else:
    window_bounds = window_bounds_np
    sliding_extremum = sliding_extremum_np
    gather_extremum = gather_extremum_np
