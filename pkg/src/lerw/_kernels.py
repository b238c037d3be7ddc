"""Compiled inner loops shared by the walk, erasure and estimator modules.

Paths are ``(n, d)`` int64 arrays. Lattice points are deduplicated with an
open-addressing hash table, then grouped into per-point occurrence lists
(CSR layout, indices ascending), so "last visit of ``path[t]`` inside
``[t, limit]``" is a galloping search in the occurrence list of ``path[t]``.
"""

import numpy as np
from numba import njit

_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True)
def steps_to_path(raw, dim):
    """Map raw 64-bit draws to unit steps and accumulate them into a path.

    Draw ``u`` selects direction ``((u >> 11) * 2d) >> 53``: the top 53 bits
    scaled onto ``[0, 2d)``. Even directions are +e_k, odd are -e_k.
    """
    n = raw.shape[0]
    m = np.uint64(2 * dim)
    out = np.zeros((n + 1, dim), dtype=np.int64)
    for i in range(n):
        k = np.int64(((raw[i] >> np.uint64(11)) * m) >> np.uint64(53))
        for c in range(dim):
            out[i + 1, c] = out[i, c]
        axis = k >> 1
        if k & 1:
            out[i + 1, axis] -= 1
        else:
            out[i + 1, axis] += 1
    return out


@njit(cache=True)
def _row_hash(points, i):
    h = _GOLDEN
    for c in range(points.shape[1]):
        h = (h ^ np.uint64(points[i, c])) * _GOLDEN
        h ^= h >> np.uint64(30)
        h *= _MIX1
        h ^= h >> np.uint64(27)
        h *= _MIX2
        h ^= h >> np.uint64(31)
    return h


@njit(cache=True)
def _rows_equal(points, i, j):
    for c in range(points.shape[1]):
        if points[i, c] != points[j, c]:
            return False
    return True


@njit(cache=True)
def group_ids(points):
    """Label each row with a dense id shared by all rows holding the same point.

    Ids are assigned in order of first appearance. Returns ``(ids, n_groups)``.
    """
    n = points.shape[0]
    cap = 16
    while cap < 2 * n:
        cap *= 2
    mask = np.uint64(cap - 1)
    table = np.full(cap, -1, dtype=np.int64)
    slot_gid = np.empty(cap, dtype=np.int64)
    ids = np.empty(n, dtype=np.int64)
    ng = 0
    for i in range(n):
        slot = np.int64(_row_hash(points, i) & mask)
        while True:
            r = table[slot]
            if r == -1:
                table[slot] = i
                slot_gid[slot] = ng
                ids[i] = ng
                ng += 1
                break
            if _rows_equal(points, r, i):
                ids[i] = slot_gid[slot]
                break
            slot = (slot + 1) & (cap - 1)
    return ids, ng


@njit(cache=True)
def occurrence_lists(ids, n_groups):
    """CSR occurrence lists: ``occ[start[g]:start[g+1]]`` are the indices of group g.

    Also returns ``pos`` with ``occ[pos[i]] == i``.
    """
    n = ids.shape[0]
    start = np.zeros(n_groups + 1, dtype=np.int64)
    for i in range(n):
        start[ids[i] + 1] += 1
    for g in range(n_groups):
        start[g + 1] += start[g]
    fill = start[:-1].copy()
    occ = np.empty(n, dtype=np.int64)
    pos = np.empty(n, dtype=np.int64)
    for i in range(n):
        g = ids[i]
        occ[fill[g]] = i
        pos[i] = fill[g]
        fill[g] += 1
    return occ, start, pos


@njit(cache=True)
def _last_within(occ, end, p, limit):
    # occ[p] <= limit is known; gallop forward, then bisect
    lo = p
    step = 1
    hi = lo + 1
    while hi < end and occ[hi] <= limit:
        lo = hi
        step *= 2
        hi = lo + step
    if hi > end:
        hi = end
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if occ[mid] <= limit:
            lo = mid
        else:
            hi = mid
    return occ[lo]


@njit(cache=True)
def windowed_sigma(points, window):
    """Jump times of the windowed erasure via occurrence lists, O(n log n) worst case.

    The pivot starts at 0 and afterwards is ``sigma[i-1] + 1``; each jump time is
    the last index in ``[pivot, min(pivot + window, last)]`` holding the pivot's point.
    """
    n = points.shape[0]
    last = n - 1
    ids, ng = group_ids(points)
    occ, start, pos = occurrence_lists(ids, ng)
    sigma = np.empty(n, dtype=np.int64)
    m = 0
    t = 0
    while t <= last:
        limit = t + window
        if limit > last:
            limit = last
        s = _last_within(occ, start[ids[t] + 1], pos[t], limit)
        sigma[m] = s
        m += 1
        t = s + 1
    return sigma[:m].copy()


@njit(cache=True)
def windowed_sigma_naive(points, window):
    """Literal linear scan of every window, O(n * W). Reference implementation."""
    n = points.shape[0]
    last = n - 1
    sigma = np.empty(n, dtype=np.int64)
    m = 0
    t = 0
    while t <= last:
        hi = t + window
        if hi > last:
            hi = last
        s = t
        for j in range(hi, t, -1):
            if _rows_equal(points, j, t):
                s = j
                break
        sigma[m] = s
        m += 1
        t = s + 1
    return sigma[:m].copy()


@njit(cache=True)
def loop_free(points, window):
    """Mask of indices covered by no loop ``[i, j]`` with ``0 < j - i <= window``."""
    n = points.shape[0]
    last = n - 1
    ids, ng = group_ids(points)
    occ, start, pos = occurrence_lists(ids, ng)
    mask = np.empty(n, dtype=np.bool_)
    reach = -1
    for i in range(n):
        limit = i + window
        if limit > last:
            limit = last
        far = _last_within(occ, start[ids[i] + 1], pos[i], limit)
        if far > i and far > reach:
            reach = far
        mask[i] = reach < i
    return mask


@njit(cache=True)
def _insert(table, points, i):
    mask = table.shape[0] - 1
    slot = np.int64(_row_hash(points, i) & np.uint64(mask))
    while table[slot] != -1:
        if _rows_equal(points, table[slot], i):
            return
        slot = (slot + 1) & mask
    table[slot] = i


@njit(cache=True)
def _contains(table, points, other, i):
    # is other[i] among the rows of points stored in table
    mask = table.shape[0] - 1
    slot = np.int64(_row_hash(other, i) & np.uint64(mask))
    while table[slot] != -1:
        r = table[slot]
        same = True
        for c in range(points.shape[1]):
            if points[r, c] != other[i, c]:
                same = False
                break
        if same:
            return True
        slot = (slot + 1) & mask
    return False


@njit(cache=True)
def first_intersection(walk_a, walk_b):
    """Smallest m with ``walk_a[1:m+1]`` meeting ``walk_b[0:m+1]``; -1 if never.

    Both walks grow one step at a time, so the scan stops at the first meeting.
    """
    n = walk_a.shape[0]
    cap = 16
    while cap < 2 * n:
        cap *= 2
    seen_a = np.full(cap, -1, dtype=np.int64)
    seen_b = np.full(cap, -1, dtype=np.int64)
    _insert(seen_b, walk_b, 0)
    for m in range(1, n):
        _insert(seen_a, walk_a, m)
        _insert(seen_b, walk_b, m)
        if _contains(seen_b, walk_b, walk_a, m) or _contains(seen_a, walk_a, walk_b, m):
            return m
    return -1
