# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels (neighbor search + FPS).

Must stay bit-compatible with pointmeta._core_py: distances are doubles
accumulated as dx*dx + dy*dy + dz*dz (the extension is built with
-ffp-contract=off so the compiler cannot fuse these into FMAs).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor
from libc.stdlib cimport free, malloc

cnp.import_array()

COMPILED = True


cdef inline double _d2_3(const float[:, ::1] a, Py_ssize_t i,
                         const float[:, ::1] b, Py_ssize_t j) nogil:
    cdef double dx = <double> a[i, 0] - <double> b[j, 0]
    cdef double dy = <double> a[i, 1] - <double> b[j, 1]
    cdef double dz = <double> a[i, 2] - <double> b[j, 2]
    return dx * dx + dy * dy + dz * dz


cdef inline void _topk_insert(double* bd, long long* bi, Py_ssize_t* count,
                              Py_ssize_t k, double d2, long long j) nogil:
    # keep the k smallest (d2, index) pairs; candidates arrive with ascending
    # index inside a cell, so strict comparison preserves the index tie-break
    cdef Py_ssize_t n = count[0]
    cdef Py_ssize_t pos = n
    cdef Py_ssize_t t
    if n == k and d2 >= bd[k - 1] and not (d2 == bd[k - 1] and j < bi[k - 1]):
        return
    while pos > 0 and (bd[pos - 1] > d2 or (bd[pos - 1] == d2 and bi[pos - 1] > j)):
        pos -= 1
    if pos >= k:
        return
    t = n if n < k else k - 1
    while t > pos:
        bd[t] = bd[t - 1]
        bi[t] = bi[t - 1]
        t -= 1
    bd[pos] = d2
    bi[pos] = j
    if n < k:
        count[0] = n + 1


def brute_knn(const float[:, ::1] query, const float[:, ::1] reference, Py_ssize_t k):
    cdef Py_ssize_t m = query.shape[0]
    cdef Py_ssize_t n = reference.shape[0]
    out_arr = np.empty((m, k), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef double* bd = <double*> malloc(k * sizeof(double))
    cdef long long* bi = <long long*> malloc(k * sizeof(long long))
    cdef Py_ssize_t i, j, cnt
    cdef double d2
    if bd == NULL or bi == NULL:
        free(bd); free(bi)
        raise MemoryError()
    with nogil:
        for i in range(m):
            cnt = 0
            for j in range(n):
                d2 = _d2_3(query, i, reference, j)
                _topk_insert(bd, bi, &cnt, k, d2, j)
            for j in range(k):
                out[i, j] = bi[j]
    free(bd); free(bi)
    return out_arr


def brute_knn_generic(const float[:, ::1] query, const float[:, ::1] reference, Py_ssize_t k):
    cdef Py_ssize_t m = query.shape[0]
    cdef Py_ssize_t n = reference.shape[0]
    cdef Py_ssize_t d = query.shape[1]
    out_arr = np.empty((m, k), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef double* bd = <double*> malloc(k * sizeof(double))
    cdef long long* bi = <long long*> malloc(k * sizeof(long long))
    cdef Py_ssize_t i, j, c, cnt
    cdef double d2, diff
    if bd == NULL or bi == NULL:
        free(bd); free(bi)
        raise MemoryError()
    with nogil:
        for i in range(m):
            cnt = 0
            for j in range(n):
                d2 = 0.0
                for c in range(d):
                    diff = <double> query[i, c] - <double> reference[j, c]
                    d2 = d2 + diff * diff
                _topk_insert(bd, bi, &cnt, k, d2, j)
            for j in range(k):
                out[i, j] = bi[j]
    free(bd); free(bi)
    return out_arr


def brute_ball(const float[:, ::1] query, const float[:, ::1] reference,
               double radius, Py_ssize_t k_cap):
    cdef Py_ssize_t m = query.shape[0]
    cdef Py_ssize_t n = reference.shape[0]
    cdef double r2 = radius * radius
    idx_arr = np.zeros((m, k_cap), dtype=np.int64)
    cnt_arr = np.zeros(m, dtype=np.int64)
    cdef long long[:, ::1] idx = idx_arr
    cdef long long[::1] cnt = cnt_arr
    cdef Py_ssize_t i, j, c
    with nogil:
        for i in range(m):
            c = 0
            for j in range(n):
                if _d2_3(query, i, reference, j) <= r2:
                    idx[i, c] = j
                    c += 1
                    if c == k_cap:
                        break
            cnt[i] = c
            for j in range(c, k_cap):
                idx[i, j] = idx[i, 0]
    return idx_arr, cnt_arr


cdef inline Py_ssize_t _key_lookup(const long long[::1] cell_keys, long long key) nogil:
    # binary search; returns position or -1
    cdef Py_ssize_t lo = 0, hi = cell_keys.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if cell_keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < cell_keys.shape[0] and cell_keys[lo] == key:
        return lo
    return -1


cdef inline void _sort_ll(long long* a, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j
    cdef long long v
    for i in range(1, n):
        v = a[i]
        j = i
        while j > 0 and a[j - 1] > v:
            a[j] = a[j - 1]
            j -= 1
        a[j] = v


def grid_ball(const float[:, ::1] query, const float[:, ::1] reference,
              double radius, Py_ssize_t k_cap, double cell_size,
              const long long[::1] mins, const long long[::1] dims,
              const long long[::1] cell_keys, const long long[::1] starts,
              const long long[::1] order):
    cdef Py_ssize_t m = query.shape[0]
    cdef double r2 = radius * radius
    cdef long long reach = <long long> ceil(radius / cell_size)
    idx_arr = np.zeros((m, k_cap), dtype=np.int64)
    cnt_arr = np.zeros(m, dtype=np.int64)
    cdef long long[:, ::1] idx = idx_arr
    cdef long long[::1] cnt = cnt_arr
    cdef long long* buf = <long long*> malloc(reference.shape[0] * sizeof(long long))
    cdef Py_ssize_t i, t, pos, c
    cdef long long cx, cy, cz, qx, qy, qz, key, s, e, pid
    if buf == NULL:
        raise MemoryError()
    with nogil:
        for i in range(m):
            qx = <long long> floor(<double> query[i, 0] / cell_size)
            qy = <long long> floor(<double> query[i, 1] / cell_size)
            qz = <long long> floor(<double> query[i, 2] / cell_size)
            c = 0
            for cx in range(qx - reach, qx + reach + 1):
                if cx < mins[0] or cx >= mins[0] + dims[0]:
                    continue
                for cy in range(qy - reach, qy + reach + 1):
                    if cy < mins[1] or cy >= mins[1] + dims[1]:
                        continue
                    for cz in range(qz - reach, qz + reach + 1):
                        if cz < mins[2] or cz >= mins[2] + dims[2]:
                            continue
                        key = ((cx - mins[0]) * dims[1] + (cy - mins[1])) * dims[2] + (cz - mins[2])
                        pos = _key_lookup(cell_keys, key)
                        if pos < 0:
                            continue
                        s = starts[pos]
                        e = starts[pos + 1]
                        for t in range(s, e):
                            pid = order[t]
                            if _d2_3(query, i, reference, <Py_ssize_t> pid) <= r2:
                                buf[c] = pid
                                c += 1
            _sort_ll(buf, c)
            if c > k_cap:
                c = k_cap
            cnt[i] = c
            for t in range(c):
                idx[i, t] = buf[t]
            for t in range(c, k_cap):
                idx[i, t] = idx[i, 0]
    free(buf)
    return idx_arr, cnt_arr


def grid_knn(const float[:, ::1] query, const float[:, ::1] reference, Py_ssize_t k,
             double cell_size, const long long[::1] mins, const long long[::1] dims,
             const long long[::1] cell_keys, const long long[::1] starts,
             const long long[::1] order):
    cdef Py_ssize_t m = query.shape[0]
    out_arr = np.empty((m, k), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef double* bd = <double*> malloc(k * sizeof(double))
    cdef long long* bi = <long long*> malloc(k * sizeof(long long))
    cdef Py_ssize_t i, t, pos, cnt
    cdef long long qx, qy, qz, cx, cy, cz, key, s, e, pid, rad
    cdef long long maxx = mins[0] + dims[0] - 1
    cdef long long maxy = mins[1] + dims[1] - 1
    cdef long long maxz = mins[2] + dims[2] - 1
    cdef double bound, d2
    cdef bint covered, on_shell
    if bd == NULL or bi == NULL:
        free(bd); free(bi)
        raise MemoryError()
    with nogil:
        for i in range(m):
            qx = <long long> floor(<double> query[i, 0] / cell_size)
            qy = <long long> floor(<double> query[i, 1] / cell_size)
            qz = <long long> floor(<double> query[i, 2] / cell_size)
            cnt = 0
            # shells below the Chebyshev gap to the occupied box are empty
            rad = 0
            if mins[0] - qx > rad: rad = mins[0] - qx
            if qx - maxx > rad: rad = qx - maxx
            if mins[1] - qy > rad: rad = mins[1] - qy
            if qy - maxy > rad: rad = qy - maxy
            if mins[2] - qz > rad: rad = mins[2] - qz
            if qz - maxz > rad: rad = qz - maxz
            while True:
                # visit the Chebyshev shell at distance rad
                for cx in range(qx - rad, qx + rad + 1):
                    if cx < mins[0] or cx > maxx:
                        continue
                    for cy in range(qy - rad, qy + rad + 1):
                        if cy < mins[1] or cy > maxy:
                            continue
                        for cz in range(qz - rad, qz + rad + 1):
                            if cz < mins[2] or cz > maxz:
                                continue
                            on_shell = (cx == qx - rad or cx == qx + rad or
                                        cy == qy - rad or cy == qy + rad or
                                        cz == qz - rad or cz == qz + rad)
                            if not on_shell:
                                continue
                            key = ((cx - mins[0]) * dims[1] + (cy - mins[1])) * dims[2] + (cz - mins[2])
                            pos = _key_lookup(cell_keys, key)
                            if pos < 0:
                                continue
                            s = starts[pos]
                            e = starts[pos + 1]
                            for t in range(s, e):
                                pid = order[t]
                                d2 = _d2_3(query, i, reference, <Py_ssize_t> pid)
                                _topk_insert(bd, bi, &cnt, k, d2, pid)
                covered = (qx - rad <= mins[0] and qx + rad >= maxx and
                           qy - rad <= mins[1] and qy + rad >= maxy and
                           qz - rad <= mins[2] and qz + rad >= maxz)
                bound = rad * cell_size
                if cnt >= k and (covered or bd[k - 1] < bound * bound):
                    break
                rad += 1
            for t in range(k):
                out[i, t] = bi[t]
    free(bd); free(bi)
    return out_arr


def fps(const float[:, ::1] positions, Py_ssize_t m, Py_ssize_t start):
    cdef Py_ssize_t n = positions.shape[0]
    sel_arr = np.empty(m, dtype=np.int64)
    cdef long long[::1] sel = sel_arr
    cdef double* best = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t i, j, cur, nxt
    cdef double d2, top
    if best == NULL:
        raise MemoryError()
    with nogil:
        sel[0] = start
        for j in range(n):
            best[j] = _d2_3(positions, j, positions, start)
        for i in range(1, m):
            nxt = 0
            top = best[0]
            for j in range(1, n):
                if best[j] > top:  # strict: ties keep the smaller index
                    top = best[j]
                    nxt = j
            sel[i] = nxt
            for j in range(n):
                d2 = _d2_3(positions, j, positions, nxt)
                if d2 < best[j]:
                    best[j] = d2
    free(best)
    return sel_arr
