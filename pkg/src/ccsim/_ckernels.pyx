# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in _pykernels (same signatures and results)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def lambda_scan(mu, double rho, double t, bint cyclic):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pre = np.zeros(2 * n + 1)
    cdef Py_ssize_t i, d, starts, bi = 0, bd = 1
    cdef double best = -1.0, denom, v
    for i in range(2 * n):
        pre[i + 1] = pre[i] + m[i % n]
    for d in range(1, n + 1):
        starts = n if cyclic else n - d + 1
        denom = rho * (d - 1)
        if denom < t:
            denom = t
        for i in range(starts):
            v = (pre[i + d] - pre[i]) / denom
            if v > best:
                best = v
                bi = i
                bd = d
    return best, bi, bd


def window_max(mu, Py_ssize_t max_len, bint cyclic):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pre = np.zeros(2 * n + 1)
    cdef Py_ssize_t i, d, starts, bi = 0, bd = 1
    cdef double best = -1.0, v
    for i in range(2 * n):
        pre[i + 1] = pre[i] + m[i % n]
    if max_len > n:
        max_len = n
    for d in range(1, max_len + 1):
        starts = n if cyclic else n - d + 1
        for i in range(starts):
            v = pre[i + d] - pre[i]
            if v > best:
                best = v
                bi = i
                bd = d
    return best, bi, bd


cdef Py_ssize_t _last_same(cnp.int64_t[:] a, Py_ssize_t lo, Py_ssize_t hi, cnp.int64_t r, long* q):
    cdef Py_ssize_t mid
    while hi - lo > 1:
        mid = (lo + hi) // 2
        q[0] += 1
        if a[mid] == r:
            lo = mid
        else:
            hi = mid
    return lo


cdef Py_ssize_t _first_same(cnp.int64_t[:] a, Py_ssize_t lo, Py_ssize_t hi, cnp.int64_t r, long* q):
    cdef Py_ssize_t mid
    while hi - lo > 1:
        mid = (lo + hi) // 2
        q[0] += 1
        if a[mid] == r:
            hi = mid
        else:
            lo = mid
    return hi


def walk_cells(ans, bint cyclic, Py_ssize_t cap):
    cdef cnp.int64_t[:] a = np.ascontiguousarray(ans, dtype=np.int64)
    cdef Py_ssize_t n = a.shape[0]
    cdef long q = 0
    cdef Py_ssize_t pos = 0, end = n, b, gap, head, tail, x, j, k
    cdef cnp.int64_t r
    starts = []
    ends = []
    r = a[0]
    q += 1
    if cyclic and n > 1:
        q += 1
        if a[n - 1] == r:
            gap = -1
            seen = np.zeros(n, dtype=np.uint8)
            seen[0] = 1
            seen[n - 1] = 1
            left = n - 2
            k = 1
            while left > 0 and gap < 0:
                for j in range(1, 1 << k, 2):
                    x = (j * n) >> k
                    if not seen[x]:
                        seen[x] = 1
                        left -= 1
                        q += 1
                        if a[x] != r:
                            gap = x
                            break
                k += 1
            if gap < 0:
                return np.array([0], dtype=np.int64), np.array([n - 1], dtype=np.int64), q, cap < 1
            head = _last_same(a, 0, gap, r, &q)
            tail = _first_same(a, gap, n - 1, r, &q)
            starts.append(tail)
            ends.append(head)
            if len(starts) > cap:
                return np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64), q, True
            pos = head + 1
            end = tail
            r = a[pos]
            q += 1
    while True:
        b = _last_same(a, pos, end, r, &q)
        starts.append(pos)
        ends.append(b)
        if len(starts) > cap:
            return np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64), q, True
        pos = b + 1
        if pos >= end:
            return np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64), q, False
        r = a[pos]
        q += 1
