# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled weighted group-demeaning kernel (alternating projections)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def demean_inplace(double[:, ::1] x, double[::1] w, group_ids, group_counts,
                   double tol, int max_sweeps):
    """Same contract as the numpy fallback; see ``_demean_np.demean_inplace``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k = x.shape[1]
    cdef Py_ssize_t ndim = len(group_ids)
    cdef Py_ssize_t d, i, j, gi
    cdef double delta, diff, m

    ids_arr = [np.ascontiguousarray(g, dtype=np.int64) for g in group_ids]
    cdef long long[::1] g_view
    cdef Py_ssize_t ng

    # Per-dimension weight totals are fixed across sweeps.
    wsums_arr = []
    for d in range(ndim):
        g_view = ids_arr[d]
        ng = group_counts[d]
        ws = np.zeros(ng, dtype=np.float64)
        wsum_view = ws
        for i in range(n):
            ws[g_view[i]] += w[i]
        ws[ws == 0.0] = 1.0
        wsums_arr.append(ws)

    x_prev_np = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] x_prev = x_prev_np
    cdef double[::1] wsum_v
    cdef Py_ssize_t max_ng = 0
    for d in range(ndim):
        if group_counts[d] > max_ng:
            max_ng = group_counts[d]
    sums_np = np.empty((max_ng, k), dtype=np.float64)
    cdef double[:, ::1] sums = sums_np

    cdef int sweeps = 0
    cdef int s
    for s in range(max_sweeps):
        x_prev[:, :] = x
        for d in range(ndim):
            g_view = ids_arr[d]
            wsum_v = wsums_arr[d]
            ng = group_counts[d]
            for gi in range(ng):
                for j in range(k):
                    sums[gi, j] = 0.0
            for i in range(n):
                gi = g_view[i]
                for j in range(k):
                    sums[gi, j] += w[i] * x[i, j]
            for gi in range(ng):
                m = wsum_v[gi]
                for j in range(k):
                    sums[gi, j] /= m
            for i in range(n):
                gi = g_view[i]
                for j in range(k):
                    x[i, j] -= sums[gi, j]
        sweeps += 1
        delta = 0.0
        for i in range(n):
            for j in range(k):
                diff = x[i, j] - x_prev[i, j]
                if diff < 0.0:
                    diff = -diff
                if diff > delta:
                    delta = diff
        if delta < tol:
            break
    return sweeps
