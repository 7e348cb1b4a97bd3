# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled split kernel: one indexed pass over the node's sorted rows.

Accumulates the sufficient statistics directly through the sort indices, so
no gathered copies of the feature or target matrices are materialized.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def segment_prefix_stats(double[:, ::1] Z, double[:, ::1] Y,
                         long long[::1] order, long long[::1] bounds):
    """Prefix regression statistics at the given row counts of a sort order.

    Same contract as the numpy fallback: packed upper-triangle Z^T Z,
    flattened Z^T Y, and per-output squared sums for every prefix in bounds.
    """
    cdef Py_ssize_t dz = Z.shape[1]
    cdef Py_ssize_t dy = Y.shape[1]
    cdef Py_ssize_t nb = bounds.shape[0]
    cdef Py_ssize_t tri = dz * (dz + 1) // 2

    szz_np = np.empty((nb, tri), dtype=np.float64)
    szy_np = np.empty((nb, dz * dy), dtype=np.float64)
    syy_np = np.empty((nb, dy), dtype=np.float64)
    acc_zz_np = np.zeros(tri, dtype=np.float64)
    acc_zy_np = np.zeros(dz * dy, dtype=np.float64)
    acc_yy_np = np.zeros(dy, dtype=np.float64)

    cdef double[:, ::1] szz = szz_np
    cdef double[:, ::1] szy = szy_np
    cdef double[:, ::1] syy = syy_np
    cdef double[::1] acc_zz = acc_zz_np
    cdef double[::1] acc_zy = acc_zy_np
    cdef double[::1] acc_yy = acc_yy_np

    cdef Py_ssize_t pos = 0, b, i, j, k, end, row
    cdef double zi, yj

    for b in range(nb):
        end = bounds[b]
        while pos < end:
            row = order[pos]
            k = 0
            for i in range(dz):
                zi = Z[row, i]
                for j in range(i, dz):
                    acc_zz[k] += zi * Z[row, j]
                    k += 1
                for j in range(dy):
                    acc_zy[i * dy + j] += zi * Y[row, j]
            for j in range(dy):
                yj = Y[row, j]
                acc_yy[j] += yj * yj
            pos += 1
        for k in range(tri):
            szz[b, k] = acc_zz[k]
        for k in range(dz * dy):
            szy[b, k] = acc_zy[k]
        for j in range(dy):
            syy[b, j] = acc_yy[j]

    return szz_np, szy_np, syy_np
