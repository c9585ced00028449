# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled distance and neighbor-vote kernels.

Mirrors ``_kernels_py`` operation for operation so both backends give
bit-identical results.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isnan

cnp.import_array()

BACKEND = "cython"

cdef double INV_EPS = 1e-9


def sq_distances(const double[:, ::1] Q, const double[:, ::1] T,
                 const unsigned char[::1] nominal, const double[::1] fill, int policy):
    cdef Py_ssize_t nq = Q.shape[0], nt = T.shape[0], m = Q.shape[1]
    cdef Py_ssize_t i, r, j
    cdef double s, a, b, d
    out_arr = np.empty((nq, nt), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(nq):
            for r in range(nt):
                s = 0.0
                for j in range(m):
                    a = Q[i, j]
                    b = T[r, j]
                    if nominal[j]:
                        if isnan(a) or isnan(b):
                            d = 0.5 if policy == 0 else 1.0
                        elif a == b:
                            d = 0.0
                        else:
                            d = 1.0
                    else:
                        if isnan(a) or isnan(b):
                            if policy == 0:
                                if isnan(a):
                                    a = fill[j]
                                if isnan(b):
                                    b = fill[j]
                                d = a - b
                            else:
                                d = 1.0
                        else:
                            d = a - b
                    s += d * d
                out[i, r] = s
    return out_arr


def knn_vote(const double[:, ::1] sqd, const cnp.intp_t[::1] labels, int k, int n_classes, int weighting):
    cdef Py_ssize_t nq = sqd.shape[0], nt = sqd.shape[1]
    cdef Py_ssize_t i, r, t, pos
    cdef double v, w, best
    cdef cnp.intp_t cls
    pred_arr = np.empty(nq, dtype=np.intp)
    weights_arr = np.zeros((nq, n_classes), dtype=np.float64)
    nb_arr = np.empty((nq, k), dtype=np.intp)
    cdef cnp.intp_t[::1] pred = pred_arr
    cdef double[:, ::1] weights = weights_arr
    cdef cnp.intp_t[:, ::1] nb = nb_arr
    cdef double[::1] topd = np.empty(k, dtype=np.float64)
    cdef Py_ssize_t filled
    with nogil:
        for i in range(nq):
            filled = 0
            for r in range(nt):
                v = sqd[i, r]
                if filled == k and not (v < topd[k - 1]):
                    continue
                # insertion keeps lower index first on equal distance
                pos = filled if filled < k else k - 1
                while pos > 0 and v < topd[pos - 1]:
                    if pos < k:
                        topd[pos] = topd[pos - 1]
                        nb[i, pos] = nb[i, pos - 1]
                    pos -= 1
                topd[pos] = v
                nb[i, pos] = r
                if filled < k:
                    filled += 1
            for t in range(k):
                cls = labels[nb[i, t]]
                if weighting == 0:
                    w = 1.0
                else:
                    w = 1.0 / (sqrt(topd[t]) + INV_EPS)
                weights[i, cls] += w
            best = weights[i, 0]
            pred[i] = 0
            for t in range(1, n_classes):
                if weights[i, t] > best:
                    best = weights[i, t]
                    pred[i] = t
    return pred_arr, weights_arr, nb_arr
