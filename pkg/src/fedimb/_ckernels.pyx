# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte Carlo kernels; same contracts as _kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport NAN

cnp.import_array()


def window_deltas(counts, selections, Py_ssize_t window):
    cdef const long long[:, ::1] cnt = np.ascontiguousarray(counts, dtype=np.int64)
    cdef const long long[:, ::1] sel = np.ascontiguousarray(selections, dtype=np.int64)
    cdef Py_ssize_t n_classes = cnt.shape[1]
    cdef Py_ssize_t k = sel.shape[1]
    cdef Py_ssize_t n_windows = sel.shape[0] // window
    out_arr = np.empty(n_windows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef long long[::1] grouped = np.zeros(n_classes, dtype=np.int64)
    cdef Py_ssize_t w, r, j, c, row
    cdef long long mx, mn, tot, v
    with nogil:
        for w in range(n_windows):
            for c in range(n_classes):
                grouped[c] = 0
            for r in range(w * window, (w + 1) * window):
                for j in range(k):
                    row = sel[r, j]
                    for c in range(n_classes):
                        grouped[c] += cnt[row, c]
            mx = grouped[0]
            mn = grouped[0]
            tot = 0
            for c in range(n_classes):
                v = grouped[c]
                tot += v
                if v > mx:
                    mx = v
                if v < mn:
                    mn = v
            if tot == 0:
                out[w] = NAN
            else:
                out[w] = <double>(mx - mn) / <double>tot
    return out_arr


def selection_hits(selections, Py_ssize_t n_ids):
    cdef const long long[:, ::1] sel = np.ascontiguousarray(selections, dtype=np.int64).reshape(-1, 1)
    hits_arr = np.zeros(n_ids, dtype=np.int64)
    cdef long long[::1] hits = hits_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(sel.shape[0]):
            hits[sel[i, 0]] += 1
    return hits_arr
