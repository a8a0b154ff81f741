# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contracts as _kernels_py; see that module.

Predicates evaluate the same float expressions in the same order as the
numpy fallback (and the build disables FP contraction), so boolean outputs
match the fallback bit-for-bit.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, fabs, floor

cnp.import_array()


def interval_cover(cnp.int64_t[::1] kmin, cnp.int64_t[::1] kmax, Py_ssize_t n):
    out = np.zeros(n, dtype=bool)
    cdef cnp.uint8_t[::1] view = out.view(np.uint8)
    cdef Py_ssize_t i, k, lo, hi
    for i in range(kmin.shape[0]):
        lo = kmin[i]
        hi = kmax[i]
        if lo < 0:
            lo = 0
        if hi > n - 1:
            hi = n - 1
        for k in range(lo, hi + 1):
            view[k] = 1
    return out


def strip_raster(double nx, double ny, double c, double rprime,
                 double x0, double y0, double step,
                 Py_ssize_t ncx, Py_ssize_t ncy):
    out = np.zeros((ncx, ncy), dtype=bool)
    cdef cnp.uint8_t[:, ::1] view = out.view(np.uint8)
    cdef Py_ssize_t i, j, jlo, jhi
    cdef double cx, cy, t, jc, jr
    cdef double absny = fabs(ny)
    for i in range(ncx):
        cx = (i + 0.5) * step + x0
        jlo = 0
        jhi = ncy - 1
        if absny * step > 0.0:
            # conservative band around the strip's trace in this column
            jc = ((-(nx * cx + c) / ny) - y0) / step - 0.5
            jr = rprime / (absny * step)
            if fabs(jc) < 1e12 and jr < 1e12:
                jlo = <Py_ssize_t>floor(jc - jr) - 4
                jhi = <Py_ssize_t>ceil(jc + jr) + 4
                if jlo < 0:
                    jlo = 0
                if jhi > ncy - 1:
                    jhi = ncy - 1
        for j in range(jlo, jhi + 1):
            cy = (j + 0.5) * step + y0
            t = nx * cx + (ny * cy + c)
            if fabs(t) < rprime:
                view[i, j] = 1
    return out
