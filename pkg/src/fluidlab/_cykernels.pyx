# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels. Same contracts as fluidlab._pykernels."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _clamp(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        return 0
    if i >= n:
        return n - 1
    return i


def laplacian(double[:, :, ::1] u, int dilation=1):
    """Dilated 5-point Laplacian with replicate padding."""
    if dilation < 1:
        raise ValueError("dilation must be >= 1, got %r" % (dilation,))
    cdef Py_ssize_t c = u.shape[0], h = u.shape[1], w = u.shape[2]
    cdef Py_ssize_t d = dilation
    out_arr = np.empty((c, h, w), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ci, y, x, yu, yd, xl, xr
    with nogil:
        for ci in range(c):
            for y in range(h):
                yu = _clamp(y - d, h)
                yd = _clamp(y + d, h)
                for x in range(w):
                    xl = _clamp(x - d, w)
                    xr = _clamp(x + d, w)
                    out[ci, y, x] = (u[ci, yu, x] + u[ci, yd, x]
                                     + u[ci, y, xl] + u[ci, y, xr]
                                     - 4.0 * u[ci, y, x])
    return out_arr


def laplacian_adjoint(double[:, :, ::1] g, int dilation=1):
    """Adjoint of laplacian: scatter each read back onto its source cell."""
    if dilation < 1:
        raise ValueError("dilation must be >= 1, got %r" % (dilation,))
    cdef Py_ssize_t c = g.shape[0], h = g.shape[1], w = g.shape[2]
    cdef Py_ssize_t d = dilation
    out_arr = np.zeros((c, h, w), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ci, y, x
    cdef double gv
    with nogil:
        for ci in range(c):
            for y in range(h):
                for x in range(w):
                    gv = g[ci, y, x]
                    out[ci, _clamp(y - d, h), x] += gv
                    out[ci, _clamp(y + d, h), x] += gv
                    out[ci, y, _clamp(x - d, w)] += gv
                    out[ci, y, _clamp(x + d, w)] += gv
                    out[ci, y, x] -= 4.0 * gv
    return out_arr


def box_smooth3(double[:, :, ::1] u):
    """3x3 mean filter with replicate padding (separable box)."""
    cdef Py_ssize_t c = u.shape[0], h = u.shape[1], w = u.shape[2]
    tmp_arr = np.empty((c, h, w), dtype=np.float64)
    out_arr = np.empty((c, h, w), dtype=np.float64)
    cdef double[:, :, ::1] tmp = tmp_arr
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ci, y, x
    with nogil:
        for ci in range(c):
            for y in range(h):
                for x in range(w):
                    tmp[ci, y, x] = (u[ci, _clamp(y - 1, h), x] + u[ci, y, x]
                                     + u[ci, _clamp(y + 1, h), x]) / 3.0
            for y in range(h):
                for x in range(w):
                    out[ci, y, x] = (tmp[ci, y, _clamp(x - 1, w)] + tmp[ci, y, x]
                                     + tmp[ci, y, _clamp(x + 1, w)]) / 3.0
    return out_arr
