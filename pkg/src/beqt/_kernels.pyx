# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise stage kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

STAGE_A_OUTPUTS = (
    "trQ2", "trQD", "adv_q", "adv_r", "w_r", "w_q",
    "adv_u1", "adv_u2", "E11", "E12", "E22",
)


def stage_a(double[:, :, ::1] inp, out=None):
    cdef Py_ssize_t n0 = inp.shape[1], n1 = inp.shape[2], i, j
    if out is None:
        out = np.empty((11, n0, n1))
    cdef double[:, :, ::1] o = out
    cdef double q, r, qx, qy, rx, ry, u1, u2, u1x, u1y, u2x, u2y, dxx, e, w
    with nogil:
        for i in range(n0):
            for j in range(n1):
                q = inp[0, i, j]
                r = inp[1, i, j]
                qx = inp[2, i, j]
                qy = inp[3, i, j]
                rx = inp[4, i, j]
                ry = inp[5, i, j]
                u1 = inp[6, i, j]
                u2 = inp[7, i, j]
                u1x = inp[8, i, j]
                u1y = inp[9, i, j]
                u2x = inp[10, i, j]
                u2y = inp[11, i, j]
                dxx = 0.5 * (u1x - u2y)
                e = 0.5 * (u1y + u2x)
                w = 0.5 * (u1y - u2x)
                o[0, i, j] = 2.0 * (q * q + r * r)
                o[1, i, j] = 2.0 * (dxx * q + e * r)
                o[2, i, j] = u1 * qx + u2 * qy
                o[3, i, j] = u1 * rx + u2 * ry
                o[4, i, j] = w * r
                o[5, i, j] = w * q
                o[6, i, j] = u1 * u1x + u2 * u1y
                o[7, i, j] = u1 * u2x + u2 * u2y
                o[8, i, j] = 2.0 * (qx * qx + rx * rx)
                o[9, i, j] = 2.0 * (qx * qy + rx * ry)
                o[10, i, j] = 2.0 * (qy * qy + ry * ry)
    return out


def stage_b(double[:, ::1] q, double[:, ::1] r, double[:, ::1] trQ2,
            double[:, ::1] trQD, out=None):
    cdef Py_ssize_t n0 = q.shape[0], n1 = q.shape[1], i, j
    if out is None:
        out = np.empty((4, n0, n1))
    cdef double[:, :, ::1] o = out
    with nogil:
        for i in range(n0):
            for j in range(n1):
                o[0, i, j] = q[i, j] * trQ2[i, j]
                o[1, i, j] = r[i, j] * trQ2[i, j]
                o[2, i, j] = q[i, j] * trQD[i, j]
                o[3, i, j] = r[i, j] * trQD[i, j]
    return out


def stage_c(double[:, ::1] q, double[:, ::1] r, double[:, ::1] h1,
            double[:, ::1] h2, out=None):
    cdef Py_ssize_t n0 = q.shape[0], n1 = q.shape[1], i, j
    if out is None:
        out = np.empty((2, n0, n1))
    cdef double[:, :, ::1] o = out
    with nogil:
        for i in range(n0):
            for j in range(n1):
                o[0, i, j] = 2.0 * (q[i, j] * h1[i, j] + r[i, j] * h2[i, j])
                o[1, i, j] = 2.0 * (q[i, j] * h2[i, j] - r[i, j] * h1[i, j])
    return out


def stage_d(double[:, ::1] q, double[:, ::1] r, double[:, ::1] m, out=None):
    cdef Py_ssize_t n0 = q.shape[0], n1 = q.shape[1], i, j
    if out is None:
        out = np.empty((2, n0, n1))
    cdef double[:, :, ::1] o = out
    with nogil:
        for i in range(n0):
            for j in range(n1):
                o[0, i, j] = q[i, j] * m[i, j]
                o[1, i, j] = r[i, j] * m[i, j]
    return out
