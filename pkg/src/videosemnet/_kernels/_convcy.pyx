# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled temporal convolution kernels (hot path of the conv stack)."""

import numpy as np

cimport cython

ctypedef fused real:
    float
    double


def conv1d_forward(real[:, ::1] x, real[:, :, ::1] w, real[::1] b):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t cin = x.shape[1]
    cdef Py_ssize_t k = w.shape[0]
    cdef Py_ssize_t cout = w.shape[2]
    cdef Py_ssize_t h = k // 2
    cdef Py_ssize_t t, i, ci, co, s
    cdef real acc

    if real is float:
        out_np = np.empty((T, cout), dtype=np.float32)
    else:
        out_np = np.empty((T, cout), dtype=np.float64)
    cdef real[:, ::1] out = out_np

    for t in range(T):
        for co in range(cout):
            out[t, co] = b[co]
        for i in range(k):
            s = t + i - h
            if s < 0 or s >= T:
                continue
            for ci in range(cin):
                acc = x[s, ci]
                if acc == 0:
                    continue
                for co in range(cout):
                    out[t, co] += acc * w[i, ci, co]
    return out_np


def conv1d_backward(real[:, ::1] x, real[:, :, ::1] w, real[:, ::1] gy):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t cin = x.shape[1]
    cdef Py_ssize_t k = w.shape[0]
    cdef Py_ssize_t cout = w.shape[2]
    cdef Py_ssize_t h = k // 2
    cdef Py_ssize_t t, i, ci, co, s
    cdef real g, xv

    if real is float:
        dtype = np.float32
    else:
        dtype = np.float64
    gx_np = np.zeros((T, cin), dtype=dtype)
    gw_np = np.zeros((k, cin, cout), dtype=dtype)
    gb_np = np.zeros(cout, dtype=dtype)
    cdef real[:, ::1] gx = gx_np
    cdef real[:, :, ::1] gw = gw_np
    cdef real[::1] gb = gb_np

    for t in range(T):
        for co in range(cout):
            gb[co] += gy[t, co]
        for i in range(k):
            s = t + i - h
            if s < 0 or s >= T:
                continue
            for ci in range(cin):
                xv = x[s, ci]
                g = 0
                for co in range(cout):
                    g += gy[t, co] * w[i, ci, co]
                    gw[i, ci, co] += xv * gy[t, co]
                gx[s, ci] += g
    return gx_np, gw_np, gb_np
