# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-replicate reductions; mirrors ``_kernels_py`` exactly.

Single pass over each replicate row with the same max-shift normalization as
the NumPy fallback. The loops fuse the softmax and the weighted reduction, so
no (replicates, samples) temporaries are materialized.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, pow

cnp.import_array()


def rep_estimates(double[:, ::1] log_ws not None,
                  double[:, ::1] partials not None,
                  double alpha):
    cdef Py_ssize_t b = log_ws.shape[0]
    cdef Py_ssize_t n = log_ws.shape[1]
    out_arr = np.empty(b, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double one_m_a = 1.0 - alpha
    cdef double m, s, acc, w
    for i in range(b):
        m = one_m_a * log_ws[i, 0]
        for j in range(1, n):
            if one_m_a * log_ws[i, j] > m:
                m = one_m_a * log_ws[i, j]
        s = 0.0
        acc = 0.0
        for j in range(n):
            w = exp(one_m_a * log_ws[i, j] - m)
            s += w
            acc += w * partials[i, j]
        out[i] = acc / s
    return out_arr


def drep_estimates(double[:, ::1] log_ws not None,
                   double[:, ::1] partials not None,
                   double alpha):
    cdef Py_ssize_t b = log_ws.shape[0]
    cdef Py_ssize_t n = log_ws.shape[1]
    out_arr = np.empty(b, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double one_m_a = 1.0 - alpha
    cdef double m, s, acc, w, nw
    for i in range(b):
        m = one_m_a * log_ws[i, 0]
        for j in range(1, n):
            if one_m_a * log_ws[i, j] > m:
                m = one_m_a * log_ws[i, j]
        s = 0.0
        for j in range(n):
            s += exp(one_m_a * log_ws[i, j] - m)
        acc = 0.0
        for j in range(n):
            nw = exp(one_m_a * log_ws[i, j] - m) / s
            acc += (alpha * nw + one_m_a * nw * nw) * partials[i, j]
        out[i] = acc
    return out_arr


def bound_estimates(double[:, ::1] log_ws not None, double alpha):
    cdef Py_ssize_t b = log_ws.shape[0]
    cdef Py_ssize_t n = log_ws.shape[1]
    out_arr = np.empty(b, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double one_m_a = 1.0 - alpha
    cdef double log_n = log(<double> n)
    cdef double m, s
    for i in range(b):
        m = one_m_a * log_ws[i, 0]
        for j in range(1, n):
            if one_m_a * log_ws[i, j] > m:
                m = one_m_a * log_ws[i, j]
        s = 0.0
        for j in range(n):
            s += exp(one_m_a * log_ws[i, j] - m)
        out[i] = (m + log(s) - log_n) / one_m_a
    return out_arr


def softmax_stats(double[:, ::1] xi not None, double beta, double delta,
                  double lam):
    cdef Py_ssize_t b = xi.shape[0]
    cdef Py_ssize_t n = xi.shape[1]
    t_delta_arr = np.empty(b, dtype=np.float64)
    t_mix_arr = np.empty(b, dtype=np.float64)
    s_delta_arr = np.empty(b, dtype=np.float64)
    max_xi_arr = np.empty(b, dtype=np.float64)
    cdef double[::1] t_delta = t_delta_arr
    cdef double[::1] t_mix = t_mix_arr
    cdef double[::1] s_delta = s_delta_arr
    cdef double[::1] max_xi = max_xi_arr
    cdef Py_ssize_t i, j
    cdef double m, s, w, wd, td, tm, sd, mx
    for i in range(b):
        mx = xi[i, 0]
        for j in range(1, n):
            if xi[i, j] > mx:
                mx = xi[i, j]
        m = beta * mx
        s = 0.0
        for j in range(n):
            s += exp(beta * xi[i, j] - m)
        td = 0.0
        tm = 0.0
        sd = 0.0
        for j in range(n):
            w = exp(beta * xi[i, j] - m) / s
            wd = pow(w, delta)
            td += wd * xi[i, j]
            tm += (lam * w + (1.0 - lam) * w * w) * xi[i, j]
            sd += wd
        t_delta[i] = td
        t_mix[i] = tm
        s_delta[i] = sd
        max_xi[i] = mx
    return t_delta_arr, t_mix_arr, s_delta_arr, max_xi_arr
