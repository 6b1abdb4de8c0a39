# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop of the decoupled IMC closed loop."""
import numpy as np
cimport numpy as cnp


def modal_loop(const double[:, ::1] d, const double[:, ::1] n, const double[:, ::1] r,
               const double[::1] sigma, const double[::1] gamma,
               double p, double l, Py_ssize_t delay):
    cdef Py_ssize_t N = d.shape[0], m = d.shape[1], k, j
    y_arr = np.zeros((N, m))
    u_arr = np.zeros((N, m))
    G_arr = np.zeros((N, m))
    cdef double[:, ::1] y = y_arr
    cdef double[:, ::1] u = u_arr
    cdef double[:, ::1] G = G_arr
    cdef double[::1] v = np.zeros(m)
    cdef double[::1] e_prev = np.zeros(m)
    cdef double[::1] K = np.empty(m)
    cdef double gd, e, bp = 1.0 - p, bl = 1.0 - l
    for j in range(m):
        K[j] = bl / (bp * sigma[j])
    with nogil:
        for k in range(N):
            for j in range(m):
                if k > 0:
                    G[k, j] = p * G[k - 1, j] + bp * u[k - 1, j]
                gd = sigma[j] * G[k - delay, j] if k >= delay else 0.0
                y[k, j] = gd + d[k, j]
                e = gamma[j] * (y[k, j] + n[k, j] - r[k, j]) - gd
                v[j] = l * v[j] + K[j] * (e - p * e_prev[j])
                e_prev[j] = e
                u[k, j] = -v[j]
    return y_arr, u_arr
