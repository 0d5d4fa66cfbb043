# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``.

Signatures and return values match the numpy module exactly so that the
selector in ``kernels`` can swap them freely.
"""

import numpy as np

from libc.math cimport cos, sin, fabs, hypot


def trig_eval(const double[:, ::1] freqs, const double[::1] a,
              const double[::1] b, double constant,
              const double[:, ::1] pts):
    cdef Py_ssize_t n = freqs.shape[0], d = freqs.shape[1], N = pts.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc, ph
    out = np.empty(N)
    cdef double[::1] o = out
    with nogil:
        for i in range(N):
            acc = constant
            for j in range(n):
                ph = 0.0
                for k in range(d):
                    ph = ph + freqs[j, k] * pts[i, k]
                acc = acc + a[j] * cos(ph) + b[j] * sin(ph)
            o[i] = acc
    return out


cdef inline void _rule(double D1, double D2, double D3, double D4,
                       double lam, double Lam, double* val,
                       double* w) noexcept nogil:
    cdef double mid = 0.5 * (D1 + D2)
    cdef double b3 = D3 - mid, b4 = D4 - mid
    cdef bint use3 = b3 >= b4
    cdef double b = b3 if use3 else b4
    if b < 0.0:
        b = 0.0
    cdef double rad = hypot(0.5 * (D1 - D2), b)
    cdef double e1 = mid + rad, e2 = mid - rad
    cdef double P11 = 0.0, P22 = 0.0, P12 = 0.0
    if e2 > 0.0:
        P11 = 1.0
        P22 = 1.0
    elif e1 > 0.0 and rad > 0.0:
        P11 = (D1 - e2) / (2.0 * rad)
        P22 = (D2 - e2) / (2.0 * rad)
        P12 = b / (2.0 * rad)
    val[0] = (Lam * ((e1 if e1 > 0 else 0.0) + (e2 if e2 > 0 else 0.0))
              + lam * ((e1 if e1 < 0 else 0.0) + (e2 if e2 < 0 else 0.0)))
    cdef double A11 = lam + (Lam - lam) * P11
    cdef double A22 = lam + (Lam - lam) * P22
    cdef double A12 = (Lam - lam) * P12
    w[0] = A11 - A12
    w[1] = A22 - A12
    w[2] = 2.0 * A12 if use3 else 0.0
    w[3] = 0.0 if use3 else 2.0 * A12


def pucci_weights_2d(const double[:, ::1] D, double lam, double Lam):
    cdef Py_ssize_t N = D.shape[1], i
    value = np.empty(N)
    W = np.empty((4, N))
    cdef double[::1] v = value
    cdef double[:, ::1] Wv = W
    cdef double w[4]
    with nogil:
        for i in range(N):
            _rule(D[0, i], D[1, i], D[2, i], D[3, i], lam, Lam, &v[i], w)
            Wv[0, i] = w[0]
            Wv[1, i] = w[1]
            Wv[2, i] = w[2]
            Wv[3, i] = w[3]
    return value, W


cdef inline double _plus_value(double D1, double D2, double D3, double D4,
                               double lam, double Lam) noexcept nogil:
    cdef double mid = 0.5 * (D1 + D2)
    cdef double b = (D3 if D3 >= D4 else D4) - mid
    if b < 0.0:
        b = 0.0
    cdef double rad = hypot(0.5 * (D1 - D2), b)
    cdef double e1 = mid + rad, e2 = mid - rad
    return (Lam * ((e1 if e1 > 0 else 0.0) + (e2 if e2 > 0 else 0.0))
            + lam * ((e1 if e1 < 0 else 0.0) + (e2 if e2 < 0 else 0.0)))


def sweep_pucci_2d(u0, double h, double tau, double lam, double Lam,
                   double sgn, c, double delta, Py_ssize_t n_steps):
    u_arr = np.array(u0, dtype=np.float64, order="C", copy=True)
    buf = u_arr.copy()
    cc = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[:, ::1] u = u_arr
    cdef double[:, ::1] un = buf
    cdef double[::1] cv = cc
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1], i, j, k
    cdef double inv = 1.0 / (h * h), uc, D1, D2, D3, D4, S, du, m
    incs = np.zeros(n_steps)
    cdef double[::1] iv = incs
    with nogil:
        for k in range(n_steps):
            m = 0.0
            for i in range(1, n0 - 1):
                for j in range(1, n1 - 1):
                    uc = u[i, j]
                    D1 = sgn * (cv[0] + (u[i + 1, j] - 2 * uc + u[i - 1, j]) * inv)
                    D2 = sgn * (cv[1] + (u[i, j + 1] - 2 * uc + u[i, j - 1]) * inv)
                    D3 = sgn * (cv[2] + (u[i + 1, j + 1] - 2 * uc
                                         + u[i - 1, j - 1]) * (0.5 * inv))
                    D4 = sgn * (cv[3] + (u[i + 1, j - 1] - 2 * uc
                                         + u[i - 1, j + 1]) * (0.5 * inv))
                    S = sgn * _plus_value(D1, D2, D3, D4, lam, Lam)
                    du = tau * (S - delta * uc)
                    un[i, j] = uc + du
                    if fabs(du) > m:
                        m = fabs(du)
            for i in range(1, n0 - 1):
                for j in range(1, n1 - 1):
                    u[i, j] = un[i, j]
            iv[k] = m
    return u_arr, incs


def sweep_pucci_1d(u0, double h, double tau, double lam, double Lam,
                   double sgn, c, double delta, Py_ssize_t n_steps):
    u_arr = np.array(u0, dtype=np.float64, order="C", copy=True)
    buf = u_arr.copy()
    cdef double c0 = float(np.ravel(c)[0])
    cdef double[::1] u = u_arr
    cdef double[::1] un = buf
    cdef Py_ssize_t n = u.shape[0], i, k
    cdef double inv = 1.0 / (h * h), D, S, du, m
    incs = np.zeros(n_steps)
    cdef double[::1] iv = incs
    with nogil:
        for k in range(n_steps):
            m = 0.0
            for i in range(1, n - 1):
                D = sgn * (c0 + (u[i + 1] - 2 * u[i] + u[i - 1]) * inv)
                S = sgn * (Lam * D if D > 0 else lam * D)
                du = tau * (S - delta * u[i])
                un[i] = u[i] + du
                if fabs(du) > m:
                    m = fabs(du)
            for i in range(1, n - 1):
                u[i] = un[i]
            iv[k] = m
    return u_arr, incs


def sweep_weighted(u0, W, source, double h, double tau, double delta,
                   Py_ssize_t n_steps):
    u_arr = np.array(u0, dtype=np.float64, order="C", copy=True)
    if u_arr.ndim == 1:
        return _sweep_weighted_1d(u_arr, np.ascontiguousarray(W, dtype=np.float64),
                                  np.ascontiguousarray(source, dtype=np.float64),
                                  h, tau, delta, n_steps)
    return _sweep_weighted_2d(u_arr, np.ascontiguousarray(W, dtype=np.float64),
                              np.ascontiguousarray(source, dtype=np.float64),
                              h, tau, delta, n_steps)


def _sweep_weighted_1d(u_arr, W_arr, source_arr, double h, double tau,
                       double delta, Py_ssize_t n_steps):
    buf = u_arr.copy()
    cdef double[::1] u = u_arr
    cdef double[::1] un = buf
    cdef double[:, ::1] W = W_arr
    cdef double[::1] f = np.broadcast_to(source_arr, (u_arr.shape[0] - 2,)).copy()
    cdef Py_ssize_t n = u.shape[0], i, k
    cdef double inv = 1.0 / (h * h), S, du, m
    incs = np.zeros(n_steps)
    cdef double[::1] iv = incs
    with nogil:
        for k in range(n_steps):
            m = 0.0
            for i in range(1, n - 1):
                S = W[0, i - 1] * (u[i + 1] - 2 * u[i] + u[i - 1]) * inv + f[i - 1]
                du = tau * (S - delta * u[i])
                un[i] = u[i] + du
                if fabs(du) > m:
                    m = fabs(du)
            for i in range(1, n - 1):
                u[i] = un[i]
            iv[k] = m
    return u_arr, incs


def _sweep_weighted_2d(u_arr, W_arr, source_arr, double h, double tau,
                       double delta, Py_ssize_t n_steps):
    buf = u_arr.copy()
    cdef double[:, ::1] u = u_arr
    cdef double[:, ::1] un = buf
    cdef double[:, :, ::1] W = W_arr
    cdef double[:, ::1] f = np.broadcast_to(
        source_arr, (u_arr.shape[0] - 2, u_arr.shape[1] - 2)).copy()
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1], i, j, k
    cdef double inv = 1.0 / (h * h), uc, S, du, m
    incs = np.zeros(n_steps)
    cdef double[::1] iv = incs
    with nogil:
        for k in range(n_steps):
            m = 0.0
            for i in range(1, n0 - 1):
                for j in range(1, n1 - 1):
                    uc = u[i, j]
                    S = (W[0, i - 1, j - 1] * (u[i + 1, j] - 2 * uc + u[i - 1, j]) * inv
                         + W[1, i - 1, j - 1] * (u[i, j + 1] - 2 * uc + u[i, j - 1]) * inv
                         + W[2, i - 1, j - 1] * (u[i + 1, j + 1] - 2 * uc
                                                 + u[i - 1, j - 1]) * (0.5 * inv)
                         + W[3, i - 1, j - 1] * (u[i + 1, j - 1] - 2 * uc
                                                 + u[i - 1, j + 1]) * (0.5 * inv)
                         + f[i - 1, j - 1])
                    du = tau * (S - delta * uc)
                    un[i, j] = uc + du
                    if fabs(du) > m:
                        m = fabs(du)
            for i in range(1, n0 - 1):
                for j in range(1, n1 - 1):
                    u[i, j] = un[i, j]
            iv[k] = m
    return u_arr, incs
