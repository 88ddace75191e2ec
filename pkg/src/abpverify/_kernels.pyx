# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the contact scan and the Jacobi RK4 integrator."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def contact_argmin(points, values, targets):
    """Index of the minimiser of ``values[i] - <points[i], xi>`` for each target."""
    cdef const double[:, ::1] x = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[::1] u = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[:, ::1] xi = np.ascontiguousarray(targets, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], ns = xi.shape[0]
    cdef cnp.int64_t[::1] out = np.empty(ns, dtype=np.int64)
    cdef Py_ssize_t s, i, j, best
    cdef double w, wbest
    if xi.shape[1] != d:
        raise ValueError("points and targets differ in dimension")
    if u.shape[0] != n:
        raise ValueError("values do not match points")
    if n == 0:
        raise ValueError("empty point set")
    with nogil:
        for s in range(ns):
            best = 0
            wbest = 1e308
            for i in range(n):
                w = u[i]
                for j in range(d):
                    w = w - x[i, j] * xi[s, j]
                if w < wbest:
                    wbest = w
                    best = i
            out[s] = best
    return np.asarray(out)


cdef inline void _mul_neg(const double[:, ::1] p, const double[:, :, ::1] s, Py_ssize_t idx,
                          double[:, ::1] out, Py_ssize_t k) noexcept nogil:
    # out = -p @ s[idx]
    cdef Py_ssize_t a, b, c
    cdef double acc
    for a in range(k):
        for b in range(k):
            acc = 0.0
            for c in range(k):
                acc = acc + p[a, c] * s[idx, c, b]
            out[a, b] = -acc


def jacobi_rk4(s_samples, p0, v0, double dt):
    """Classical RK4 for ``P'' = -P S(t)`` with ``S`` given at every half step."""
    cdef const double[:, :, ::1] s = np.ascontiguousarray(s_samples, dtype=np.float64)
    cdef Py_ssize_t steps = (s.shape[0] - 1) // 2, k = s.shape[1]
    p_arr = np.empty((steps + 1, k, k))
    v_arr = np.empty((steps + 1, k, k))
    cdef double[:, :, ::1] p_out = p_arr
    cdef double[:, :, ::1] v_out = v_arr
    cdef double[:, ::1] p = np.array(p0, dtype=np.float64, order="C")
    cdef double[:, ::1] v = np.array(v0, dtype=np.float64, order="C")
    cdef double[:, ::1] tp = np.empty((k, k))
    cdef double[:, ::1] tv = np.empty((k, k))
    cdef double[:, ::1] k1v = np.empty((k, k))
    cdef double[:, ::1] k2v = np.empty((k, k))
    cdef double[:, ::1] k3v = np.empty((k, k))
    cdef double[:, ::1] k4v = np.empty((k, k))
    cdef double[:, ::1] k2p = np.empty((k, k))
    cdef double[:, ::1] k3p = np.empty((k, k))
    cdef double[:, ::1] k4p = np.empty((k, k))
    cdef Py_ssize_t i, a, b
    cdef double h = dt
    p_out[0, :, :] = p
    v_out[0, :, :] = v
    with nogil:
        for i in range(steps):
            _mul_neg(p, s, 2 * i, k1v, k)
            for a in range(k):
                for b in range(k):
                    tp[a, b] = p[a, b] + 0.5 * h * v[a, b]
                    k2p[a, b] = v[a, b] + 0.5 * h * k1v[a, b]
            _mul_neg(tp, s, 2 * i + 1, k2v, k)
            for a in range(k):
                for b in range(k):
                    tp[a, b] = p[a, b] + 0.5 * h * k2p[a, b]
                    k3p[a, b] = v[a, b] + 0.5 * h * k2v[a, b]
            _mul_neg(tp, s, 2 * i + 1, k3v, k)
            for a in range(k):
                for b in range(k):
                    tp[a, b] = p[a, b] + h * k3p[a, b]
                    k4p[a, b] = v[a, b] + h * k3v[a, b]
            _mul_neg(tp, s, 2 * i + 2, k4v, k)
            for a in range(k):
                for b in range(k):
                    p[a, b] = p[a, b] + h / 6.0 * (v[a, b] + 2 * k2p[a, b] + 2 * k3p[a, b]
                                                   + k4p[a, b])
                    v[a, b] = v[a, b] + h / 6.0 * (k1v[a, b] + 2 * k2v[a, b] + 2 * k3v[a, b]
                                                   + k4v[a, b])
                    p_out[i + 1, a, b] = p[a, b]
                    v_out[i + 1, a, b] = v[a, b]
    return p_arr, v_arr
