# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 and Jacobi kernels.

Operation order matches ``_pykernels`` exactly; build without fast-math or
FMA contraction so both backends produce identical doubles.
"""
import numpy as np

from libc.math cimport ceil, fabs, isfinite, sqrt

cdef enum:
    MAXDIM = 64


cdef inline double _plant_rhs(double* x, double* d, double cur, double flow, int kind,
                              double k_mt, double c0, double v_res, double v_cell,
                              double eps, double f_min, const double[::1] lam,
                              int m) noexcept nogil:
    cdef double soc = x[0]
    cdef double soc_cell = x[1]
    cdef double qx, s
    cdef int j
    if kind == 1:
        qx = k_mt * c0 * soc_cell
    elif kind == 2:
        s = soc_cell
        if s < 0.0:
            s = 0.0
        elif s > 1.0:
            s = 1.0
        qx = 0.5 * (1.0 + s) * x[2]
    else:
        qx = 0.0
    d[0] = -qx / (c0 * v_res) - cur / (c0 * v_res * f_min)
    d[1] = (flow / (eps * v_cell)) * (soc - soc_cell) - qx / (eps * c0 * v_cell) \
        - cur / (eps * c0 * v_cell * f_min)
    for j in range(2, m - 1):
        d[j] = lam[j - 2] * x[j + 1]
    if m > 2:
        d[m - 1] = 0.0
    return qx


def plant_rk4(const double[::1] t, const double[::1] cur, const double[::1] flow,
              x0, int kind, double k_mt, double c0, double v_res, double v_cell,
              double eps, double f_min, lam):
    cdef Py_ssize_t n = t.shape[0]
    cdef int m = len(x0)
    if m > MAXDIM:
        raise ValueError("state dimension exceeds kernel limit")
    cdef const double[::1] lamv = np.ascontiguousarray(lam, dtype=np.float64)
    if lamv.shape[0] == 0:
        lamv = np.zeros(1)
    out_arr = np.zeros((n, m))
    flux_arr = np.zeros(n)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] flux = flux_arr
    cdef double x[MAXDIM]
    cdef double xs[MAXDIM]
    cdef double k1[MAXDIM]
    cdef double k2[MAXDIM]
    cdef double k3[MAXDIM]
    cdef double k4[MAXDIM]
    cdef Py_ssize_t k
    cdef int j
    cdef double h
    cdef Py_ssize_t fail = -1
    for j in range(m):
        x[j] = x0[j]
        out[0, j] = x[j]
    with nogil:
        flux[0] = _plant_rhs(x, k1, cur[0], flow[0], kind, k_mt, c0, v_res, v_cell,
                             eps, f_min, lamv, m)
        for k in range(n - 1):
            h = t[k + 1] - t[k]
            _plant_rhs(x, k1, cur[2 * k], flow[2 * k], kind, k_mt, c0, v_res, v_cell,
                       eps, f_min, lamv, m)
            for j in range(m):
                xs[j] = x[j] + 0.5 * h * k1[j]
            _plant_rhs(xs, k2, cur[2 * k + 1], flow[2 * k + 1], kind, k_mt, c0, v_res,
                       v_cell, eps, f_min, lamv, m)
            for j in range(m):
                xs[j] = x[j] + 0.5 * h * k2[j]
            _plant_rhs(xs, k3, cur[2 * k + 1], flow[2 * k + 1], kind, k_mt, c0, v_res,
                       v_cell, eps, f_min, lamv, m)
            for j in range(m):
                xs[j] = x[j] + h * k3[j]
            _plant_rhs(xs, k4, cur[2 * k + 2], flow[2 * k + 2], kind, k_mt, c0, v_res,
                       v_cell, eps, f_min, lamv, m)
            for j in range(m):
                x[j] = x[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            for j in range(m):
                if not isfinite(x[j]):
                    fail = k
            if fail >= 0:
                break
            for j in range(2):
                if x[j] < 0.0:
                    x[j] = 0.0
                elif x[j] > 1.0:
                    x[j] = 1.0
            for j in range(m):
                out[k + 1, j] = x[j]
            flux[k + 1] = _plant_rhs(x, k1, cur[2 * k + 2], flow[2 * k + 2], kind, k_mt,
                                     c0, v_res, v_cell, eps, f_min, lamv, m)
    return out_arr, flux_arr, fail


cdef inline void _observer_rhs(double* x, double* d, double y, double cur, double flow,
                               double e1, double e2, double b1, double b2,
                               double inv_cell, const double[::1] lam, double varrho,
                               const double[::1] gain, int m) noexcept nogil:
    cdef double s = x[1]
    cdef double psi, innov, scale
    cdef int j
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    psi = 0.5 * (1.0 + s)
    innov = y - x[1]
    scale = varrho / psi
    d[0] = e1 * psi * x[2] + b1 * cur + gain[0] * innov
    d[1] = flow * inv_cell * (x[0] - x[1]) + e2 * psi * x[2] + b2 * cur + gain[1] * innov
    for j in range(2, m - 1):
        d[j] = lam[j - 2] * x[j + 1] + gain[j] * scale * innov
    d[m - 1] = gain[m - 1] * scale * innov


def observer_rk4(const double[::1] ts, const double[::1] ys, const double[::1] curs,
                 const double[::1] flows, x0, double dt, double c0, double v_res,
                 double v_cell, double eps, double f_min, lam, double varrho, gain):
    cdef Py_ssize_t n = ts.shape[0]
    cdef int m = len(x0)
    if m > MAXDIM:
        raise ValueError("state dimension exceeds kernel limit")
    cdef const double[::1] lamv = np.ascontiguousarray(lam, dtype=np.float64)
    if lamv.shape[0] == 0:
        lamv = np.zeros(1)
    cdef const double[::1] gv = np.ascontiguousarray(gain, dtype=np.float64)
    cdef double e1 = -1.0 / (c0 * v_res)
    cdef double e2 = -1.0 / (eps * c0 * v_cell)
    cdef double b1 = -1.0 / (c0 * v_res * f_min)
    cdef double b2 = -1.0 / (eps * c0 * v_cell * f_min)
    cdef double inv_cell = 1.0 / (eps * v_cell)
    out_arr = np.zeros((n, m))
    cdef double[:, ::1] out = out_arr
    cdef double x[MAXDIM]
    cdef double xs[MAXDIM]
    cdef double k1[MAXDIM]
    cdef double k2[MAXDIM]
    cdef double k3[MAXDIM]
    cdef double k4[MAXDIM]
    cdef Py_ssize_t i, sub, nsub
    cdef int j
    cdef double span, h, y, cur, flow
    cdef Py_ssize_t fail = -1
    for j in range(m):
        x[j] = x0[j]
        out[0, j] = x[j]
    with nogil:
        for i in range(n - 1):
            span = ts[i + 1] - ts[i]
            if span > 0.0:
                nsub = <Py_ssize_t>ceil(span / dt)
            else:
                nsub = 0
            y = ys[i]
            cur = curs[i]
            flow = flows[i]
            for sub in range(nsub):
                h = span / nsub
                _observer_rhs(x, k1, y, cur, flow, e1, e2, b1, b2, inv_cell, lamv,
                              varrho, gv, m)
                for j in range(m):
                    xs[j] = x[j] + 0.5 * h * k1[j]
                _observer_rhs(xs, k2, y, cur, flow, e1, e2, b1, b2, inv_cell, lamv,
                              varrho, gv, m)
                for j in range(m):
                    xs[j] = x[j] + 0.5 * h * k2[j]
                _observer_rhs(xs, k3, y, cur, flow, e1, e2, b1, b2, inv_cell, lamv,
                              varrho, gv, m)
                for j in range(m):
                    xs[j] = x[j] + h * k3[j]
                _observer_rhs(xs, k4, y, cur, flow, e1, e2, b1, b2, inv_cell, lamv,
                              varrho, gv, m)
                for j in range(m):
                    x[j] = x[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            for j in range(m):
                if not isfinite(x[j]):
                    fail = i
            if fail >= 0:
                break
            for j in range(m):
                out[i + 1, j] = x[j]
    return out_arr, fail


def jacobi_eigh(a, double rel_tol=1e-14, int max_sweeps=60):
    cdef Py_ssize_t n = a.shape[0]
    A_arr = np.array(a, dtype=np.float64, order="C", copy=True)
    V_arr = np.eye(n)
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] V = V_arr
    cdef double fro = 0.0
    cdef double off, apq, theta, t, c, s, akp, akq, apk, aqk, vkp, vkq
    cdef Py_ssize_t i, j, p, q, k
    cdef int sweep
    cdef int sweeps = -1
    with nogil:
        for i in range(n):
            for j in range(n):
                fro += A[i, j] * A[i, j]
        fro = sqrt(fro)
        for sweep in range(max_sweeps + 1):
            off = 0.0
            for i in range(n):
                for j in range(n):
                    if i != j:
                        off += A[i, j] * A[i, j]
            if sqrt(off) <= rel_tol * fro:
                sweeps = sweep
                break
            if sweep == max_sweeps:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    if apq == 0.0:
                        continue
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    if fabs(theta) > 1e150:
                        t = 0.5 / theta
                    elif theta >= 0.0:
                        t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                    else:
                        t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    for k in range(n):
                        akp = A[k, p]
                        akq = A[k, q]
                        A[k, p] = c * akp - s * akq
                        A[k, q] = s * akp + c * akq
                    for k in range(n):
                        apk = A[p, k]
                        aqk = A[q, k]
                        A[p, k] = c * apk - s * aqk
                        A[q, k] = s * apk + c * aqk
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    for k in range(n):
                        vkp = V[k, p]
                        vkq = V[k, q]
                        V[k, p] = c * vkp - s * vkq
                        V[k, q] = s * vkp + c * vkq
    w = np.array([A_arr[i, i] for i in range(n)])
    order = np.argsort(w, kind="stable")
    return w[order], V_arr[:, order], sweeps
