"""Pure-Python fallback for the compiled kernels in ``_ckernels.pyx``.

Every function here mirrors its Cython twin operation for operation, so
both backends round identically on IEEE-754 doubles.  Keep them in sync.
"""
import math

import numpy as np

KIND_NONE = 0
KIND_LINEAR = 1
KIND_PARAMETRIC = 2


def _plant_rhs(x, d, cur, flow, kind, k_mt, c0, v_res, v_cell, eps, f_min, lam, m):
    soc = x[0]
    soc_cell = x[1]
    if kind == KIND_LINEAR:
        qx = k_mt * c0 * soc_cell
    elif kind == KIND_PARAMETRIC:
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


def plant_rk4(t, cur, flow, x0, kind, k_mt, c0, v_res, v_cell, eps, f_min, lam):
    """Fixed-step RK4 over the grid ``t`` with inputs sampled at half steps.

    ``cur`` and ``flow`` have length ``2 * (len(t) - 1) + 1``: entry ``2k`` is
    the value at ``t[k]`` and ``2k + 1`` the value at the step midpoint.
    Returns ``(states, flux, fail_index)``; ``fail_index`` is -1 on success,
    otherwise the grid index whose step went non-finite.
    """
    n = len(t)
    m = len(x0)
    lam = [float(v) for v in lam]
    out = np.zeros((n, m))
    flux = np.zeros(n)
    x = [float(v) for v in x0]
    xs = [0.0] * m
    k1 = [0.0] * m
    k2 = [0.0] * m
    k3 = [0.0] * m
    k4 = [0.0] * m
    args = (kind, k_mt, c0, v_res, v_cell, eps, f_min, lam, m)
    out[0, :] = x
    flux[0] = _plant_rhs(x, k1, cur[0], flow[0], *args)
    for k in range(n - 1):
        h = t[k + 1] - t[k]
        _plant_rhs(x, k1, cur[2 * k], flow[2 * k], *args)
        for j in range(m):
            xs[j] = x[j] + 0.5 * h * k1[j]
        _plant_rhs(xs, k2, cur[2 * k + 1], flow[2 * k + 1], *args)
        for j in range(m):
            xs[j] = x[j] + 0.5 * h * k2[j]
        _plant_rhs(xs, k3, cur[2 * k + 1], flow[2 * k + 1], *args)
        for j in range(m):
            xs[j] = x[j] + h * k3[j]
        _plant_rhs(xs, k4, cur[2 * k + 2], flow[2 * k + 2], *args)
        for j in range(m):
            x[j] = x[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(m):
            if not math.isfinite(x[j]):
                return out, flux, k
        for j in range(2):
            if x[j] < 0.0:
                x[j] = 0.0
            elif x[j] > 1.0:
                x[j] = 1.0
        out[k + 1, :] = x
        flux[k + 1] = _plant_rhs(x, k1, cur[2 * k + 2], flow[2 * k + 2], *args)
    return out, flux, -1


def _observer_rhs(x, d, y, cur, flow, e1, e2, b1, b2, inv_cell, lam, varrho, gain, m):
    s = x[1]
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


def observer_rk4(ts, ys, curs, flows, x0, dt, c0, v_res, v_cell, eps, f_min, lam,
                 varrho, gain):
    """Integrate the augmented observer across a sampled measurement stream.

    Measurements, current and flow are held constant between samples.
    Returns ``(states, fail_index)`` with one state row per sample time.
    """
    n = len(ts)
    m = len(x0)
    lam = [float(v) for v in lam]
    gain = [float(v) for v in gain]
    e1 = -1.0 / (c0 * v_res)
    e2 = -1.0 / (eps * c0 * v_cell)
    b1 = -1.0 / (c0 * v_res * f_min)
    b2 = -1.0 / (eps * c0 * v_cell * f_min)
    inv_cell = 1.0 / (eps * v_cell)
    out = np.zeros((n, m))
    x = [float(v) for v in x0]
    xs = [0.0] * m
    k1 = [0.0] * m
    k2 = [0.0] * m
    k3 = [0.0] * m
    k4 = [0.0] * m
    args = (e1, e2, b1, b2, inv_cell, lam, varrho, gain, m)
    out[0, :] = x
    for i in range(n - 1):
        span = ts[i + 1] - ts[i]
        nsub = int(math.ceil(span / dt)) if span > 0.0 else 0
        y = ys[i]
        cur = curs[i]
        flow = flows[i]
        for _ in range(nsub):
            h = span / nsub
            _observer_rhs(x, k1, y, cur, flow, *args)
            for j in range(m):
                xs[j] = x[j] + 0.5 * h * k1[j]
            _observer_rhs(xs, k2, y, cur, flow, *args)
            for j in range(m):
                xs[j] = x[j] + 0.5 * h * k2[j]
            _observer_rhs(xs, k3, y, cur, flow, *args)
            for j in range(m):
                xs[j] = x[j] + h * k3[j]
            _observer_rhs(xs, k4, y, cur, flow, *args)
            for j in range(m):
                x[j] = x[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(m):
            if not math.isfinite(x[j]):
                return out, i
        out[i + 1, :] = x
    return out, -1


def jacobi_eigh(a, rel_tol=1e-14, max_sweeps=60):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors, sweeps)`` with eigenvalues in
    ascending order and eigenvectors as columns.  ``sweeps`` is -1 when the
    off-diagonal mass did not fall below ``rel_tol * ||a||_F``.
    """
    n = a.shape[0]
    A = [[float(a[i, j]) for j in range(n)] for i in range(n)]
    V = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += A[i][j] * A[i][j]
    fro = math.sqrt(fro)
    sweeps = -1
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += A[i][j] * A[i][j]
        if math.sqrt(off) <= rel_tol * fro:
            sweeps = sweep
            break
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p][q]
                if apq == 0.0:
                    continue
                theta = (A[q][q] - A[p][p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = A[k][p]
                    akq = A[k][q]
                    A[k][p] = c * akp - s * akq
                    A[k][q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p][k]
                    aqk = A[q][k]
                    A[p][k] = c * apk - s * aqk
                    A[q][k] = s * apk + c * aqk
                A[p][q] = 0.0
                A[q][p] = 0.0
                for k in range(n):
                    vkp = V[k][p]
                    vkq = V[k][q]
                    V[k][p] = c * vkp - s * vkq
                    V[k][q] = s * vkp + c * vkq
    w = np.array([A[i][i] for i in range(n)])
    vecs = np.array(V)
    order = np.argsort(w, kind="stable")
    return w[order], vecs[:, order], sweeps
