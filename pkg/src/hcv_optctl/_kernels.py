"""Compiled kernels: Dormand-Prince 5(4) stepping, model and adjoint right-hand sides.

Parameter vector layout (``q``)::

    0 t_max  1 s  2 d  3 r  4 p  5 k  6 beta  7 delta  8 c  9 t_end
    10 eps  11 rho  12 w_V  13 w_I  14 w_T  15 w_eps  16 w_rho

Forward state is ``[T, I, V_I, V_NI, J]`` with ``J`` the accumulated running
cost. Adjoint state is ``[lam_T, lam_I, lam_V_I, lam_V_NI, G_eps, G_rho]``.
"""

import numpy as np
from numba import njit

OK = 0
STEP_UNDERFLOW = 1
BLOW_UP = 2
NEGATIVE_STATE = 3
TOO_MANY_STEPS = 4

N_Q = 17

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# difference between 5th- and 4th-order weights
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
# PI controller exponents (Hairer, Norsett & Wanner II.4, beta = 0.04)
PI_BETA = 0.04
PI_ALPHA = 0.2 - 0.75 * PI_BETA


@njit(cache=True)
def _decay(q, t):
    dt = t - q[9]
    if dt <= 0.0:
        return 1.0
    return np.exp(-q[5] * dt)


@njit(cache=True)
def model_rhs(t, y, aux, out):
    q = aux
    T, I, V, W = y[0], y[1], y[2], y[3]
    dec = _decay(q, t)
    eps = q[10] * dec
    rho = q[11] * dec
    growth = q[3] * (1.0 - (T + I) / q[0])
    infection = q[6] * V * T
    production = (1.0 - eps) * q[4] * I
    out[0] = q[1] + growth * T - q[2] * T - infection
    out[1] = infection + growth * I - q[7] * I
    out[2] = (1.0 - rho) * production - q[8] * V
    out[3] = rho * production - q[8] * W
    load = V + W
    out[4] = (
        q[12] * load * load
        + q[13] * I * I
        - q[14] * T * T
        + q[15] * q[10] * q[10]
        + q[16] * q[11] * q[11]
    )


@njit(cache=True)
def hermite(ts, ys, f0, f1, n, t, m, out):
    """Cubic Hermite interpolation of the first ``m`` components at ``t``."""
    idx = np.searchsorted(ts[: n + 1], t, side="right") - 1
    if idx < 0:
        idx = 0
    if idx > n - 1:
        idx = n - 1
    ta = ts[idx]
    h = ts[idx + 1] - ta
    th = (t - ta) / h
    th2 = th * th
    th3 = th2 * th
    h00 = 2.0 * th3 - 3.0 * th2 + 1.0
    h10 = th3 - 2.0 * th2 + th
    h01 = -2.0 * th3 + 3.0 * th2
    h11 = th3 - th2
    for i in range(m):
        out[i] = (
            h00 * ys[idx, i]
            + h10 * h * f0[idx, i]
            + h01 * ys[idx + 1, i]
            + h11 * h * f1[idx, i]
        )


@njit(cache=True)
def adjoint_rhs(t, y, aux, out):
    """Costate dynamics ``-dH/dx`` and control sensitivities ``-dH/du``.

    Integrated backward in time, so the accumulators ``G`` pick up
    ``int dH/du dt`` over the current interval.
    """
    q, ts, ys, f0, f1, n = aux
    x = np.empty(4)
    hermite(ts, ys, f0, f1, n, t, 4, x)
    T, I, V, W = x[0], x[1], x[2], x[3]
    lT, lI, lV, lW = y[0], y[1], y[2], y[3]

    t_max, r, p, beta, c = q[0], q[3], q[4], q[6], q[8]
    dec = _decay(q, t)
    eps = q[10] * dec
    rho = q[11] * dec
    a = r / t_max
    growth = r * (1.0 - (T + I) / t_max)
    load = V + W

    # dL/dx + J^T lam
    hT = (
        -2.0 * q[14] * T
        + lT * (growth - a * T - q[2] - beta * V)
        + lI * (beta * V - a * I)
    )
    hI = (
        2.0 * q[13] * I
        - lT * a * T
        + lI * (growth - a * I - q[7])
        + (lV * (1.0 - rho) + lW * rho) * (1.0 - eps) * p
    )
    hV = 2.0 * q[12] * load - lT * beta * T + lI * beta * T - lV * c
    hW = 2.0 * q[12] * load - lW * c
    out[0] = -hT
    out[1] = -hI
    out[2] = -hV
    out[3] = -hW

    # dH/d(eps), dH/d(rho); the penalty acts on the raw control value
    d_eps = 2.0 * q[15] * q[10] - dec * p * I * ((1.0 - rho) * lV + rho * lW)
    d_rho = 2.0 * q[16] * q[11] + dec * (1.0 - eps) * p * I * (lW - lV)
    out[4] = -d_eps
    out[5] = -d_rho


FORWARD = 0
ADJOINT = 1


@njit(cache=True)
def _eval(kind, t, y, aux, out):
    if kind == FORWARD:
        model_rhs(t, y, aux[0], out)
    else:
        adjoint_rhs(t, y, aux, out)


@njit(cache=True)
def _grow2(a, rows):
    b = np.empty((rows, a.shape[1]))
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _grow1(a, rows):
    b = np.empty(rows)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _error_norm(err, y, y_new, rtol, atol):
    acc = 0.0
    m = err.shape[0]
    for i in range(m):
        sc = atol[i] + rtol * max(abs(y[i]), abs(y_new[i]))
        e = err[i] / sc
        acc += e * e
    return np.sqrt(acc / m)


@njit(cache=True)
def dopri_segment(
    kind, aux, t0, t1, rtol, atol, max_step, h, n_nonneg, ts, ys, f0, f1, n, max_steps
):
    """Integrate from ``ts[n]``/``ys[n]`` (at ``t0``) to ``t1``, appending steps.

    ``kind`` selects the forward model or the adjoint right-hand side; ``aux``
    is ``(q, ts, ys, f0, f1, n)`` where the arrays carry the forward
    trajectory for the adjoint (ignored by the forward model). ``t1`` may lie
    before ``t0``. At most ``max_steps`` steps may be stored. Returns
    ``(status, t_fail, h_next, n, ts, ys, f0, f1)``.
    """
    m = ys.shape[1]
    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    h = min(abs(h), max_step, span)

    y = ys[n].copy()
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    k5 = np.empty(m)
    k6 = np.empty(m)
    k7 = np.empty(m)
    tmp = np.empty(m)
    y_new = np.empty(m)
    err = np.empty(m)

    t = t0
    _eval(kind, t, y, aux, k1)
    err_old = 1e-4
    saw_nonfinite = False

    while direction * (t1 - t) > 0.0:
        min_step = 16.0 * np.finfo(np.float64).eps * max(abs(t), 1.0)
        if h < min_step:
            status = BLOW_UP if saw_nonfinite else STEP_UNDERFLOW
            return status, t, h, n, ts, ys, f0, f1

        last = False
        if h >= abs(t1 - t) * (1.0 - 1e-12):
            h = abs(t1 - t)
            last = True
        hs = direction * h

        for i in range(m):
            tmp[i] = y[i] + hs * A21 * k1[i]
        _eval(kind, t + C2 * hs, tmp, aux, k2)
        for i in range(m):
            tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
        _eval(kind, t + C3 * hs, tmp, aux, k3)
        for i in range(m):
            tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _eval(kind, t + C4 * hs, tmp, aux, k4)
        for i in range(m):
            tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _eval(kind, t + C5 * hs, tmp, aux, k5)
        for i in range(m):
            tmp[i] = y[i] + hs * (
                A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]
            )
        t_new = t1 if last else t + hs
        _eval(kind, t_new, tmp, aux, k6)
        for i in range(m):
            y_new[i] = y[i] + hs * (
                B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]
            )
        _eval(kind, t_new, y_new, aux, k7)
        for i in range(m):
            err[i] = hs * (
                E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]
            )
        err_norm = _error_norm(err, y, y_new, rtol, atol)

        if not np.isfinite(err_norm):
            saw_nonfinite = True
            h *= FAC_MIN
            continue

        if err_norm > 1.0:
            h *= max(FAC_MIN, SAFETY * err_norm ** -0.2)
            continue

        # accepted
        if n >= max_steps:
            return TOO_MANY_STEPS, t, h, n, ts, ys, f0, f1
        if n + 1 >= ts.shape[0]:
            rows = 2 * ts.shape[0]
            ts = _grow1(ts, rows)
            ys = _grow2(ys, rows)
            f0 = _grow2(f0, rows)
            f1 = _grow2(f1, rows)
        ts[n + 1] = t_new
        for i in range(m):
            ys[n + 1, i] = y_new[i]
            f0[n, i] = k1[i]
            f1[n, i] = k7[i]
        n += 1

        for i in range(n_nonneg):
            if y_new[i] < -10.0 * atol[i]:
                return NEGATIVE_STATE, t_new, h, n, ts, ys, f0, f1

        if err_norm == 0.0:
            fac = FAC_MAX
        else:
            fac = SAFETY * err_norm ** -PI_ALPHA * err_old**PI_BETA
            fac = min(FAC_MAX, max(FAC_MIN, fac))
        err_old = max(err_norm, 1e-4)
        h_prop = min(h * fac, max_step)

        t = t_new
        for i in range(m):
            y[i] = y_new[i]
            k1[i] = k7[i]
        if not last:
            h = h_prop
        else:
            return OK, t, h_prop, n, ts, ys, f0, f1

    return OK, t, h, n, ts, ys, f0, f1


@njit(cache=True)
def forward_solve(seg_mesh, seg_values, y0, q, rtol, atol, max_step, h0, max_steps):
    """Integrate the cost-augmented model across piecewise-constant segments.

    Returns ``(status, t_fail, n, ts, ys, f0, f1)`` with ``n`` steps stored.
    """
    m = y0.shape[0]
    cap = 256
    ts = np.empty(cap + 1)
    ys = np.empty((cap + 1, m))
    f0 = np.empty((cap, m))
    f1 = np.empty((cap, m))
    ts[0] = seg_mesh[0]
    ys[0] = y0
    n = 0
    h = h0
    qq = q.copy()
    empty = np.empty((0, 4))
    aux = (qq, np.empty(0), empty, empty, empty, 0)
    for j in range(seg_values.shape[0]):
        qq[10] = seg_values[j, 0]
        qq[11] = seg_values[j, 1]
        status, t_fail, h, n, ts, ys, f0, f1 = dopri_segment(
            FORWARD, aux, seg_mesh[j], seg_mesh[j + 1], rtol, atol, max_step, h, 4,
            ts, ys, f0, f1, n, max_steps,
        )
        if status != OK:
            return status, t_fail, n, ts, ys, f0, f1
    return OK, seg_mesh[-1], n, ts, ys, f0, f1


@njit(cache=True)
def adjoint_solve(
    seg_mesh, seg_values, q, ts, ys, f0, f1, n, rtol, atol, max_step, h0, max_steps
):
    """Backward costate sweep from ``lam(horizon) = 0``.

    Returns ``(status, t_fail, grad, lam0)`` where ``grad[j]`` is
    ``(dJ/d eps_j, dJ/d rho_j)``.
    """
    n_seg = seg_values.shape[0]
    grad = np.zeros((n_seg, 2))
    cap = 256
    bts = np.empty(cap + 1)
    bys = np.zeros((cap + 1, 6))
    bf0 = np.empty((cap, 6))
    bf1 = np.empty((cap, 6))
    lam = np.zeros(4)
    h = h0
    qq = q.copy()
    for j in range(n_seg - 1, -1, -1):
        qq[10] = seg_values[j, 0]
        qq[11] = seg_values[j, 1]
        bts[0] = seg_mesh[j + 1]
        for i in range(4):
            bys[0, i] = lam[i]
        bys[0, 4] = 0.0
        bys[0, 5] = 0.0
        aux = (qq, ts, ys, f0, f1, n)
        status, t_fail, h, nb, bts, bys, bf0, bf1 = dopri_segment(
            ADJOINT, aux, seg_mesh[j + 1], seg_mesh[j], rtol, atol, max_step, h, 0,
            bts, bys, bf0, bf1, 0, max_steps,
        )
        if status != OK:
            return status, t_fail, grad, lam
        for i in range(4):
            lam[i] = bys[nb, i]
        grad[j, 0] = bys[nb, 4]
        grad[j, 1] = bys[nb, 5]
    return OK, seg_mesh[0], grad, lam
