"""Compiled adaptive Runge-Kutta shooting kernel.

Integrates -y'' + q y = lam y on [0, pi] for a piecewise linear q, together
with the lam-derivative (variational) solution and the running integral of
y**2.  Uses the Dormand-Prince 8(5,3) tableau shipped with scipy; stepping is
restarted at every node of q so each segment sees a smooth right-hand side.

State layout: (y, y', dy/dlam, dy'/dlam, int y^2); ``nvar`` selects the
leading 2, 4 or 5 components.
"""
import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NS])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ERR_EXP = -1.0 / 8.0
_RESCALE = 1e100

OK = 0
TOO_MANY_STEPS = 1
STEP_UNDERFLOW = 2


@njit(cache=True)
def _rhs(x, y, lam, x0, q0, slope, nvar, out):
    qm = q0 + slope * (x - x0) - lam
    out[0] = y[1]
    out[1] = qm * y[0]
    if nvar > 2:
        out[2] = y[3]
        out[3] = qm * y[2] - y[0]
    if nvar > 4:
        out[4] = y[0] * y[0]


@njit(cache=True)
def _scale(y, ynew, omega, rtol, atol, nvar, out):
    # Amplitude-based scaling keeps the tolerance meaningful at nodes of y.
    a0 = max(abs(y[0]) * omega, abs(y[1]), abs(ynew[0]) * omega, abs(ynew[1]))
    out[0] = atol + rtol * a0 / omega
    out[1] = atol + rtol * a0
    if nvar > 2:
        a1 = max(abs(y[2]) * omega, abs(y[3]), abs(ynew[2]) * omega, abs(ynew[3]))
        out[2] = atol + rtol * a1 / omega
        out[3] = atol + rtol * a1
    if nvar > 4:
        out[4] = atol + rtol * max(abs(y[4]), abs(ynew[4]))


@njit(cache=True)
def shoot(lam, y0, forward, xs, qs, nvar, rtol, atol, max_steps):
    """Integrate across all nodes of (xs, qs).

    Returns ``(y_end, log_scale, status, nsteps)``; the true solution is
    ``y_end[:4] * exp(log_scale)`` and ``y_end[4] * exp(2 * log_scale)``.
    """
    y = y0[:nvar].copy()
    log_scale = 0.0
    omega = np.sqrt(max(abs(lam) + np.max(np.abs(qs)), 1.0))
    K = np.zeros((_NS + 1, nvar))
    ytmp = np.zeros(nvar)
    ynew = np.zeros(nvar)
    sc = np.zeros(nvar)
    e3 = np.zeros(nvar)
    e5 = np.zeros(nvar)
    nseg = xs.shape[0] - 1
    h_abs = min(0.5 / omega, xs[-1] - xs[0])
    nsteps = 0
    for jj in range(nseg):
        seg = jj if forward else nseg - 1 - jj
        xa = xs[seg]
        xb = xs[seg + 1]
        slope = (qs[seg + 1] - qs[seg]) / (xb - xa)
        if forward:
            t, t_end, direction = xa, xb, 1.0
        else:
            t, t_end, direction = xb, xa, -1.0
        _rhs(t, y, lam, xa, qs[seg], slope, nvar, K[0])
        while direction * (t_end - t) > 0.0:
            if nsteps >= max_steps:
                return y, log_scale, TOO_MANY_STEPS, nsteps
            min_step = 10.0 * np.abs(np.nextafter(t, direction * np.inf) - t)
            accepted = False
            rejected = False
            while not accepted:
                if h_abs < min_step:
                    return y, log_scale, STEP_UNDERFLOW, nsteps
                h = h_abs * direction
                t_new = t + h
                if direction * (t_new - t_end) > 0.0:
                    t_new = t_end
                h = t_new - t
                h_abs = abs(h)
                for s in range(1, _NS):
                    for i in range(nvar):
                        acc = 0.0
                        for r in range(s):
                            acc += _A[s, r] * K[r, i]
                        ytmp[i] = y[i] + h * acc
                    _rhs(t + _C[s] * h, ytmp, lam, xa, qs[seg], slope, nvar, K[s])
                for i in range(nvar):
                    acc = 0.0
                    for r in range(_NS):
                        acc += _B[r] * K[r, i]
                    ynew[i] = y[i] + h * acc
                _rhs(t_new, ynew, lam, xa, qs[seg], slope, nvar, K[_NS])
                _scale(y, ynew, omega, rtol, atol, nvar, sc)
                n5 = 0.0
                n3 = 0.0
                for i in range(nvar):
                    a5 = 0.0
                    a3 = 0.0
                    for r in range(_NS + 1):
                        a5 += _E5[r] * K[r, i]
                        a3 += _E3[r] * K[r, i]
                    e5[i] = a5 / sc[i]
                    e3[i] = a3 / sc[i]
                    n5 += e5[i] * e5[i]
                    n3 += e3[i] * e3[i]
                if n5 == 0.0 and n3 == 0.0:
                    err = 0.0
                else:
                    err = h_abs * n5 / np.sqrt((n5 + 0.01 * n3) * nvar)
                if err < 1.0:
                    if err == 0.0:
                        factor = _MAX_FACTOR
                    else:
                        factor = min(_MAX_FACTOR, _SAFETY * err ** _ERR_EXP)
                    if rejected:
                        factor = min(1.0, factor)
                    next_h = h_abs * factor
                    accepted = True
                else:
                    h_abs *= max(_MIN_FACTOR, _SAFETY * err ** _ERR_EXP)
                    rejected = True
            nsteps += 1
            t = t_new
            for i in range(nvar):
                y[i] = ynew[i]
                K[0, i] = K[_NS, i]
            h_abs = next_h
            big = 0.0
            for i in range(min(nvar, 4)):
                big = max(big, abs(y[i]))
            if big > _RESCALE:
                # Exponentially growing solutions for lam << 0; the system is linear.
                for i in range(min(nvar, 4)):
                    y[i] /= big
                    K[0, i] /= big
                if nvar > 4:
                    y[4] /= big * big
                    K[0, 4] /= big * big
                log_scale += np.log(big)
    return y, log_scale, OK, nsteps


@njit(cache=True)
def shoot_many(lams, y0s, forward, xs, qs, nvar, rtol, atol, max_steps):
    """Vectorized :func:`shoot`; results are rescaled, only signs are meaningful."""
    n = lams.shape[0]
    out = np.zeros((n, nvar))
    status = np.zeros(n, dtype=np.int64)
    for k in range(n):
        y, _, st, _ = shoot(lams[k], y0s[k], forward, xs, qs, nvar, rtol, atol, max_steps)
        out[k, :] = y
        status[k] = st
    return out, status
