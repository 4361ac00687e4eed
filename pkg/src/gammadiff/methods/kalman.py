"""Constant-acceleration Kalman filter with a Rauch-Tung-Striebel backward pass."""

import numpy as np

from ..core import DerivativeEstimate

INIT_FIT_SAMPLES = 20
INIT_COV_SCALE = 1e3


def transition(dt):
    return np.array([[1.0, dt, 0.5 * dt * dt],
                     [0.0, 1.0, dt],
                     [0.0, 0.0, 1.0]])


def process_noise(q, dt):
    """Discretized continuous white-jerk noise with intensity ``q``."""
    return q * np.array([[dt**5 / 20, dt**4 / 8, dt**3 / 6],
                         [dt**4 / 8, dt**3 / 3, dt**2 / 2],
                         [dt**3 / 6, dt**2 / 2, dt]])


def initial_state(y, dt):
    """Quadratic least-squares fit of the first samples, as (pos, vel, acc) at t=0."""
    n = min(INIT_FIT_SAMPLES, y.size)
    t = np.arange(n) * dt
    deg = min(2, n - 1)
    coef = np.polynomial.polynomial.polyfit(t, y[:n], deg)
    coef = np.concatenate([coef, np.zeros(3 - coef.size)])
    x0 = np.array([coef[0], coef[1], 2.0 * coef[2]])
    var = max(float(np.var(y)), 1e-12)
    return x0, INIT_COV_SCALE * var * np.eye(3)


def kalman_filter(series, params):
    """Forward pass.

    Returns ``(filtered, predicted, filtered_cov, predicted_cov)`` with states
    stacked along the first axis; ``predicted[0]`` is the initial prior.
    """
    y = series.values
    dt = series.dt
    m = y.size
    F = transition(dt)
    Q = process_noise(params.q, dt)
    r = params.r

    xf = np.empty((m, 3))
    xp = np.empty((m, 3))
    Pf = np.empty((m, 3, 3))
    Pp = np.empty((m, 3, 3))
    x, P = initial_state(y, dt)
    for k in range(m):
        if k > 0:
            x = F @ x
            P = F @ P @ F.T + Q
        xp[k] = x
        Pp[k] = P
        s = P[0, 0] + r
        gain = P[:, 0] / s
        x = x + gain * (y[k] - x[0])
        P = P - np.outer(gain, P[0, :])
        P = 0.5 * (P + P.T)
        xf[k] = x
        Pf[k] = P
    return xf, xp, Pf, Pp


def rts_smooth(xf, xp, Pf, Pp, dt):
    F = transition(dt)
    m = xf.shape[0]
    xs = xf.copy()
    for k in range(m - 2, -1, -1):
        # C = Pf[k] F^T Pp[k+1]^{-1}; Pp symmetric, so solve on the transpose
        C = np.linalg.solve(Pp[k + 1], F @ Pf[k]).T
        xs[k] = xf[k] + C @ (xs[k + 1] - xp[k + 1])
    return xs


def kalman_diff(series, params):
    xf, xp, Pf, Pp = kalman_filter(series, params)
    xs = rts_smooth(xf, xp, Pf, Pp, series.dt)
    return DerivativeEstimate(xs[:, 0], xs[:, 1])
