"""Savitzky-Golay derivative with Gaussian smoothing of the result."""

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy import signal

from ..core import DerivativeEstimate, gaussian_smooth, trapezoidal_integral
from ..errors import InvalidInputError


def _interior_derivative_weights(half, polyorder):
    # least-squares derivative at the window centre, per sample step
    u = np.arange(-half, half + 1) / half
    vander = legendre.legvander(u, polyorder)
    coef_map = np.linalg.pinv(vander)  # (polyorder+1, window)
    dbasis = legendre.legvander(np.zeros(1), polyorder - 1) @ _legder_matrix(polyorder).T
    return (dbasis @ coef_map)[0] / half


# up to this half-width the edge fits use exact per-sample weights; beyond it
# the O(half**2) weight tables are replaced by cumulative normal equations
EXACT_EDGE_MAX_HALF = 128


@lru_cache(maxsize=64)
def _edge_weights(half, polyorder):
    """Weight rows for the shrunken left-edge fits, shape ``(half, 2 * half)``.

    Row ``k`` holds the least-squares derivative weights (per sample step)
    for sample ``k`` fitted on samples ``0 .. k + half``; the remaining
    entries are zero.  Each window gets a Legendre basis scaled to its own
    span, so the fits stay well conditioned.
    """
    ks = np.arange(half)
    npts = ks + half + 1
    deg = min(polyorder, half)  # half + 1 points always admit degree half
    scale = 0.5 * (npts - 1.0)
    idx = np.arange(2 * half)
    u = (idx[None, :] - scale[:, None]) / scale[:, None]
    inside = idx[None, :] < npts[:, None]
    vander = legendre.legvander(np.where(inside, u, 0.0), deg) * inside[..., None]
    # zero rows leave each fit unchanged; pinv of the stack solves all at once
    coef_map = np.linalg.pinv(vander)  # (half, deg + 1, 2 * half)
    uk = (ks - scale) / scale
    dbasis = legendre.legvander(uk, deg - 1) @ _legder_matrix(deg).T  # (half, deg + 1)
    weights = np.einsum("kj,kji->ki", dbasis, coef_map) / scale[:, None]
    weights.setflags(write=False)
    return weights


def _left_edge_derivative(y, half, polyorder):
    """Derivative (per sample step) at samples 0..half-1 from shrunken windows.

    Sample ``k`` is fitted on ``y[0 : k + half + 1]``.  Small windows use
    exact weights; wide ones build normal equations from cumulative sums in
    a fixed Legendre basis on ``[-1, 1)``, which loses a few digits to
    conditioning but keeps the cost linear in the window.
    """
    if half <= EXACT_EDGE_MAX_HALF:
        return _edge_weights(half, polyorder) @ y[:2 * half]
    n_pts = 2 * half
    idx = np.arange(n_pts)
    u = (idx - half) / half
    basis = legendre.legvander(u, polyorder)
    dbasis = legendre.legvander(u, polyorder - 1) @ _legder_matrix(polyorder).T / half
    gram = np.cumsum(basis[:, :, None] * basis[:, None, :], axis=0)
    moments = np.cumsum(basis * y[:n_pts, None], axis=0)

    out = np.empty(half)
    ks = np.arange(half)
    full = ks + half + 1 >= polyorder + 1
    if np.any(full):
        kk = ks[full]
        coef = np.linalg.solve(gram[kk + half], moments[kk + half][..., None])[..., 0]
        out[kk] = np.einsum("ij,ij->i", dbasis[kk], coef)
    for k in ks[~full]:
        # too few points for the requested degree: interpolate instead
        npts = k + half + 1
        uu = u[:npts]
        c = legendre.legfit(uu, y[:npts], npts - 1)
        out[k] = legendre.legval(u[k], legendre.legder(c)) / half
    return out


def _legder_matrix(polyorder):
    # maps Legendre coefficients (degree <= polyorder) to those of the derivative
    return np.array([legendre.legder(np.eye(polyorder + 1)[j]) for j in range(polyorder + 1)])


def raw_savgol_derivative(y, dt, window, polyorder):
    """Local polynomial derivative, centred windows shrinking at the edges."""
    y = np.asarray(y, dtype=float)
    m = y.size
    half = (window - 1) // 2
    d = np.empty(m)
    weights = _interior_derivative_weights(half, polyorder)
    # correlate: d[k] = sum_j w[j] * y[k - half + j]
    d[half:m - half] = signal.convolve(y, weights[::-1], mode="valid")
    d[:half] = _left_edge_derivative(y, half, polyorder)
    d[m - half:] = -_left_edge_derivative(y[::-1], half, polyorder)[::-1]
    return d / dt


def savgol_diff(series, params):
    m = len(series)
    if params.window > m:
        raise InvalidInputError(f"window {params.window} exceeds series length {m}")
    if params.smooth_window > m:
        raise InvalidInputError(f"smooth_window {params.smooth_window} exceeds series length {m}")
    raw = raw_savgol_derivative(series.values, series.dt, params.window, params.polyorder)
    dxdt = gaussian_smooth(raw, params.smooth_window)
    integral = trapezoidal_integral(dxdt, series.dt, 0.0)
    x_hat = integral + np.mean(series.values - integral)
    return DerivativeEstimate(x_hat, dxdt)
