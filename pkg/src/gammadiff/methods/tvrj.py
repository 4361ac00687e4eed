"""Total-variation regularized jerk (TVRJ) derivative.

For a window of ``n`` samples the solver minimizes

    F(x) = ||y - x||_2 + (gamma_tv / n) * sum_k |D3(dx)_k| / dt**3

where ``dx = diff(x) / dt`` is the forward-difference derivative of the
smoothed position ``x``.  Because ``D3(dx) = D4(x) / dt`` this is
``||y - x||_2 + lam * ||D4 x||_1`` with ``lam = gamma_tv / (n * dt**4)``.
With ``gamma_tv = 0`` the minimizer is ``x = y`` and the derivative is the
plain finite difference.

The problem is solved by majorize-minimize: both norms are bounded above
by quadratics that touch them at the current iterate, and the quadratic
majorizer is minimized in closed form with one banded solve.  Each step
can only lower ``F``.  Long series are cut into overlapping windows that
are solved independently and cross-faded.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy import signal
from scipy.linalg import solveh_banded

from ..core import DerivativeEstimate, finite_difference
from ..errors import ConvergenceError, InvalidInputError

WINDOW = 1000
OVERLAP = 0.5
TOL = 1e-7
MAX_ITER = 10_000
MIN_LENGTH = 8
_D4 = np.array([1.0, -4.0, 6.0, -4.0, 1.0])


@dataclass
class WindowSolution:
    x: np.ndarray
    objective: list = field(default_factory=list)
    converged: bool = True
    residual: float = 0.0
    iterations: int = 0


def d4(x):
    return np.correlate(x, _D4, mode="valid")


def d4t(z):
    # adjoint of d4: full convolution with the (symmetric) stencil
    return np.convolve(z, _D4, mode="full")


def _d4d4t_banded(n_rows):
    """Upper banded storage of D4 D4^T (size n_rows), as used by solveh_banded."""
    auto = np.correlate(_D4, _D4, mode="full")[4:]  # 70, -56, 28, -8, 1
    ab = np.zeros((5, n_rows))
    for offset in range(5):
        ab[4 - offset, offset:] = auto[offset]
    return ab


def objective(y, x, lam):
    return float(np.linalg.norm(y - x) + lam * np.sum(np.abs(d4(x))))


def penalty_weight(gamma_tv, n, dt):
    return gamma_tv / (n * dt**4)


def identity_threshold(y, dt):
    """Largest ``gamma_tv`` proven to leave ``x = y`` optimal.

    ``x = y`` is a minimizer when ``lam * ||D4^T s|| <= 1`` for a subgradient
    ``s`` of ``||D4 y||_1``; using ``s = sign(D4 y)`` gives a safe bound.
    Returns ``inf`` when ``D4 y`` vanishes (any weight keeps the data).
    """
    y = np.asarray(y, dtype=float)
    dy = d4(y)
    # fourth differences at rounding level count as zero (exact cubics)
    floor = 64 * np.finfo(float).eps * max(np.max(np.abs(y)), np.finfo(float).tiny)
    s = np.where(np.abs(dy) > floor, np.sign(dy), 0.0)
    v = np.linalg.norm(d4t(s))
    if v == 0:
        return np.inf
    return y.size * dt**4 / v


def cubic_fit(y):
    u = np.linspace(-1.0, 1.0, y.size)
    return legendre.legval(u, legendre.legfit(u, y, 3))


def collapse_threshold(y, dt):
    """Smallest ``gamma_tv`` proven to make the least-squares cubic optimal.

    With ``r = y - cubic_fit(y)`` (orthogonal to cubics) the certificate
    ``s`` solving ``D4^T s = r`` is a four-fold running sum of ``r``; the cubic
    is a minimizer when ``lam * ||r|| >= max|s|``.  Returns 0 when ``y`` is
    itself a cubic.
    """
    y = np.asarray(y, dtype=float)
    r = y - cubic_fit(y)
    rnorm = np.linalg.norm(r)
    if rnorm <= 64 * np.finfo(float).eps * np.linalg.norm(y):
        return 0.0
    s = signal.lfilter([1.0], _D4, r)[: y.size - 4]
    return float(np.max(np.abs(s)) / rnorm * y.size * dt**4)


def _line_search_start(y, lam):
    """Exact minimizer of F along ``y - t * D4^T sign(D4 y)``, t >= 0."""
    dy = d4(y)
    v = d4t(np.sign(dy))
    dv = d4(v)
    vnorm = np.linalg.norm(v)
    slope = vnorm - lam * vnorm**2
    with np.errstate(divide="ignore", invalid="ignore"):
        bps = dy / dv
    ok = np.isfinite(bps) & (bps > 0)
    order = np.argsort(bps[ok])
    bps_sorted = bps[ok][order]
    slopes = slope + 2.0 * lam * np.cumsum(np.abs(dv[ok][order]))
    idx = int(np.searchsorted(slopes, 0.0))
    t = bps_sorted[min(idx, bps_sorted.size - 1)] if bps_sorted.size else 0.0
    return y - t * v


def solve_window(y, dt, gamma_tv, tol=TOL, max_iter=MAX_ITER):
    """Minimize the TVRJ objective on one window; returns a :class:`WindowSolution`."""
    y = np.asarray(y, dtype=float)
    n = y.size
    lam = penalty_weight(gamma_tv, n, dt)
    if gamma_tv == 0 or gamma_tv <= identity_threshold(y, dt):
        return WindowSolution(y.copy(), [objective(y, y, lam)])

    if gamma_tv >= collapse_threshold(y, dt):
        x = cubic_fit(y)
        return WindowSolution(x, [objective(y, x, lam)])

    dy = d4(y)
    x = _line_search_start(y, lam)
    f = objective(y, x, lam)
    sol = WindowSolution(x, [f])
    gram = _d4d4t_banded(n - 4)
    scale = max(np.linalg.norm(y), np.finfo(float).tiny)
    for it in range(1, max_iter + 1):
        r = max(np.linalg.norm(y - x), np.finfo(float).tiny * scale)
        # |u| <= u^2 / (2|u_k|) + |u_k| / 2 and the same for ||y - x||; the
        # minimizer of the bound is x = y - D4^T z with z from a banded solve
        ab = gram.copy()
        ab[4] += np.abs(d4(x)) / (lam * r)
        z = solveh_banded(ab, dy, check_finite=False)
        x_new = y - d4t(z)
        f_new = objective(y, x_new, lam)
        step = np.linalg.norm(x_new - x) / scale
        sol.iterations = it
        sol.residual = step
        if f_new > f:
            # rounding-level increase: the previous iterate is as good as it gets
            return sol
        decrease = (f - f_new) / max(f_new, np.finfo(float).tiny)
        x, f = x_new, f_new
        sol.x = x
        sol.objective.append(f)
        if step < tol and decrease < tol:
            return sol
    sol.converged = False
    return sol


def window_starts(m, window=WINDOW, overlap=OVERLAP):
    if m <= window:
        return [0]
    step = max(1, int(round(window * (1.0 - overlap))))
    count = int(np.ceil((m - window) / step)) + 1
    return sorted(set(int(round(s)) for s in np.linspace(0, m - window, count)))


def _blend_weights(n, ramp, first, last):
    i = np.arange(n, dtype=float)
    w = np.ones(n)
    if not first:
        w = np.minimum(w, i / ramp)
    if not last:
        w = np.minimum(w, (n - 1 - i) / ramp)
    return w


def tvrj_diff(series, params, window=WINDOW, overlap=OVERLAP, tol=TOL, max_iter=MAX_ITER):
    """TVRJ derivative; solves independent overlapping windows for long series.

    Raises :class:`ConvergenceError` (carrying the blended last iterate as a
    :class:`DerivativeEstimate`) when any window hits ``max_iter``.
    """
    y = series.values
    m = y.size
    dt = series.dt
    if m < MIN_LENGTH:
        raise InvalidInputError(f"TVRJ needs at least {MIN_LENGTH} samples, got {m}")
    window = max(int(window), MIN_LENGTH)
    starts = window_starts(m, window, overlap)
    width = min(window, m)
    ramp = max(1.0, overlap * width)

    x_acc = np.zeros(m)
    d_acc = np.zeros(m)
    w_acc = np.zeros(m)
    failed = []
    for j, s in enumerate(starts):
        sol = solve_window(y[s:s + width], dt, params.gamma_tv, tol, max_iter)
        if not sol.converged:
            failed.append(sol.residual)
        w = _blend_weights(width, ramp, j == 0, j == len(starts) - 1)
        x_acc[s:s + width] += w * sol.x
        d_acc[s:s + width] += w * finite_difference(sol.x, dt)
        w_acc[s:s + width] += w
    estimate = DerivativeEstimate(x_acc / w_acc, d_acc / w_acc)
    if failed:
        raise ConvergenceError(
            f"TVRJ solver did not converge in {max_iter} iterations "
            f"({len(failed)} of {len(starts)} windows)",
            last_iterate=estimate,
            residual=max(failed),
        )
    return estimate


def gamma_lower_bound(series, window=WINDOW, overlap=OVERLAP):
    """Smallest per-window identity threshold: at or below it TVRJ returns the finite difference."""
    y = series.values
    width = min(window, y.size)
    bounds = [identity_threshold(y[s:s + width], series.dt)
              for s in window_starts(y.size, window, overlap)]
    return float(min(bounds))


def jerk_penalty(dxdt, dt):
    """The regularizer evaluated on a derivative: mean |third difference| / dt**3.

    The last sample is skipped because the forward-difference convention
    repeats it.
    """
    d = np.asarray(dxdt, dtype=float)[:-1]
    return float(np.sum(np.abs(np.diff(d, 3))) / (d.size + 1) / dt**3)
