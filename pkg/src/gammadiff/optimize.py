"""Ground-truth-free parameter selection.

The loss scores a derivative estimate by how well its integral (shifted by
the best constant) reproduces the data, plus ``gamma`` times its total
variation.  Method parameters are chosen by multi-start Nelder-Mead on
that loss, and ``gamma`` itself can be set from the data's cutoff frequency
and time step with a log-linear rule.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    estimate_cutoff_frequency,
    power_spectrum,
    rmse,
    total_variation,
    trapezoidal_integral,
)
from .errors import ConvergenceError, FitError, InvalidInputError, OptimizationError
from .methods import Butterworth, Kalman, SavGol, Tvrj, differentiate
from .methods.tvrj import WINDOW, collapse_threshold, gamma_lower_bound

log = logging.getLogger(__name__)

RECOMMENDED_DT_RANGE = (1e-3, 1e-1)


class TimeStepWarning(UserWarning):
    """The time step lies outside the range the gamma heuristic was fitted on."""


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    fidelity: float
    smoothness: float
    mu: float
    gamma: float


def loss(dxdt_candidate, series, gamma):
    """Score a derivative estimate without ground truth.

    ``fidelity`` is the RMSE between the data and the trapezoidal integral of
    the candidate shifted by ``mu = mean(y - integral)``, the shift that
    minimizes that RMSE.  ``smoothness`` is the candidate's total variation.
    """
    d = np.asarray(dxdt_candidate, dtype=float)
    y = series.values
    if d.shape != y.shape:
        raise InvalidInputError(f"candidate length {d.size} != series length {y.size}")
    if not gamma >= 0:
        raise InvalidInputError(f"gamma must be nonnegative, got {gamma}")
    integral = trapezoidal_integral(d, series.dt, 0.0)
    mu = float(np.mean(y - integral))
    fidelity = rmse(integral + mu, y)
    smoothness = total_variation(d)
    return LossBreakdown(fidelity + gamma * smoothness, fidelity, smoothness, mu, float(gamma))


# --------------------------------------------------------------------------
# Nelder-Mead


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool


def nelder_mead(fun, x0, steps, xtol=1e-6, ftol=1e-6, max_iter=500):
    """Minimize ``fun`` with the Nelder-Mead simplex.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    The initial simplex is ``x0`` plus one vertex per axis offset by
    ``steps[i]``.  Stops when both the vertex spread (relative to
    ``max(1, |x|)``) and the function-value spread (relative to
    ``max(1e-12, |f_best|)``) fall below their tolerances, or after
    ``max_iter`` iterations.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    simplex = [x0.copy()]
    for i in range(n):
        v = x0.copy()
        v[i] += steps[i]
        simplex.append(v)
    simplex = np.array(simplex)
    fvals = np.array([fun(v) for v in simplex])
    evals = n + 1

    it = 0
    converged = False
    while it < max_iter:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        xspread = np.max(np.abs(simplex[1:] - simplex[0]) / np.maximum(1.0, np.abs(simplex[0])))
        if np.isfinite(fvals[0]):
            fspread = np.max(np.abs(fvals[1:] - fvals[0]))
            fspread = fspread / max(1e-12, abs(fvals[0])) if np.isfinite(fspread) else np.inf
        else:
            fspread = np.inf
        if xspread <= xtol and fspread <= ftol:
            converged = True
            break
        it += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = fun(xr)
        evals += 1
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = fun(xe)
            evals += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = fun(xc)
            evals += 1
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = fun(xc)
            evals += 1
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        for j in range(1, n + 1):
            simplex[j] = simplex[0] + 0.5 * (simplex[j] - simplex[0])
            fvals[j] = fun(simplex[j])
            evals += 1

    order = np.argsort(fvals, kind="stable")
    return SimplexResult(simplex[order[0]].copy(), float(fvals[order[0]]), it, evals, converged)


# --------------------------------------------------------------------------
# search spaces: continuous coordinates <-> valid method parameters


def _sig(value, digits=10):
    """Round to ``digits`` significant digits so cache keys repeat."""
    if value == 0 or not math.isfinite(value):
        return value
    return round(value, digits - 1 - int(math.floor(math.log10(abs(value)))))


def _half_from_log(u, lo, hi):
    return int(np.clip(round(math.exp(min(u, 50.0))), lo, hi))


class SearchSpace:
    """Maps a continuous vector to method parameters and back.

    Subclasses define ``decode``, ``encode``, ``steps`` and ``seed_params``.
    """

    def __init__(self, series):
        self.series = series
        self.m = len(series)
        self.dt = series.dt

    def seeds(self):
        return [self.encode(p) for p in self.seed_params()]


class ButterworthSpace(SearchSpace):
    """(filter order, log cutoff); order rounded and clipped, cutoff kept below Nyquist."""

    SEED_FRACTIONS = (0.5, 0.15, 0.04, 0.01)
    SEED_ORDERS = (1, 2, 3, 4)
    MAX_ORDER = 10
    steps = (1.0, 0.7)

    def __init__(self, series):
        super().__init__(series)
        self.nyquist = series.nyquist
        self.max_order = max(1, min(self.MAX_ORDER, (self.m - 1) // 3 - 1))
        self.min_cutoff = 0.5 / (self.m * self.dt)
        self.max_cutoff = 0.999 * self.nyquist

    def decode(self, u):
        order = int(np.clip(round(u[0]), 1, self.max_order))
        cutoff = float(np.clip(math.exp(min(u[1], 700.0)), self.min_cutoff, self.max_cutoff))
        return Butterworth(order, _sig(cutoff))

    def encode(self, p):
        return np.array([float(p.order), math.log(p.cutoff)])

    def seed_params(self):
        out = []
        for order, frac in zip(self.SEED_ORDERS, self.SEED_FRACTIONS):
            order = min(order, self.max_order)
            out.append(Butterworth(order, max(self.min_cutoff, frac * self.nyquist)))
        return out


class SavGolSpace(SearchSpace):
    """(log half-window, polyorder, log(1 + smoothing half-window)).

    Windows are ``2 * half + 1`` so they stay odd.
    """

    SEED_FRACTIONS = (0.005, 0.02, 0.06, 0.15)
    SEED_ORDERS = (2, 3, 3, 4)
    MAX_POLYORDER = 7
    steps = (0.5, 1.0, 0.5)

    def __init__(self, series):
        super().__init__(series)
        self.max_half = (self.m - 1) // 2

    def decode(self, u):
        half = _half_from_log(u[0], 1, self.max_half)
        window = 2 * half + 1
        polyorder = int(np.clip(round(u[1]), 1, min(window - 1, self.MAX_POLYORDER)))
        shalf = int(np.clip(round(math.exp(min(u[2], 50.0)) - 1.0), 0, self.max_half))
        return SavGol(window, polyorder, 2 * shalf + 1)

    def encode(self, p):
        half = (p.window - 1) // 2
        shalf = (p.smooth_window - 1) // 2
        return np.array([math.log(half), float(p.polyorder), math.log(shalf + 1.0)])

    def seed_params(self):
        out = []
        for frac, order in zip(self.SEED_FRACTIONS, self.SEED_ORDERS):
            half = int(np.clip(round(frac * self.m), 1, self.max_half))
            window = 2 * half + 1
            out.append(SavGol(window, min(order, window - 1), window))
        return out


class KalmanSpace(SearchSpace):
    """(log q, log r).  Seeds put the smoother bandwidth at fractions of Nyquist."""

    SEED_FRACTIONS = (0.3, 0.1, 0.03, 0.01)
    steps = (2.0, 1.0)

    def __init__(self, series):
        super().__init__(series)
        noise_var = float(np.var(np.diff(series.values))) / 2.0
        scale = max(float(np.var(series.values)), 1e-300)
        self.r0 = noise_var if noise_var > 1e-12 * scale else scale * 1e-6
        if self.r0 <= 0:
            self.r0 = 1.0

    def decode(self, u):
        q = math.exp(float(np.clip(u[0], -700.0, 700.0)))
        r = math.exp(float(np.clip(u[1], -700.0, 700.0)))
        return Kalman(_sig(q), _sig(r))

    def encode(self, p):
        return np.array([math.log(p.q), math.log(p.r)])

    def seed_params(self):
        out = []
        for frac in self.SEED_FRACTIONS:
            omega = 2.0 * math.pi * frac * self.series.nyquist
            # steady-state bandwidth of the white-jerk smoother ~ (q / r) ** (1 / 6)
            out.append(Kalman(self.r0 * omega**6, self.r0))
        return out


class TvrjSpace(SearchSpace):
    """log(gamma_tv / lower bound), clipped at 0.

    The lower bound is the largest weight at which the solver provably
    returns the finite difference, so the search starts where the
    regularizer begins to act.  Seeds are spread log-uniformly up to the
    weight at which the estimate collapses to a single cubic.
    """

    steps = (1.0,)

    def __init__(self, series):
        super().__init__(series)
        lo = gamma_lower_bound(series)
        self.lower = lo if math.isfinite(lo) and lo > 0 else 1.0
        hi = collapse_threshold(series.values[:WINDOW], self.dt)
        self.span = max(math.log(max(hi, self.lower) / self.lower), 1.0)

    def decode(self, u):
        v = float(np.clip(u[0], 0.0, self.span + 2.0))
        if v == 0.0:
            # rounding could lift the bound past the identity threshold
            return Tvrj(self.lower)
        return Tvrj(_sig(self.lower * math.exp(v)))

    def encode(self, p):
        return np.array([math.log(max(p.gamma_tv, self.lower) / self.lower)])

    def seed_params(self):
        return [Tvrj(self.lower * math.exp(f * self.span)) for f in (0.0, 0.25, 0.5, 0.75)]


SPACES = {
    "butterworth": ButterworthSpace,
    "savgol": SavGolSpace,
    "kalman": KalmanSpace,
    "tvrj": TvrjSpace,
}


def default_seeds(method, series):
    """The four documented starting points for ``method`` on ``series``."""
    return _space(method, series).seed_params()


def _space(method, series):
    try:
        return SPACES[method](series)
    except KeyError:
        raise InvalidInputError(
            f"unknown method {method!r}; choose from {sorted(SPACES)}"
        ) from None


# --------------------------------------------------------------------------
# parameter search


@dataclass(frozen=True)
class StartRecord:
    initial_params: object
    initial_loss: float
    final_params: object
    final_loss: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class OptimizationResult:
    best_params: object
    best_loss: LossBreakdown
    estimate: object
    starts: list = field(default_factory=list)


class _CachedObjective:
    """Evaluates the loss of a method at decoded parameters, memoized on the parameters."""

    def __init__(self, space, series, gamma):
        self.space = space
        self.series = series
        self.gamma = gamma
        self.cache = {}

    def evaluate(self, params):
        if params not in self.cache:
            self.cache[params] = self._compute(params)
        return self.cache[params]

    def _compute(self, params):
        try:
            est = differentiate(self.series, params)
        except ConvergenceError as exc:
            # the solver's last iterate is still a usable estimate
            est = exc.last_iterate
            if est is None:
                return None, None
        except (InvalidInputError, np.linalg.LinAlgError, ValueError) as exc:
            log.debug("rejecting %s: %s", params, exc)
            return None, None
        breakdown = loss(est.dxdt_hat, self.series, self.gamma)
        if not math.isfinite(breakdown.total):
            return None, None
        return breakdown, est

    def __call__(self, u):
        breakdown, _ = self.evaluate(self.space.decode(u))
        return breakdown.total if breakdown is not None else math.inf


def optimize_params(method, series, gamma, seeds=None, max_iter=500, xtol=1e-6, ftol=1e-6):
    """Choose parameters of ``method`` minimizing :func:`loss` at ``gamma``.

    Nelder-Mead runs from every seed (default: :func:`default_seeds`) in the
    method's transformed space; the lowest final loss wins, ties going to
    the earliest seed.
    """
    if not gamma >= 0:
        raise InvalidInputError(f"gamma must be nonnegative, got {gamma}")
    space = _space(method, series)
    objective = _CachedObjective(space, series, gamma)
    seed_params = list(seeds) if seeds is not None else space.seed_params()
    if not seed_params:
        raise InvalidInputError("at least one seed is required")

    starts = []
    diagnostics = []
    best = None
    for idx, seed in enumerate(seed_params):
        u0 = space.encode(seed)
        initial_params = space.decode(u0)
        init_loss, _ = objective.evaluate(initial_params)
        res = nelder_mead(objective, u0, space.steps, xtol=xtol, ftol=ftol, max_iter=max_iter)
        final_params = space.decode(res.x)
        final_loss, est = objective.evaluate(final_params)
        starts.append(StartRecord(
            initial_params,
            init_loss.total if init_loss is not None else math.inf,
            final_params,
            final_loss.total if final_loss is not None else math.inf,
            res.iterations,
            res.converged,
        ))
        if final_loss is None:
            diagnostics.append(f"seed {idx} ({seed}): no finite loss")
            continue
        if best is None or final_loss.total < best[1].total:
            best = (final_params, final_loss, est)
    if best is None:
        raise OptimizationError(f"{method}: every seed failed", diagnostics)
    return OptimizationResult(best[0], best[1], best[2], starts)


# --------------------------------------------------------------------------
# choosing gamma


@dataclass(frozen=True)
class GammaModel:
    """``ln(gamma) = coef_log_freq ln(f) + coef_log_dt ln(dt) + intercept``.

    Defaults are the published fit; the noise and length terms of the full
    model were not significant and are not part of it.
    """

    coef_log_freq: float = -1.6
    coef_log_dt: float = -0.71
    intercept: float = -5.1

    def log_gamma(self, freq, dt):
        return self.coef_log_freq * math.log(freq) + self.coef_log_dt * math.log(dt) + self.intercept


def gamma_from_heuristic(freq, dt, model=GammaModel()):
    """Gamma for data with cutoff frequency ``freq`` and time step ``dt`` (natural logs)."""
    if not (freq > 0 and dt > 0):
        raise InvalidInputError(f"freq and dt must be positive, got freq={freq}, dt={dt}")
    return math.exp(model.log_gamma(freq, dt))


def suggested_time_scale(dt):
    """Power-of-ten factor that brings ``dt`` near the middle of the fitted range."""
    return 10.0 ** round(math.log10(0.01 / dt))


def suggest_gamma(series, cutoff_override=None, fraction=0.95, model=GammaModel()):
    """Pick gamma from the power spectrum (or an explicit cutoff) and the time step.

    Returns ``(gamma, cutoff_used)``.  Emits :class:`TimeStepWarning` when ``dt``
    is outside ``RECOMMENDED_DT_RANGE``; nothing is rescaled.
    """
    if cutoff_override is not None:
        if not cutoff_override > 0:
            raise InvalidInputError(f"cutoff must be positive, got {cutoff_override}")
        cutoff = float(cutoff_override)
    else:
        cutoff = estimate_cutoff_frequency(power_spectrum(series), fraction)
    lo, hi = RECOMMENDED_DT_RANGE
    if not lo <= series.dt <= hi:
        factor = suggested_time_scale(series.dt)
        warnings.warn(
            f"dt={series.dt:g} is outside [{lo:g}, {hi:g}] where the gamma heuristic "
            f"was fitted; consider expressing time in units {factor:g} times larger "
            f"(dt -> {series.dt * factor:g})",
            TimeStepWarning,
            stacklevel=2,
        )
    return gamma_from_heuristic(cutoff, series.dt, model), cutoff


def fit_gamma_model(observations):
    """Ordinary least squares of ln(gamma) on ln(freq), ln(dt) and an intercept.

    ``observations`` holds ``(freq, dt, gamma)`` triples.  Returns the fitted
    :class:`GammaModel` and the adjusted R^2 (``nan`` when there are no
    residual degrees of freedom and the fit is not exact).
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 3:
        raise InvalidInputError("observations must be (freq, dt, gamma) triples")
    if obs.shape[0] < 3:
        raise InvalidInputError(f"need at least 3 observations, got {obs.shape[0]}")
    if not np.all(obs > 0) or not np.all(np.isfinite(obs)):
        raise InvalidInputError("observations must be positive and finite")
    logs = np.log(obs)
    design = np.column_stack([logs[:, 0], logs[:, 1], np.ones(len(obs))])
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("design matrix is rank deficient (need varied freq and dt)")
    coef, *_ = np.linalg.lstsq(design, logs[:, 2], rcond=None)
    fitted = design @ coef
    resid = logs[:, 2] - fitted
    ss_res = float(resid @ resid)
    centred = logs[:, 2] - logs[:, 2].mean()
    ss_tot = float(centred @ centred)
    n, p = len(obs), 2
    if ss_res <= 1e-24 * max(ss_tot, 1.0):
        adj = 1.0
    elif ss_tot == 0 or n - p - 1 <= 0:
        adj = float("nan")
    else:
        adj = 1.0 - (ss_res / ss_tot) * (n - 1) / (n - p - 1)
    return GammaModel(float(coef[0]), float(coef[1]), float(coef[2])), adj
