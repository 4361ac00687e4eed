"""Benchmark problems with known derivatives, and sweeps that evaluate against them.

Noise comes from ``numpy.random.default_rng(seed)`` (the PCG64 generator),
so a given ``(kind, config)`` always yields the same arrays.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    DerivativeEstimate,
    EvalMetrics,
    TimeSeries,
    error_correlation_flagged,
    rmse,
)
from .errors import InvalidInputError
from .methods import PARAM_TYPES, SavGol, differentiate
from .optimize import loss, optimize_params

KINDS = ("sine", "sum_of_sines", "triangle", "logistic", "lorenz", "pi_control")

LORENZ_SIGMA = 10.0
LORENZ_RHO = 28.0
LORENZ_BETA = 8.0 / 3.0
LORENZ_X0 = (5.0, 5.0, 5.0)
ODE_TOL = 1e-10


@dataclass(frozen=True)
class ProblemConfig:
    """Sampling and noise settings plus shape parameters for one problem kind.

    ``noise_fraction``, when given, sets the noise standard deviation to that
    fraction of the signal amplitude (half the peak-to-peak range of the
    true position) and overrides ``noise_sigma``.
    """

    dt: float = 0.01
    duration: float = 4.0
    noise_sigma: float = 0.0
    noise_fraction: float = None
    seed: int = 0
    shape: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SyntheticProblem:
    noisy: TimeSeries
    truth_x: np.ndarray
    truth_dxdt: np.ndarray
    noise_sigma: float
    seed: int
    kind: str = ""

    @property
    def t(self):
        return self.noisy.t


@dataclass(frozen=True)
class SweepRecord:
    """One evaluated setting: method parameters, the gamma used (if any), metrics and loss."""

    params: object
    metrics: EvalMetrics
    loss: object
    gamma: float = float("nan")


# --------------------------------------------------------------------------
# truth generators: each returns (x, dxdt) sampled at t


def _sine(t, freq=1.0, amplitude=1.0, phase=0.0):
    w = 2.0 * math.pi * freq
    return amplitude * np.sin(w * t + phase), amplitude * w * np.cos(w * t + phase)


def _sum_of_sines(t, freqs=(1.0, 5.0), amplitudes=(1.0, 0.2)):
    x = np.zeros_like(t)
    dx = np.zeros_like(t)
    for f, a in zip(freqs, amplitudes):
        xi, dxi = _sine(t, f, a)
        x += xi
        dx += dxi
    return x, dx


def _triangle(t, freq=0.5, chirp=0.25, amplitude=1.0):
    """Triangle wave whose frequency grows by ``chirp`` (relative) every period.

    Each period is a straight rise and fall, so the derivative is piecewise
    constant; its magnitude steps up from one period to the next.
    """
    t_end = float(t[-1]) if t.size else 0.0
    vertices = [0.0]
    period = 1.0 / freq
    k = 0
    while vertices[-1] <= t_end:
        p = period / (1.0 + chirp) ** k
        vertices.extend([vertices[-1] + p / 2.0, vertices[-1] + p])
        k += 1
    vertices = np.array(vertices)
    levels = np.where(np.arange(vertices.size) % 2 == 0, -amplitude, amplitude)
    x = np.interp(t, vertices, levels)
    seg = np.searchsorted(vertices, t, side="right") - 1
    slopes = np.diff(levels) / np.diff(vertices)
    return x, slopes[np.clip(seg, 0, slopes.size - 1)]


def _logistic(t, rate=1.0, capacity=1.0, x0=0.01, t0=0.0):
    e = np.exp(-rate * (t - t0))
    c = (capacity - x0) / x0
    x = capacity / (1.0 + c * e)
    return x, rate * x * (1.0 - x / capacity)


def lorenz_rhs(_t, s, sigma=LORENZ_SIGMA, rho=LORENZ_RHO, beta=LORENZ_BETA):
    x1, x2, x3 = s
    return [sigma * (x2 - x1), x1 * (rho - x3) - x2, x1 * x2 - beta * x3]


def _lorenz(t, x0=LORENZ_X0, component=0):
    sol = solve_ivp(lorenz_rhs, (t[0], t[-1]), list(x0), method="DOP853",
                    t_eval=t, rtol=ODE_TOL, atol=ODE_TOL)
    states = sol.y
    rhs = np.array(lorenz_rhs(0.0, states))
    return states[component].copy(), rhs[component].copy()


def pi_control_rhs(t, s, v_ref=1.0, kp=2.0, ki=1.0, dist_amp=0.5, dist_freq=0.5):
    """Unit mass pushed by a PI velocity controller against a sinusoidal force."""
    _, v, integ = s
    err = v_ref - v
    force = kp * err + ki * integ + dist_amp * math.sin(2.0 * math.pi * dist_freq * t)
    return [v, force, err]


def _pi_control(t, v_ref=1.0, kp=2.0, ki=1.0, dist_amp=0.5, dist_freq=0.5):
    args = (v_ref, kp, ki, dist_amp, dist_freq)
    sol = solve_ivp(pi_control_rhs, (t[0], t[-1]), [0.0, v_ref, 0.0], method="DOP853",
                    t_eval=t, rtol=ODE_TOL, atol=ODE_TOL, args=args)
    return sol.y[0].copy(), sol.y[1].copy()


_GENERATORS = {
    "sine": _sine,
    "sum_of_sines": _sum_of_sines,
    "triangle": _triangle,
    "logistic": _logistic,
    "lorenz": _lorenz,
    "pi_control": _pi_control,
}


def generate(kind, config=ProblemConfig()):
    """Build a :class:`SyntheticProblem` of the given kind."""
    if kind not in _GENERATORS:
        raise InvalidInputError(f"unknown problem kind {kind!r}; choose from {', '.join(KINDS)}")
    dt = float(config.dt)
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if not config.duration >= 4 * dt:
        raise InvalidInputError("duration must cover at least 4 samples")
    if not config.noise_sigma >= 0 or (config.noise_fraction is not None
                                        and not config.noise_fraction >= 0):
        raise InvalidInputError("noise levels must be nonnegative")
    m = int(math.floor(config.duration / dt + 1e-9))
    t = np.arange(m) * dt
    try:
        x, dx = _GENERATORS[kind](t, **config.shape)
    except TypeError as exc:
        raise InvalidInputError(f"bad shape parameters for {kind}: {exc}") from None
    sigma = float(config.noise_sigma)
    if config.noise_fraction is not None:
        sigma = float(config.noise_fraction) * 0.5 * float(np.ptp(x))
    rng = np.random.default_rng(config.seed)
    y = x + sigma * rng.standard_normal(m) if sigma > 0 else x.copy()
    return SyntheticProblem(TimeSeries(y, dt), x, dx, sigma, config.seed, kind)


def evaluate(estimate, problem):
    d = np.asarray(estimate.dxdt_hat if isinstance(estimate, DerivativeEstimate) else estimate)
    if d.shape != problem.truth_dxdt.shape:
        raise InvalidInputError(
            f"estimate length {d.size} != problem length {problem.truth_dxdt.size}"
        )
    corr, degenerate = error_correlation_flagged(d, problem.truth_dxdt)
    return EvalMetrics(rmse(d, problem.truth_dxdt), corr, degenerate)


# --------------------------------------------------------------------------
# sweeps


def gamma_sweep(method, problem, gamma_grid, **optimize_kwargs):
    """Optimize ``method`` at each gamma and evaluate against the truth, in grid order."""
    grid = list(gamma_grid)
    if not grid:
        raise InvalidInputError("gamma grid is empty")
    records = []
    for g in grid:
        res = optimize_params(method, problem.noisy, g, **optimize_kwargs)
        records.append(SweepRecord(res.best_params, evaluate(res.estimate, problem),
                                   res.best_loss, float(g)))
    return records


def default_savgol_grid(m):
    """About 5,000 Savitzky-Golay settings scaled to a series of ``m`` samples.

    Half-windows are 30 log-spaced values from 1 to ``m / 4``; polynomial
    orders 1 to 7 (kept below the window); smoothing windows 1 plus 34
    log-spaced half-widths.  A 1,000-sample series gets 5,017 settings.
    """
    halves = np.unique(np.round(np.geomspace(1, max(2, m // 4), 30)).astype(int))
    shalves = np.concatenate([[0], np.unique(np.round(np.geomspace(1, max(2, m // 4), 34)).astype(int))])
    grid = []
    for h in halves:
        window = 2 * int(h) + 1
        for p in range(1, min(7, window - 1) + 1):
            for sh in np.unique(shalves):
                sw = 2 * int(sh) + 1
                if sw <= m and window <= m:
                    grid.append(SavGol(window, p, sw))
    return grid


def brute_force_grid(method, problem, grid, gamma=0.0):
    """Evaluate every parameter set in ``grid``; invalid points are skipped.

    ``grid`` is an iterable of parameter objects of ``method``'s type (for
    example from :func:`default_savgol_grid`).  The loss is reported at
    ``gamma`` so records line up with sweep output.
    """
    cls = PARAM_TYPES[method]
    records = []
    for params in grid:
        if not isinstance(params, cls):
            raise InvalidInputError(f"grid point {params!r} is not a {cls.__name__}")
        try:
            est = differentiate(problem.noisy, params)
        except InvalidInputError:
            continue
        records.append(SweepRecord(params, evaluate(est, problem),
                                   loss(est.dxdt_hat, problem.noisy, gamma), float(gamma)))
    return records


def pareto_front(records):
    """Records not dominated in (error correlation, RMSE), sorted by error correlation."""
    pts = sorted(records, key=lambda r: (r.metrics.error_correlation, r.metrics.rmse))
    front = []
    best_rmse = math.inf
    for r in pts:
        if r.metrics.rmse < best_rmse:
            front.append(r)
            best_rmse = r.metrics.rmse
    return front


def lower_envelope(records):
    """Lower boundary of the (error correlation, RMSE) cloud, sorted by error correlation.

    The Pareto front runs from the low-correlation side down to the lowest
    RMSE.  Past that point heavier smoothing raises both metrics, so the
    boundary continues with the records no other record beats in RMSE at
    equal or higher error correlation.
    """
    pts = sorted(records, key=lambda r: (-r.metrics.error_correlation, r.metrics.rmse))
    right = []
    best_rmse = math.inf
    for r in pts:
        if r.metrics.rmse < best_rmse:
            right.append(r)
            best_rmse = r.metrics.rmse
    left = pareto_front(records)
    seen = {id(r) for r in left}
    merged = left + [r for r in right if id(r) not in seen]
    return sorted(merged, key=lambda r: (r.metrics.error_correlation, r.metrics.rmse))


def is_near_front(record, front, rmse_factor=1.5, window=0.05):
    """True when some front record has error correlation within ``window`` and
    RMSE at least ``record``'s divided by ``rmse_factor``."""
    corr, err = record.metrics.error_correlation, record.metrics.rmse
    return any(abs(f.metrics.error_correlation - corr) <= window and err <= rmse_factor * f.metrics.rmse
               for f in front)


def near_front_fraction(sweep, front, rmse_factor=1.5, window=0.05):
    """Share of sweep records that are near the front (see :func:`is_near_front`)."""
    if not sweep:
        raise InvalidInputError("sweep is empty")
    return sum(is_near_front(r, front, rmse_factor, window) for r in sweep) / len(sweep)


ELBOW_MIN_STEP = 0.02


def elbow_index(records, min_step=ELBOW_MIN_STEP):
    """Index of maximum discrete curvature of the (error correlation, RMSE) curve.

    RMSE spans orders of magnitude along a sweep, so it enters as log10;
    both axes are then min-max normalized.  The curve is taken in record
    order (ascending gamma).  Consecutive points closer than ``min_step``
    (normalized units) are merged into the first of them, so rounding-level
    moves cannot produce spurious curvature.  Curvature at an interior point
    is the turning angle divided by the mean length of its two segments, and
    it must bend toward the lower-left corner; when no interior point does,
    the lowest-RMSE record is returned.
    """
    corr = np.array([r.metrics.error_correlation for r in records], dtype=float)
    err = np.array([r.metrics.rmse for r in records], dtype=float)
    if len(records) < 3 or not np.all(err > 0):
        return int(np.argmin(err))

    def norm(v):
        span = v.max() - v.min()
        return (v - v.min()) / span if span > 0 else np.zeros_like(v)

    pts = np.column_stack([norm(corr), norm(np.log10(err))])
    keep = [0]
    for i in range(1, len(pts)):
        if np.linalg.norm(pts[i] - pts[keep[-1]]) > min_step:
            keep.append(i)
    if len(keep) < 3:
        return int(np.argmin(err))
    p = pts[keep]
    best, best_k = -math.inf, None
    for j in range(1, len(p) - 1):
        a = p[j] - p[j - 1]
        b = p[j + 1] - p[j]
        cross = a[0] * b[1] - a[1] * b[0]
        angle = math.atan2(cross, a @ b)
        curvature = angle / (0.5 * (np.linalg.norm(a) + np.linalg.norm(b)))
        if curvature > best:
            best, best_k = curvature, j
    if best_k is None or best <= 0:
        return int(np.argmin(err))
    return keep[best_k]


def elbow_gamma(records, min_step=ELBOW_MIN_STEP):
    """Gamma at the elbow of a sweep.

    Neighbouring gammas often select the very same parameters; every gamma
    in that run gives the elbow estimate, so the geometric midpoint of the
    run is reported rather than one of its ends.
    """
    k = elbow_index(records, min_step)
    lo = hi = k
    while lo > 0 and records[lo - 1].params == records[k].params:
        lo -= 1
    while hi < len(records) - 1 and records[hi + 1].params == records[k].params:
        hi += 1
    return math.sqrt(records[lo].gamma * records[hi].gamma)


@dataclass(frozen=True)
class TrainingConfig:
    """Grid for regenerating the gamma heuristic from noisy sinusoids.

    Noise levels are fractions of the unit sine amplitude.
    """

    freqs: tuple = (0.5, 1.0, 2.0, 5.0)
    dts: tuple = (0.001, 0.01, 0.1)
    noise_fractions: tuple = (0.005, 0.05)
    durations: tuple = (4.0, 25.0)
    gamma_grid: tuple = tuple(np.geomspace(1e-4, 1e3, 15))
    seed: int = 0
    optimize_kwargs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TrainingObservation:
    freq: float
    dt: float
    noise_fraction: float
    duration: float
    gamma: float
    sweep: list = field(default_factory=list, compare=False, repr=False)

    def as_triple(self):
        return (self.freq, self.dt, self.gamma)


def training_cases(config):
    """Grid combinations kept for the fit: at least one full period and a Nyquist margin."""
    cases = []
    for dt in config.dts:
        for f in config.freqs:
            if not f < 0.25 / dt:
                continue
            for sigma in config.noise_fractions:
                for dur in config.durations:
                    if 1.0 / f < dur:
                        cases.append((f, dt, sigma, dur))
    return cases


def heuristic_training_sweep(config=TrainingConfig(), progress=None):
    """Gamma sweeps with Savitzky-Golay over noisy sinusoids; returns the elbow gamma of each.

    Cases whose period is not shorter than the record are skipped, as are
    frequencies within a factor 2 of Nyquist.
    """
    if not (config.freqs and config.dts and config.noise_fractions and config.durations
            and len(config.gamma_grid)):
        raise InvalidInputError("every training grid must be nonempty")
    out = []
    cases = training_cases(config)
    for i, (f, dt, sigma, dur) in enumerate(cases):
        problem = generate("sine", ProblemConfig(dt=dt, duration=dur, noise_fraction=sigma,
                                                 seed=config.seed + i, shape={"freq": f}))
        sweep = gamma_sweep("savgol", problem, config.gamma_grid, **config.optimize_kwargs)
        out.append(TrainingObservation(f, dt, sigma, dur, elbow_gamma(sweep), sweep))
        if progress is not None:
            progress(i + 1, len(cases), out[-1])
    return out

