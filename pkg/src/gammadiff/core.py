"""Numerical primitives shared by the differentiation methods and the optimizer.

Everything here works on uniformly sampled, one-dimensional data. Functions
take plain array-likes (and a time step where needed) so they compose with
numpy code; the small dataclasses bundle arrays that travel together.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import InvalidInputError, NoSignalError

MIN_SERIES_LENGTH = 4


def _as_1d(values, name="values"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _check_finite(arr, name="values"):
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf")


def _check_dt(dt):
    dt = float(dt)
    if not np.isfinite(dt) or dt <= 0:
        raise InvalidInputError(f"dt must be a positive finite number, got {dt}")
    return dt


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar measurements ``values`` with step ``dt``."""

    values: np.ndarray
    dt: float

    def __post_init__(self):
        arr = _as_1d(self.values)
        _check_finite(arr)
        if arr.size < MIN_SERIES_LENGTH:
            raise InvalidInputError(
                f"a time series needs at least {MIN_SERIES_LENGTH} samples, got {arr.size}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "dt", _check_dt(self.dt))

    def __len__(self):
        return self.values.size

    @property
    def t(self):
        return np.arange(self.values.size) * self.dt

    @property
    def nyquist(self):
        return 0.5 / self.dt


@dataclass(frozen=True)
class DerivativeEstimate:
    """Smoothed position ``x_hat`` paired with derivative ``dxdt_hat``."""

    x_hat: np.ndarray
    dxdt_hat: np.ndarray

    def __post_init__(self):
        x = _as_1d(self.x_hat, "x_hat")
        d = _as_1d(self.dxdt_hat, "dxdt_hat")
        if x.shape != d.shape:
            raise InvalidInputError(
                f"x_hat and dxdt_hat differ in length ({x.size} vs {d.size})"
            )
        _check_finite(x, "x_hat")
        _check_finite(d, "dxdt_hat")
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "dxdt_hat", d)

    def __len__(self):
        return self.x_hat.size


@dataclass(frozen=True)
class EvalMetrics:
    """Ground-truth quality of a derivative estimate.

    ``degenerate`` is set when the error correlation was undefined (constant
    truth or constant error) and reported as 0 by convention.
    """

    rmse: float
    error_correlation: float
    degenerate: bool = False

    def __post_init__(self):
        if not self.rmse >= 0:
            raise InvalidInputError(f"rmse must be nonnegative, got {self.rmse}")
        if not 0.0 <= self.error_correlation <= 1.0:
            raise InvalidInputError(
                f"error correlation must lie in [0, 1], got {self.error_correlation}"
            )


@dataclass(frozen=True)
class PowerSpectrum:
    frequencies: np.ndarray
    power: np.ndarray
    dt: float = field(default=float("nan"))

    def __post_init__(self):
        f = _as_1d(self.frequencies, "frequencies")
        p = _as_1d(self.power, "power")
        if f.shape != p.shape:
            raise InvalidInputError("frequencies and power differ in length")
        if f.size < 2 or f[0] != 0 or np.any(np.diff(f) <= 0):
            raise InvalidInputError("frequencies must start at 0 and increase strictly")
        if np.any(p < 0):
            raise InvalidInputError("power must be nonnegative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "power", p)


def finite_difference(values, dt):
    """Forward difference with the last element repeated.

    ``out[k] = (y[k+1] - y[k]) / dt`` for ``k < m-1`` and ``out[m-1] = out[m-2]``,
    so the output has the same length as the input.
    """
    y = _as_1d(values)
    dt = _check_dt(dt)
    if y.size < 2:
        raise InvalidInputError("finite difference needs at least 2 samples")
    d = np.empty_like(y)
    d[:-1] = np.diff(y) / dt
    d[-1] = d[-2]
    return d


def trapezoidal_integral(derivative, dt, x0=0.0):
    """Cumulative trapezoidal integral starting at ``x0``."""
    d = _as_1d(derivative, "derivative")
    dt = _check_dt(dt)
    if d.size == 0:
        raise InvalidInputError("cannot integrate an empty sequence")
    _check_finite(d, "derivative")
    out = np.empty_like(d)
    out[0] = 0.0
    np.cumsum(0.5 * dt * (d[1:] + d[:-1]), out=out[1:])
    return out + float(x0)


def total_variation(x):
    """Mean absolute difference between neighbours, ``sum|x[k+1]-x[k]| / m``."""
    x = _as_1d(x)
    if x.size < 2:
        raise InvalidInputError("total variation needs at least 2 samples")
    return float(np.sum(np.abs(np.diff(x))) / x.size)


def rmse(a, b):
    """Root of the mean squared difference (length invariant)."""
    a = _as_1d(a, "a")
    b = _as_1d(b, "b")
    if a.shape != b.shape:
        raise InvalidInputError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise InvalidInputError("rmse of empty sequences is undefined")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def error_correlation_flagged(estimate, truth):
    """Squared Pearson correlation between ``estimate - truth`` and ``truth``.

    Returns ``(value, degenerate)``. When either the truth or the error is
    constant the correlation is undefined; ``(0.0, True)`` is returned.
    """
    est = _as_1d(estimate, "estimate")
    tru = _as_1d(truth, "truth")
    if est.shape != tru.shape:
        raise InvalidInputError(f"length mismatch: {est.size} vs {tru.size}")
    if est.size < 3:
        raise InvalidInputError("error correlation needs at least 3 samples")
    err = est - tru
    ec = err - err.mean()
    tc = tru - tru.mean()
    see = float(ec @ ec)
    stt = float(tc @ tc)
    # relative floors: deviations at rounding level count as constant
    eps = np.finfo(float).eps
    if stt <= (eps * tru.size * np.max(np.abs(tru))) ** 2 or see <= (
        eps * err.size * max(np.max(np.abs(err)), np.max(np.abs(tru)))
    ) ** 2:
        return 0.0, True
    r2 = float(ec @ tc) ** 2 / (see * stt)
    return min(max(r2, 0.0), 1.0), False


def error_correlation(estimate, truth):
    return error_correlation_flagged(estimate, truth)[0]


def gaussian_kernel(window):
    """Normalized Gaussian weights of odd length ``window``, sigma = window/6."""
    if window == 1:
        return np.ones(1)
    half = (window - 1) // 2
    u = np.arange(-half, half + 1, dtype=float)
    k = np.exp(-0.5 * (u / (window / 6.0)) ** 2)
    return k / k.sum()


def gaussian_smooth(x, window):
    """Convolve with a Gaussian kernel, renormalizing the kernel at the edges.

    The output has the input's length and a constant input is returned
    unchanged bit for bit.
    """
    x = _as_1d(x)
    if int(window) != window or window < 1 or window % 2 == 0:
        raise InvalidInputError(f"window must be a positive odd integer, got {window}")
    window = int(window)
    if window > x.size:
        raise InvalidInputError(f"window {window} exceeds series length {x.size}")
    if window == 1:
        return x.copy()
    kernel = gaussian_kernel(window)
    half = window // 2
    ref = x[0]
    out = signal.convolve(x - ref, kernel, mode="same")
    # kernel mass inside the signal, for the samples within half a window of an end
    edge = np.cumsum(kernel)[half:window - 1]
    out[:half] /= edge
    out[x.size - half:] /= edge[::-1]
    return ref + out


def power_spectrum(series):
    """One-sided periodogram of the mean-removed signal.

    ``power[k] = c_k |X_k|^2 / m`` with ``c_k = 2`` except at DC and at the
    Nyquist bin (even ``m``) where ``c_k = 1``.  With this scaling the power
    summed over all non-DC bins equals ``m * var(values)`` (Parseval).
    """
    y = series.values
    m = y.size
    if m < 8:
        raise InvalidInputError(f"power spectrum needs at least 8 samples, got {m}")
    spec = np.fft.rfft(y - y.mean())
    power = np.abs(spec) ** 2 / m
    power[1:] *= 2.0
    if m % 2 == 0:
        power[-1] /= 2.0
    freqs = np.fft.rfftfreq(m, series.dt)
    return PowerSpectrum(freqs, power, series.dt)


def estimate_cutoff_frequency(spectrum, fraction=0.95):
    """Lowest frequency at which the cumulative non-DC power reaches ``fraction``.

    Deterministic stand-in for picking "where the power starts to drop" by eye.
    """
    if not 0 < fraction <= 1:
        raise InvalidInputError(f"fraction must lie in (0, 1], got {fraction}")
    power = spectrum.power[1:]
    total = float(power.sum())
    if not total > 0:
        raise NoSignalError("spectrum has no power outside the DC bin")
    cum = np.cumsum(power) / total
    idx = int(np.searchsorted(cum, fraction - 1e-12))
    idx = min(idx, power.size - 1)
    return float(spectrum.frequencies[1 + idx])
