"""Parameter selection for numerical differentiation of noisy time series."""

from .core import (
    DerivativeEstimate,
    EvalMetrics,
    PowerSpectrum,
    TimeSeries,
    error_correlation,
    estimate_cutoff_frequency,
    finite_difference,
    gaussian_smooth,
    power_spectrum,
    rmse,
    total_variation,
    trapezoidal_integral,
)
from .errors import (
    ConvergenceError,
    FitError,
    GammaDiffError,
    InvalidInputError,
    NoSignalError,
    OptimizationError,
)

__version__ = "0.1.0"
