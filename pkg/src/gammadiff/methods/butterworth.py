"""Zero-phase Butterworth low-pass followed by a finite difference."""

from scipy import signal

from ..core import DerivativeEstimate, finite_difference
from ..errors import InvalidInputError


def pad_length(order):
    return 3 * (order + 1)


def butterworth_diff(series, params):
    """Filter forward and backward with a digital Butterworth low-pass.

    The filter comes from the bilinear transform with frequency pre-warping
    (``scipy.signal.butter``), is applied in second-order sections, and the
    signal is odd-reflected by ``3 * (order + 1)`` samples at both ends.
    """
    nyquist = series.nyquist
    if not params.cutoff < nyquist:
        raise InvalidInputError(
            f"cutoff {params.cutoff} must be below the Nyquist frequency {nyquist}"
        )
    padlen = pad_length(params.order)
    y = series.values
    if y.size <= padlen:
        raise InvalidInputError(
            f"series of length {y.size} is too short for order {params.order} "
            f"(needs more than {padlen} samples)"
        )
    sos = signal.butter(params.order, params.cutoff, btype="low", output="sos", fs=1.0 / series.dt)
    # filtering deviations from y[0] keeps a constant input exactly constant
    x_hat = y[0] + signal.sosfiltfilt(sos, y - y[0], padtype="odd", padlen=padlen)
    return DerivativeEstimate(x_hat, finite_difference(x_hat, series.dt))
