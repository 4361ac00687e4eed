"""The four differentiation methods and their parameter types."""

from .butterworth import butterworth_diff
from .kalman import kalman_diff, kalman_filter
from .params import METHODS, PARAM_TYPES, Butterworth, Kalman, SavGol, Tvrj, params_to_dict
from .savgol import savgol_diff
from .tvrj import tvrj_diff

_DISPATCH = {
    "butterworth": butterworth_diff,
    "savgol": savgol_diff,
    "kalman": kalman_diff,
    "tvrj": tvrj_diff,
}


def differentiate(series, params):
    """Run the method selected by the type of ``params``."""
    return _DISPATCH[params.method](series, params)


__all__ = [
    "METHODS", "PARAM_TYPES", "Butterworth", "Kalman", "SavGol", "Tvrj",
    "butterworth_diff", "differentiate", "kalman_diff", "kalman_filter",
    "params_to_dict", "savgol_diff", "tvrj_diff",
]
