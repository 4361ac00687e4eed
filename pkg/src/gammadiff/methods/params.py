"""Per-method parameter sets.

Each class validates its own bounds on construction. Bounds that depend on
the data (cutoff below Nyquist, window no longer than the series) are
checked by the method that consumes the parameters.
"""

from dataclasses import dataclass

from ..errors import InvalidInputError


def _is_int(value):
    return int(value) == value


@dataclass(frozen=True)
class Butterworth:
    order: int
    cutoff: float

    method = "butterworth"

    def __post_init__(self):
        if not _is_int(self.order) or self.order < 1:
            raise InvalidInputError(f"order must be an integer >= 1, got {self.order}")
        if not self.cutoff > 0:
            raise InvalidInputError(f"cutoff must be positive, got {self.cutoff}")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "cutoff", float(self.cutoff))


@dataclass(frozen=True)
class SavGol:
    window: int
    polyorder: int
    smooth_window: int = 1

    method = "savgol"

    def __post_init__(self):
        for name in ("window", "polyorder", "smooth_window"):
            if not _is_int(getattr(self, name)):
                raise InvalidInputError(f"{name} must be an integer")
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.window < 3 or self.window % 2 == 0:
            raise InvalidInputError(f"window must be odd and >= 3, got {self.window}")
        if not 1 <= self.polyorder <= self.window - 1:
            raise InvalidInputError(
                f"polyorder must lie in [1, window-1], got {self.polyorder}"
            )
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise InvalidInputError(
                f"smooth_window must be odd and >= 1, got {self.smooth_window}"
            )


@dataclass(frozen=True)
class Kalman:
    q: float
    r: float

    method = "kalman"

    def __post_init__(self):
        if not (self.q > 0 and self.r > 0):
            raise InvalidInputError(f"q and r must be positive, got q={self.q}, r={self.r}")
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "r", float(self.r))


@dataclass(frozen=True)
class Tvrj:
    gamma_tv: float

    method = "tvrj"

    def __post_init__(self):
        if not self.gamma_tv >= 0:
            raise InvalidInputError(f"gamma_tv must be nonnegative, got {self.gamma_tv}")
        object.__setattr__(self, "gamma_tv", float(self.gamma_tv))


PARAM_TYPES = {cls.method: cls for cls in (Butterworth, SavGol, Kalman, Tvrj)}
METHODS = tuple(PARAM_TYPES)


def params_to_dict(params):
    out = {"method": params.method}
    out.update(vars(params))
    return out
