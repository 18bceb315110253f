"""Exception types raised by the solver."""

from __future__ import annotations


class HopflowError(Exception):
    """Base class for all solver errors."""


class GridMismatch(HopflowError, ValueError):
    pass


class CurlTooLarge(HopflowError, ValueError):
    """The velocity field has no single-valued potential."""

    def __init__(self, residual: float, limit: float):
        super().__init__(f"curl residual {residual:.3e} exceeds tolerance {limit:.3e}")
        self.residual = residual
        self.limit = limit


class PeriodCirculationNonzero(HopflowError, ValueError):
    """Loop integral across a periodic axis is nonzero, so psi would be multivalued."""

    def __init__(self, axis: int, circulation: float, limit: float):
        super().__init__(
            f"circulation {circulation:.3e} across periodic axis {axis} exceeds {limit:.3e}"
        )
        self.axis = axis
        self.circulation = circulation


class NonPositivePsi(HopflowError, ValueError):
    pass


class ZeroAmplitude(HopflowError, ValueError):
    pass


class TimeOffsetTooSmall(HopflowError, ValueError):
    pass


class NonPositiveTime(HopflowError, ValueError):
    pass


class UnstableStep(HopflowError, ValueError):
    pass


class NotConverged(HopflowError):
    """Fixed-point iteration hit its iteration cap; ``trace`` holds the history."""

    def __init__(self, trace, message: str | None = None):
        if message is None:
            last = trace.differences[-1] if trace.differences else float("nan")
            message = (
                f"fixed-point iteration did not converge in {trace.iterations_used} "
                f"iterations (last difference {last:.3e})"
            )
        super().__init__(message)
        self.trace = trace
