"""Exception types raised by the solver."""

from __future__ import annotations


class GFracError(Exception):
    """Base class for all solver errors."""


class ParameterError(GFracError, ValueError):
    """An input is outside its admissible range."""


class ConvergenceError(GFracError, ArithmeticError):
    """A series or quadrature failed to reach the requested accuracy."""


class ThresholdError(ParameterError):
    """An asymptotic formula was requested outside its validity threshold."""


class BoundedClockError(ParameterError):
    """The operation needs an unbounded clock (or a bounded one) and got the other."""


class InconclusiveLimitError(GFracError):
    """A numeric limit test neither converged nor diverged on its grid."""


class TruncationError(ConvergenceError):
    """The mode truncation cannot resolve the requested evaluation."""
