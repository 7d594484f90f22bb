"""Clock functions ``g(t)`` defining the fractional derivative "with respect
to another function", plus MFPT regime classification.

A clock must satisfy ``g(0) = 0`` and ``g'(t) > 0`` for ``t > 0``. Every
clock carries its derivative explicitly; nothing here differentiates
numerically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import brentq

from gfracdiff.errors import BoundedClockError, InconclusiveLimitError, ParameterError

__all__ = [
    "Clock",
    "Custom",
    "Dodson",
    "Identity",
    "MFPTRegime",
    "PowerLaw",
    "classify_mfpt",
    "make_clock",
    "tail_exponent",
]

ArrayFn = Callable[[np.ndarray], np.ndarray]

#: decades used by the numeric limit tests for custom clocks
LIMIT_GRID = 10.0 ** np.arange(0, 9)
LIMIT_TOL = 1e-6
_CHECK_GRID = np.concatenate([[0.0], np.logspace(-6, 8, 141)])


# {{{ families


@dataclass(frozen=True)
class Identity:
    """``g(t) = t``: the classical Caputo derivative."""


@dataclass(frozen=True)
class PowerLaw:
    """``g(t) = t**beta`` (Erdelyi-Kober type)."""

    beta: float


@dataclass(frozen=True)
class Dodson:
    """``g(t) = (1 - exp(-beta_rate t)) / beta_rate``; ``1/beta_rate`` is the
    relaxation time."""

    beta_rate: float


@dataclass(frozen=True)
class Custom:
    """User clock. *limit* is ``None`` for unbounded clocks, else ``g(inf)``."""

    eval: ArrayFn
    deriv: ArrayFn
    limit: Optional[float] = None
    inverse: Optional[ArrayFn] = None
    label: str = "custom"


ClockFamily = Union[Identity, PowerLaw, Dodson, Custom]

# }}}


@dataclass(frozen=True)
class Clock:
    """A validated clock. Immutable; ``eval``/``deriv`` accept arrays."""

    eval: ArrayFn
    deriv: ArrayFn
    #: ``None`` if unbounded, else the finite limit ``g(inf) > 0``
    limit: Optional[float]
    label: str
    family: ClockFamily
    inverse_fn: Optional[ArrayFn] = None

    @property
    def bounded(self) -> bool:
        return self.limit is not None

    def __call__(self, t):
        return self.eval(t)

    def inverse(self, s):
        """Return ``t`` with ``g(t) = s``."""
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < 0) or (self.limit is not None and np.any(s_arr >= self.limit)):
            raise ParameterError("clock inverse requested outside the range of g")
        if self.inverse_fn is not None:
            out = np.asarray(self.inverse_fn(s_arr), dtype=float)
        else:
            out = np.vectorize(self._invert_scalar, otypes=[float])(s_arr)
        return float(out) if out.ndim == 0 else out

    def _invert_scalar(self, s: float) -> float:
        if s == 0.0:
            return 0.0
        hi = 1.0
        while float(self.eval(np.asarray(hi))) < s:
            hi *= 2.0
            if hi > 1e300:
                raise ParameterError(f"cannot invert clock at s={s}")
        return brentq(lambda t: float(self.eval(np.asarray(t))) - s, 0.0, hi, xtol=1e-300, rtol=1e-15)


def _validate(clock: Clock) -> None:
    t = _CHECK_GRID
    with np.errstate(all="ignore"):
        g = np.asarray(clock.eval(t), dtype=float)
        dg = np.asarray(clock.deriv(t[1:]), dtype=float)
    if g[0] != 0.0:
        raise ParameterError(f"clock {clock.label!r}: g(0) must be exactly 0, got {g[0]}")
    if not np.all(np.isfinite(g)) or not np.all(np.isfinite(dg)):
        raise ParameterError(f"clock {clock.label!r}: non-finite values on the check grid")
    # a bounded clock may underflow to g' = 0 once g has saturated at its limit
    live = np.ones_like(dg, dtype=bool) if clock.limit is None else g[1:] < clock.limit
    if np.any(dg < 0.0) or np.any(dg[live] <= 0.0):
        raise ParameterError(f"clock {clock.label!r}: g'(t) must be positive for t > 0")
    if np.any(np.diff(g) < 0.0):
        raise ParameterError(f"clock {clock.label!r}: g must be nondecreasing")
    if clock.limit is not None:
        if not clock.limit > 0.0:
            raise ParameterError("finite clock limit must be positive")
        if np.any(g > clock.limit * (1 + 1e-12)):
            raise ParameterError(f"clock {clock.label!r}: g exceeds its declared limit")


def make_clock(family: ClockFamily) -> Clock:
    """Build and validate a :class:`Clock` from a family description."""
    if isinstance(family, Identity):
        clock = Clock(
            eval=lambda t: np.asarray(t, dtype=float) * 1.0,
            deriv=lambda t: np.ones_like(np.asarray(t, dtype=float)),
            limit=None,
            label="identity",
            family=family,
            inverse_fn=lambda s: s * 1.0,
        )
    elif isinstance(family, PowerLaw):
        b = float(family.beta)
        if not (b > 0.0 and math.isfinite(b)):
            raise ParameterError(f"power-law exponent must be positive: got {b}")
        clock = Clock(
            eval=lambda t: np.asarray(t, dtype=float) ** b,
            deriv=lambda t: b * np.asarray(t, dtype=float) ** (b - 1.0),
            limit=None,
            label=f"power_law(beta={b:g})",
            family=family,
            inverse_fn=lambda s: s ** (1.0 / b),
        )
    elif isinstance(family, Dodson):
        r = float(family.beta_rate)
        if not (r > 0.0 and math.isfinite(r)):
            raise ParameterError(f"Dodson rate must be positive: got {r}")
        clock = Clock(
            eval=lambda t: -np.expm1(-r * np.asarray(t, dtype=float)) / r,
            deriv=lambda t: np.exp(-r * np.asarray(t, dtype=float)),
            limit=1.0 / r,
            label=f"dodson(beta={r:g})",
            family=family,
            inverse_fn=lambda s: -np.log1p(-r * s) / r,
        )
    elif isinstance(family, Custom):
        clock = Clock(
            eval=family.eval,
            deriv=family.deriv,
            limit=family.limit,
            label=family.label,
            family=family,
            inverse_fn=family.inverse,
        )
    else:
        raise ParameterError(f"unknown clock family: {family!r}")

    _validate(clock)
    return clock


class MFPTRegime(str, enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    NEVER_ABSORBED = "never_absorbed"


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1]: got {alpha}")


def _limit_sequence(clock: Clock, alpha: float) -> np.ndarray:
    t = LIMIT_GRID
    g = np.asarray(clock.eval(t), dtype=float)
    dg = np.asarray(clock.deriv(t), dtype=float)
    return t**2 * dg * g ** (-alpha - 1.0)


def classify_mfpt(clock: Clock, alpha: float) -> MFPTRegime:
    """Decide whether the mean first-passage time is finite.

    Bounded clocks leave a positive survival probability (``NEVER_ABSORBED``).
    For unbounded clocks and ``alpha < 1`` the density tail is
    ``g' g^(-alpha-1)``, so the MFPT is finite iff ``t^2 g' g^(-alpha-1) -> 0``.
    At ``alpha = 1`` the tail is exponential and the MFPT is always finite.

    Custom clocks are tested on ``t = 10^k, k = 0..8``: finite when the last
    three values strictly decrease and the last is below ``1e-6``, infinite
    when they are nondecreasing; anything else raises
    :class:`InconclusiveLimitError`.
    """
    _check_alpha(alpha)
    if clock.bounded:
        return MFPTRegime.NEVER_ABSORBED
    if alpha == 1.0:
        return MFPTRegime.FINITE

    family = clock.family
    if isinstance(family, Identity):
        return MFPTRegime.INFINITE
    if isinstance(family, PowerLaw):
        return MFPTRegime.FINITE if alpha * family.beta > 1.0 else MFPTRegime.INFINITE

    q = _limit_sequence(clock, alpha)[-3:]
    if np.all(np.diff(q) < 0) and q[-1] < LIMIT_TOL:
        return MFPTRegime.FINITE
    if np.all(np.diff(q) >= -1e-9 * np.abs(q[:-1])) and q[-1] >= LIMIT_TOL:
        return MFPTRegime.INFINITE
    raise InconclusiveLimitError(
        f"t^2 g' g^(-alpha-1) on t=1e6..1e8 for {clock.label!r}: {q.tolist()} "
        "neither decreases below 1e-6 nor is nondecreasing"
    )


def tail_exponent(clock: Clock, alpha: float) -> Optional[float]:
    """Exponent ``delta`` of the power-law density tail ``phi ~ t^(-delta)``.

    Returns ``1 + alpha*beta`` for power laws, ``1 + alpha`` for the identity,
    and for custom clocks the log-log slope of ``g' g^(-alpha-1)`` if it
    stabilizes over the last decades of the limit grid (else ``None``).
    ``alpha = 1`` has no power tail and returns ``None``.
    """
    _check_alpha(alpha)
    if clock.bounded:
        raise BoundedClockError(f"bounded clock {clock.label!r} has no power-law tail")
    if alpha == 1.0:
        return None
    family = clock.family
    if isinstance(family, Identity):
        return 1.0 + alpha
    if isinstance(family, PowerLaw):
        return 1.0 + alpha * family.beta

    t = LIMIT_GRID
    h = np.asarray(clock.deriv(t), dtype=float) * np.asarray(clock.eval(t), dtype=float) ** (-alpha - 1.0)
    slopes = np.diff(np.log(h)) / np.diff(np.log(t))
    last = slopes[-3:]
    if np.all(np.isfinite(last)) and np.ptp(last) < 1e-3:
        return float(-last[-1])
    return None
