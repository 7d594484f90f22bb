r"""Mittag-Leffler functions on the real axis.

.. math::

    E_{\alpha,\beta}(x) = \sum_{k=0}^\infty \frac{x^k}{\Gamma(\alpha k + \beta)},
    \qquad E_\alpha = E_{\alpha,1}.

Evaluation is split into three regimes, chosen per element:

* power series (compensated summation) for small ``|x|`` where the
  alternating terms do not cancel catastrophically;
* inverse Laplace transform on a parabolic Talbot-type contour for the
  intermediate range;
* the algebraic asymptotic expansion for ``x <= -x_asym``.

Only ``0 < alpha <= 1`` is supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gamma as _gamma, gammaln, hyp1f1, rgamma

from gfracdiff.errors import ConvergenceError, ParameterError, ThresholdError

__all__ = [
    "DEFAULT_ACCURACY",
    "MLAccuracy",
    "gamma",
    "ml_one",
    "ml_two",
    "ml_two_asymptotic",
    "rgamma_affine",
]

# Weideman-Trefethen parabolic contour for t = 1, step h = 3/N.
_PARABOLA = (0.1309, 0.1194, 0.2500)
_SERIES_PEAK = 10.0
#: within this distance of alpha = beta = 1 the contour integrates the
#: difference to the exponential, whose size scales with the distance
_NEAR_ONE = 0.05
_CHUNK = 1 << 15


@dataclass(frozen=True)
class MLAccuracy:
    """Accuracy and regime controls for the Mittag-Leffler evaluators."""

    rel_tol: float = 1e-10
    max_terms: int = 10_000
    #: upper bound on ``|x|`` for the power series (further limited by conditioning)
    x_series: float = 7.0
    #: ``x <= -x_asym`` uses the asymptotic expansion
    x_asym: float = 50.0
    contour_nodes: int = 32

    def __post_init__(self) -> None:
        if not 0.0 < self.rel_tol <= 1e-4:
            raise ParameterError(f"rel_tol must lie in (0, 1e-4]: got {self.rel_tol}")
        if self.max_terms < 50:
            raise ParameterError(f"max_terms must be >= 50: got {self.max_terms}")
        if not 0.0 < self.x_series < self.x_asym:
            raise ParameterError("need 0 < x_series < x_asym")
        if self.contour_nodes < 8:
            raise ParameterError("contour_nodes must be >= 8")


DEFAULT_ACCURACY = MLAccuracy()


def gamma(x: float) -> float:
    """Gamma function, including negative non-integer arguments."""
    return math.gamma(x)


def rgamma_affine(beta: float, alpha: float, k: int) -> float:
    """``1 / Gamma(beta - alpha k)`` with the argument formed exactly.

    Rounding ``beta - alpha k`` next to a pole of ``Gamma`` (alpha close to
    1) would cost about ``eps / distance`` in relative accuracy, so the
    distance to the nearest integer is computed in rational arithmetic and
    the reflection formula takes over left of 1/2.
    """
    z = Fraction(beta) - Fraction(alpha) * k
    n = round(z)
    delta = float(z - n)
    if n + delta >= 0.5:
        return float(rgamma(float(z)))
    if delta == 0.0:
        return 0.0
    # 1/Gamma(z) = sin(pi z) Gamma(1 - z) / pi, sin(pi (n + d)) = (-1)^n sin(pi d)
    with np.errstate(over="ignore"):
        g = float(_gamma((1 - n) - delta))
    return (-1.0) ** (n % 2) * math.sin(math.pi * delta) * g / math.pi


def _check_order(alpha: float, beta: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1]: got {alpha}")
    if not beta > 0.0:
        raise ParameterError(f"beta must be positive: got {beta}")


# {{{ series


@lru_cache(maxsize=256)
def _series_radius(alpha: float, beta: float, x_series: float) -> float:
    """Largest ``r <= x_series`` such that no series term at ``x = -r`` exceeds
    ``_SERIES_PEAK`` in magnitude (limits cancellation to about one digit)."""
    k = np.arange(1, 4000)
    lg = gammaln(alpha * k + beta)

    def peak(r: float) -> float:
        return float(np.max(k * math.log(r) - lg))

    limit = math.log(_SERIES_PEAK)
    if peak(x_series) <= limit:
        return x_series
    lo, hi = 0.0, x_series
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mid > 0 and peak(mid) > limit:
            hi = mid
        else:
            lo = mid
    return lo


def _series(alpha: float, beta: float, x: np.ndarray, max_terms: int) -> np.ndarray:
    # Neumaier summation, vectorized over x
    total = np.full(x.shape, float(rgamma(beta)))
    comp = np.zeros_like(x)
    power = np.ones_like(x)
    eps = np.finfo(float).eps
    quiet = 0
    for k in range(1, max_terms):
        power = power * x
        term = power * rgamma(alpha * k + beta)
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
        if np.all(np.abs(term) <= 0.25 * eps * np.abs(total + comp)):
            quiet += 1
            if quiet >= 3:
                return total + comp
        else:
            quiet = 0
    raise ConvergenceError(
        f"Mittag-Leffler series did not converge within {max_terms} terms "
        f"(alpha={alpha}, beta={beta}, max|x|={np.max(np.abs(x)):.3g})"
    )


# }}}

# {{{ contour


@lru_cache(maxsize=64)
def _contour_nodes(alpha: float, beta: float, n: int):
    a, b, c = _PARABOLA
    h = 3.0 / n
    u = h * np.arange(n + 1)
    s = n * (a - b * u**2 + 1j * c * u)
    ds = n * (-2.0 * b * u + 1j * c)
    weight = np.exp(s) * s ** (alpha - beta) * ds
    weight[0] *= 0.5
    return s**alpha, weight * (h / math.pi)


def _contour(alpha: float, beta: float, x: np.ndarray, n: int) -> np.ndarray:
    # Bromwich inversion of s^(alpha-beta) / (s^alpha - x) at t = 1; for x < 0
    # and alpha < 1 there are no poles on the principal sheet.
    s_alpha, weight = _contour_nodes(alpha, beta, n)
    out = np.empty(x.shape)
    for start in range(0, x.size, _CHUNK):
        z = x[start : start + _CHUNK, None]
        out[start : start + _CHUNK] = np.imag(weight / (s_alpha - z)).sum(axis=1)
    return out


def _contour_near_one(alpha: float, beta: float, x: np.ndarray, n: int) -> np.ndarray:
    # E_{alpha,beta}(x) = e^x + inverse transform of
    #   s^(alpha-beta) / (s^alpha - x) - 1 / (s - x)
    #   = [s^alpha expm1((1-beta) L) - x expm1((alpha-beta) L)] / ((s^alpha - x)(s - x)),
    # L = log s; both expm1 terms keep full relative accuracy as alpha, beta -> 1
    s, s_alpha, weight = _near_one_nodes(alpha, beta, n)
    e1, e2 = np.expm1((1.0 - beta) * np.log(s)), np.expm1((alpha - beta) * np.log(s))
    out = np.empty(x.shape)
    for start in range(0, x.size, _CHUNK):
        z = x[start : start + _CHUNK, None]
        num = s_alpha * e1 - z * e2
        out[start : start + _CHUNK] = np.imag(weight * num / ((s_alpha - z) * (s - z))).sum(axis=1)
    return np.exp(x) + out


@lru_cache(maxsize=64)
def _near_one_nodes(alpha: float, beta: float, n: int):
    a, b, c = _PARABOLA
    h = 3.0 / n
    u = h * np.arange(n + 1)
    s = n * (a - b * u**2 + 1j * c * u)
    ds = n * (-2.0 * b * u + 1j * c)
    weight = np.exp(s) * ds
    weight[0] *= 0.5
    return s, s**alpha, weight * (h / math.pi)


# }}}

# {{{ asymptotic


@lru_cache(maxsize=256)
def _asymptotic_coefficients(alpha: float, beta: float, x_min: float, rel_tol: float):
    """Coefficients ``1/Gamma(beta - alpha k)``, truncated where the series is
    smallest (or converged) at ``|x| = x_min``.

    ``1/Gamma`` vanishes whenever ``beta - alpha k`` hits a nonpositive
    integer, so single terms can be spuriously tiny; the size of the
    remainder is judged by the envelope of two consecutive terms.
    """
    coeffs = [rgamma_affine(beta, alpha, k) for k in range(1, 402)]
    terms = [abs(c) * x_min ** (-k) for k, c in enumerate(coeffs, 1)]
    envelope = [max(a, b) for a, b in zip(terms, terms[1:])]
    total = 0.0
    best_k, best = 0, math.inf
    for k in range(len(envelope)):
        total += coeffs[k] * (-x_min) ** (-(k + 1))
        # remainder after keeping terms 1..k+1 is about the next envelope value
        rest = envelope[k + 1] if k + 1 < len(envelope) else math.inf
        if rest < best:
            best_k, best = k + 1, rest
        elif rest > 10.0 * best:
            break
        if rest <= 1e-3 * rel_tol * abs(total):
            break
    if best > rel_tol * abs(total):
        raise ConvergenceError(
            f"asymptotic expansion cannot reach rel_tol={rel_tol} at |x|={x_min} "
            f"(alpha={alpha}, beta={beta})"
        )
    return np.array(coeffs[:best_k])


def _asymptotic(alpha: float, beta: float, x: np.ndarray, x_min: float, rel_tol: float) -> np.ndarray:
    coeffs = _asymptotic_coefficients(alpha, beta, x_min, rel_tol)
    y = 1.0 / x
    acc = np.zeros_like(x)
    for c in coeffs[::-1]:
        acc = (acc + c) * y
    return -acc


# }}}


def ml_two(alpha: float, beta: float, x, accuracy: MLAccuracy = DEFAULT_ACCURACY):
    """Evaluate the two-parameter Mittag-Leffler function :math:`E_{\\alpha,\\beta}(x)`.

    *x* may be a scalar or an array; the result has the same shape. Accuracy
    is about ``accuracy.rel_tol`` relative on ``x in [-1e6, 10]``.
    """
    _check_order(alpha, beta)
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if not np.all(np.isfinite(xs)):
        raise ParameterError("Mittag-Leffler argument must be finite")

    out = np.empty_like(xs)
    if alpha == 1.0:
        if beta == 1.0:
            out[:] = np.exp(xs)
        else:
            out[:] = hyp1f1(1.0, beta, xs) * rgamma(beta)
    else:
        radius = _series_radius(alpha, beta, accuracy.x_series)
        pos = xs > 0.0
        small = (xs <= 0.0) & (-xs <= radius)
        far = xs <= -accuracy.x_asym
        mid = ~(pos | small | far)

        if np.any(pos):
            if np.max(xs[pos]) ** (1.0 / alpha) > 700.0:
                raise ConvergenceError(
                    f"E_alpha,beta overflows for x={np.max(xs[pos]):.3g}, alpha={alpha}"
                )
            out[pos] = _series(alpha, beta, xs[pos], accuracy.max_terms)
        if np.any(small):
            out[small] = _series(alpha, beta, xs[small], accuracy.max_terms)
        near_one = max(1.0 - alpha, abs(1.0 - beta)) < _NEAR_ONE
        if np.any(mid):
            contour = _contour_near_one if near_one else _contour
            out[mid] = contour(alpha, beta, xs[mid], accuracy.contour_nodes)
        if np.any(far):
            out[far] = _asymptotic(alpha, beta, xs[far], accuracy.x_asym, accuracy.rel_tol)
            if near_one:
                # alpha -> 1 limit of the exponentially small saddle-point term;
                # it only matters once the algebraic part is O(1 - alpha)
                out[far] += np.exp(xs[far])

    if scalar:
        return float(out[0])
    return out.reshape(np.shape(x))


def ml_one(alpha: float, x, accuracy: MLAccuracy = DEFAULT_ACCURACY):
    """Evaluate the one-parameter Mittag-Leffler function :math:`E_\\alpha(x)`."""
    return ml_two(alpha, 1.0, x, accuracy)


def ml_two_asymptotic(alpha: float, x, order_k: int = 1, threshold: float = 10.0):
    """Truncated large-argument expansion of :math:`E_{\\alpha,\\alpha}(x)`, ``x < 0``.

    Keeps the first *order_k* terms ``-x^{-j} / Gamma(alpha - alpha j)`` for
    ``j = 2, 3, ...``; ``order_k=1`` is the leading ``-x^{-2}/Gamma(-alpha)``.
    The remainder after the first term is ``O(|x|^{-3})``.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1): got {alpha}")
    if order_k < 1:
        raise ParameterError("order_k must be >= 1")
    xs = np.asarray(x, dtype=float)
    if np.any(xs > -threshold):
        raise ThresholdError(f"asymptotic expansion needs x <= -{threshold}")
    total = np.zeros_like(xs)
    for j in range(order_k + 1, 1, -1):
        total = total - xs ** (-j) * rgamma_affine(alpha, alpha, j)
    return float(total) if total.ndim == 0 else total
