r"""Series solutions of g-fractional diffusion on a box with absorbing walls.

Every quantity is a mode sum over the Dirichlet eigen-system; the clock
enters only through ``g(t)`` (and ``g'(t)`` for the density):

.. math::

    u(r, t) = \sum_n u_{0,n} \phi_n(r) E_\alpha(-\lambda_n D g(t)^\alpha),

    P(t) = \sum_n u_{0,n} \Phi_n E_\alpha(-\lambda_n D g(t)^\alpha),

    \varphi(t) = D g'(t) g(t)^{\alpha-1}
        \sum_n \lambda_n u_{0,n} \Phi_n E_{\alpha,\alpha}(-\lambda_n D g(t)^\alpha).

Sums run over modes in ascending ``lambda_n`` so results are deterministic
for a fixed policy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import rgamma

from gfracdiff.clocks import Clock, MFPTRegime, PowerLaw, Identity, classify_mfpt, tail_exponent
from gfracdiff.errors import BoundedClockError, ConvergenceError, ParameterError, TruncationError
from gfracdiff.mittag_leffler import DEFAULT_ACCURACY, MLAccuracy, gamma, ml_one, ml_two
from gfracdiff.spectral import (
    BoxDomain,
    DeltaPeak,
    Density,
    InitialCondition,
    SeriesPolicy,
    SpectralCoefficients,
    check_density,
    eigenfunctions,
    eigenvalue,
    enumerate_modes,
)

logger = logging.getLogger(__name__)

__all__ = [
    "FPTDCurve",
    "MFPTResult",
    "SURVIVAL_AT_ZERO",
    "Scenario",
    "SeriesPolicy",
    "asymptotic_survival",
    "field",
    "field_points",
    "fptd",
    "fptd_curve",
    "fptd_generic",
    "fptd_rectangular",
    "fptd_tail_constant",
    "mfpt",
    "stationary_field",
    "survival",
]

#: P(0+) for a normalized initial condition; never obtained by summation
SURVIVAL_AT_ZERO = 1.0
NEGATIVE_FLOOR = -1e-12
_EXP_CUTOFF = 1e-12
_DENSITY_NEGLIGIBLE = 1e-2
# per-axis mode budget when resolving a density's projections
_DENSITY_AXIS_CAP = {1: 4096, 2: 256, 3: 64}


@dataclass(frozen=True)
class Scenario:
    """Everything that defines one diffusion problem. Immutable; the mode
    table is built lazily and cached."""

    domain: BoxDomain
    clock: Clock
    alpha: float
    ic: InitialCondition
    policy: SeriesPolicy = SeriesPolicy()
    accuracy: MLAccuracy = DEFAULT_ACCURACY

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1]: got {self.alpha}")
        if isinstance(self.ic, DeltaPeak):
            if len(self.ic.r0) != self.domain.dim or not self.domain.contains(self.ic.r0, strict=True):
                raise ParameterError(f"delta peak {list(self.ic.r0)} must be strictly inside the box")
        elif isinstance(self.ic, Density):
            check_density(self.domain, self.ic)
        else:
            raise ParameterError(f"unknown initial condition: {self.ic!r}")

    @property
    def diffusion(self) -> float:
        return self.domain.diffusion

    @cached_property
    def lambda_max(self) -> float:
        if self.policy.lambda_max is not None:
            return float(self.policy.lambda_max)
        return _default_lambda_max(self)

    @cached_property
    def modes(self) -> SpectralCoefficients:
        policy = replace(self.policy, lambda_max=self.lambda_max)
        return enumerate_modes(self.domain, policy, self.ic)

    @cached_property
    def _absorbing(self):
        """Modes with nonzero ``u0n * Phi_n`` (all-odd for a box)."""
        m = self.modes
        c = m.u0n * m.phi_integral
        keep = c != 0.0
        return m.lambdas[keep], c[keep]


# {{{ truncation


def _floor_lambda(domain: BoxDomain, per_axis: int) -> float:
    """Smallest cutoff keeping ``per_axis`` modes along every axis."""
    L = np.asarray(domain.lengths)
    base = (math.pi / L) ** 2
    return float(np.max(base * per_axis**2 + (base.sum() - base)))


def _cap_lambda(domain: BoxDomain, max_modes: int) -> float:
    # Weyl count of lattice points n_i >= 1 inside the ellipsoid, kept under the cap
    d = domain.dim
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    density = ball / 2**d * float(np.prod(np.asarray(domain.lengths) / math.pi))
    return 0.9 * (max_modes / density) ** (2.0 / d)


def _default_lambda_max(scn: Scenario) -> float:
    pol = scn.policy
    D = scn.diffusion
    s = float(scn.clock.eval(np.asarray(pol.t_min)))
    if scn.alpha == 1.0:
        lam = math.log(1.0 / _EXP_CUTOFF) / (D * s)
    else:
        # tail of the survival sum: sum_{n>N} (4/pi n) E_alpha(-lambda_n D s^alpha)
        # with E_alpha(-y) ~ 1/(y Gamma(1-alpha)) stays below rel_tol
        lam = 2.0 / (math.pi * pol.rel_tol * math.gamma(1.0 - scn.alpha) * D * s**scn.alpha)

    if isinstance(scn.ic, Density):
        lam = min(lam, _density_lambda(scn))

    lam = max(lam, _floor_lambda(scn.domain, pol.min_modes_per_axis))
    cap = _cap_lambda(scn.domain, pol.max_modes)
    if lam > cap:
        # the survival-tail bound is a worst case that ignores sign cancellation
        # between modes; in d >= 2 it nearly always exceeds the cap
        logger.info(
            "mode cutoff %.4g capped to %.4g by max_modes=%d; the rel_tol=%g "
            "truncation bound no longer holds near t_min=%g",
            lam, cap, pol.max_modes, pol.rel_tol, pol.t_min,
        )
        lam = max(cap, _floor_lambda(scn.domain, pol.min_modes_per_axis))
    return lam


def _density_lambda(scn: Scenario) -> float:
    """Cutoff beyond which the projections of a smooth density are negligible."""
    domain, pol = scn.domain, scn.policy
    per_axis = 16
    cap = min(_cap_lambda(domain, pol.max_modes), _floor_lambda(domain, _DENSITY_AXIS_CAP[domain.dim]))
    while True:
        lam = min(_floor_lambda(domain, per_axis), cap)
        probe = enumerate_modes(domain, replace(pol, lambda_max=lam), scn.ic)
        size = np.abs(probe.u0n)
        scale = float(np.max(size))
        big = np.nonzero(size > _DENSITY_NEGLIGIBLE * pol.rel_tol * scale)[0]
        last = float(probe.lambdas[big[-1]]) if big.size else float(probe.lambdas[0])
        if last < 0.5 * lam:
            return 2.0 * last
        if lam >= cap:
            logger.warning(
                "projections of %r still exceed %.1e of their peak at lambda=%.4g; "
                "is the density nonzero on the walls?",
                scn.ic.label, _DENSITY_NEGLIGIBLE * pol.rel_tol, lam,
            )
            return lam
        per_axis *= 2


def _check_times(scn: Scenario, t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(np.isnan(t)):
        raise ParameterError("evaluation time is NaN")
    if np.any(t < scn.policy.t_min * (1 - 1e-12)):
        raise TruncationError(
            f"t={np.min(t):.6g} is below t_min={scn.policy.t_min:g}; the mode "
            "series is not converged there under this policy"
        )
    return t


# }}}


def _scaled_clock(scn: Scenario, t: np.ndarray) -> np.ndarray:
    """``D g(t)^alpha``."""
    return scn.diffusion * np.asarray(scn.clock.eval(t), dtype=float) ** scn.alpha


def _relax(scn: Scenario, lambdas: np.ndarray, s: float) -> np.ndarray:
    return ml_one(scn.alpha, -lambdas * s, scn.accuracy)


def _maybe_scalar(t_in, out: np.ndarray):
    return float(out[0]) if np.ndim(t_in) == 0 else out.reshape(np.shape(t_in))


def field(scn: Scenario, r, t):
    """``u(r, t)`` at one point for scalar or array *t*."""
    times = _check_times(scn, t)
    m = scn.modes
    weights = m.u0n * eigenfunctions(scn.domain, m.indices, r)
    if not np.any(weights):
        return _maybe_scalar(t, np.zeros(times.shape))
    s = _scaled_clock(scn, times)
    out = np.array([np.dot(weights, _relax(scn, m.lambdas, si)) for si in s])
    return _maybe_scalar(t, out)


def field_points(scn: Scenario, points: np.ndarray, t: float) -> np.ndarray:
    """``u(r, t)`` for an ``(n_points, d)`` array of points at one time."""
    _check_times(scn, t)
    m = scn.modes
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    s = float(_scaled_clock(scn, np.asarray(t)))
    coeff = m.u0n * _relax(scn, m.lambdas, s)
    return _synthesize(scn.domain, m.indices, coeff, pts)


def _synthesize(domain: BoxDomain, indices: np.ndarray, coeff: np.ndarray, pts: np.ndarray) -> np.ndarray:
    L = np.asarray(domain.lengths)
    if np.any(pts < 0) or np.any(pts > L):
        raise ParameterError("field points must lie in the closed box")
    out = np.empty(len(pts))
    step = max(1, (1 << 22) // max(1, len(indices)))
    for start in range(0, len(pts), step):
        p = pts[start : start + step]
        basis = None
        for axis in range(domain.dim):
            # one sine table per axis, gathered by mode index
            n = np.arange(int(indices[:, axis].max()) + 1)
            table = math.sqrt(2.0 / L[axis]) * np.sin(math.pi * np.outer(p[:, axis], n) / L[axis])
            on_wall = (p[:, axis] == 0.0) | (p[:, axis] == L[axis])
            table[on_wall] = 0.0
            factor = table[:, indices[:, axis]]
            basis = factor if basis is None else np.multiply(basis, factor, out=basis)
        out[start : start + step] = basis @ coeff
    return out


def survival(scn: Scenario, t):
    """Survival probability ``P(t)``, nonincreasing, in ``[0, 1]``."""
    times = _check_times(scn, t)
    lambdas, c = scn._absorbing
    s = _scaled_clock(scn, times)
    out = np.array([np.dot(c, _relax(scn, lambdas, si)) for si in s])
    return _maybe_scalar(t, out)


def _density_sum(scn: Scenario, lambdas: np.ndarray, weights: np.ndarray, times: np.ndarray) -> np.ndarray:
    a, D = scn.alpha, scn.diffusion
    g = np.asarray(scn.clock.eval(times), dtype=float)
    dg = np.asarray(scn.clock.deriv(times), dtype=float)
    out = np.empty(times.shape)
    for i, (gi, dgi) in enumerate(zip(g, dg)):
        if dgi == 0.0:
            out[i] = 0.0
            continue
        e = ml_two(a, a, -lambdas * D * gi**a, scn.accuracy)
        out[i] = D * dgi * gi ** (a - 1.0) * np.dot(lambdas * weights, e)
    return out


def _clamp(values: np.ndarray) -> np.ndarray:
    if np.any(values < NEGATIVE_FLOOR):
        worst = float(np.min(values))
        raise TruncationError(
            f"first-passage density went negative ({worst:.3e}); the mode "
            "truncation under-resolves this time range"
        )
    return np.maximum(values, 0.0)


def fptd_generic(scn: Scenario, t):
    """Density from the full mode sum (even modes included with ``Phi_n = 0``)."""
    times = _check_times(scn, t)
    m = scn.modes
    out = _density_sum(scn, m.lambdas, m.u0n * m.phi_integral, times)
    return _maybe_scalar(t, _clamp(out))


def fptd_rectangular(scn: Scenario, t):
    """Density from the odd-mode box formula for a point source:
    prefactor ``4^d / pi^d`` times ``prod sin(pi n_i x_i0 / L_i) / n_i``."""
    if not isinstance(scn.ic, DeltaPeak):
        raise ParameterError("the rectangular closed form needs a delta-peak initial condition")
    times = _check_times(scn, t)
    m = scn.modes
    odd = m.all_odd
    idx = m.indices[odd]
    L = np.asarray(scn.domain.lengths)
    r0 = np.asarray(scn.ic.r0)
    shape = np.prod(np.sin(math.pi * idx * r0 / L) / idx, axis=1)
    d = scn.domain.dim
    out = _density_sum(scn, m.lambdas[odd], shape, times) * (4.0**d / math.pi**d)
    return _maybe_scalar(t, _clamp(out))


def fptd(scn: Scenario, t):
    """First-passage-time density ``phi(t) = -dP/dt``."""
    times = _check_times(scn, t)
    lambdas, c = scn._absorbing
    out = _density_sum(scn, lambdas, c, times)
    return _maybe_scalar(t, _clamp(out))


def _require_unbounded(scn: Scenario) -> None:
    if scn.clock.bounded:
        raise BoundedClockError(
            f"clock {scn.clock.label!r} is bounded: survival tends to a positive "
            "limit and there is no power-law tail"
        )


def _require_bounded(scn: Scenario) -> float:
    if not scn.clock.bounded:
        raise BoundedClockError(f"clock {scn.clock.label!r} is unbounded: no stationary state")
    return float(scn.clock.limit)


def spectral_moment(scn: Scenario, k: int = 1) -> float:
    """``sum_n u0n Phi_n / lambda_n^k`` over the truncated modes."""
    lambdas, c = scn._absorbing
    return float(np.dot(c, lambdas ** (-float(k))))


def fptd_tail_constant(scn: Scenario) -> float:
    """Constant ``C`` in ``phi(t) ~ C g'(t) g(t)^-(alpha+1)`` as ``t -> inf``."""
    _require_unbounded(scn)
    if scn.alpha == 1.0:
        # 1/Gamma(-1) = 0: the tail is exponential, not algebraic
        return 0.0
    return -spectral_moment(scn, 1) / (scn.diffusion * gamma(-scn.alpha))


@dataclass(frozen=True)
class FPTDCurve:
    times: np.ndarray
    density: np.ndarray
    #: ``None`` for bounded clocks and for alpha = 1
    tail_constant: Optional[float]

    def __post_init__(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise ParameterError("curve times must be strictly increasing")

    def asymptotic(self, clock: Clock, alpha: float) -> np.ndarray:
        if self.tail_constant is None:
            return np.full(self.times.shape, np.nan)
        g = np.asarray(clock.eval(self.times), dtype=float)
        return self.tail_constant * np.asarray(clock.deriv(self.times)) * g ** (-(alpha + 1.0))


def fptd_curve(scn: Scenario, times) -> FPTDCurve:
    times = np.asarray(times, dtype=float)
    tail = None
    if not scn.clock.bounded and scn.alpha < 1.0:
        tail = fptd_tail_constant(scn)
    return FPTDCurve(times=times, density=np.asarray(fptd(scn, times)), tail_constant=tail)


def stationary_field(scn: Scenario, r) -> float:
    """Frozen profile ``lim u(r, t)`` for a bounded clock with limit ``g_inf``."""
    g_inf = _require_bounded(scn)
    m = scn.modes
    weights = m.u0n * eigenfunctions(scn.domain, m.indices, r)
    e = _relax(scn, m.lambdas, scn.diffusion * g_inf**scn.alpha)
    return float(np.dot(weights, e))


def stationary_points(scn: Scenario, points: np.ndarray) -> np.ndarray:
    g_inf = _require_bounded(scn)
    m = scn.modes
    coeff = m.u0n * _relax(scn, m.lambdas, scn.diffusion * g_inf**scn.alpha)
    return _synthesize(scn.domain, m.indices, coeff, np.atleast_2d(points))


def asymptotic_survival(scn: Scenario) -> float:
    """``P_inf``: the probability of never being absorbed (bounded clock)."""
    g_inf = _require_bounded(scn)
    lambdas, c = scn._absorbing
    return float(np.dot(c, _relax(scn, lambdas, scn.diffusion * g_inf**scn.alpha)))


# {{{ mean first-passage time


@dataclass(frozen=True)
class MFPTResult:
    regime: MFPTRegime
    #: finite value, ``inf`` for INFINITE, ``None`` when undefined
    tau: Optional[float] = None
    error: Optional[float] = None
    tail_exponent: Optional[float] = None
    p_infinity: Optional[float] = None


def _tail_terms(scn: Scenario, n_terms: int = 6):
    """Coefficients ``a_k`` of ``P(t) ~ sum_k a_k (D g^alpha)^-k`` (alpha < 1)."""
    a = scn.alpha
    return [(-1.0) ** (k + 1) * float(rgamma(1.0 - a * k)) * spectral_moment(scn, k) for k in range(1, n_terms + 1)]


def _tail_survival(scn: Scenario, coeffs, t) -> np.ndarray:
    y = 1.0 / _scaled_clock(scn, np.atleast_1d(t))
    return sum(c * y ** (k + 1) for k, c in enumerate(coeffs))


def _clock_power_integral(scn: Scenario, power: float, t0: float) -> float:
    """``int_{t0}^inf g(t)^-power dt``."""
    fam = scn.clock.family
    if isinstance(fam, (PowerLaw, Identity)):
        b = fam.beta if isinstance(fam, PowerLaw) else 1.0
        if power * b <= 1.0:
            return math.inf
        return t0 ** (1.0 - power * b) / (power * b - 1.0)
    val, _ = integrate.quad(lambda t: float(scn.clock.eval(np.asarray(t))) ** (-power), t0, np.inf, limit=200)
    return val


def _log_quad(fn, t0: float, t1: float, rel: float):
    val, err = integrate.quad(
        lambda u: fn(math.exp(u)) * math.exp(u),
        math.log(t0), math.log(t1), epsabs=0.0, epsrel=rel, limit=400,
    )
    return val, err


def mfpt(scn: Scenario) -> MFPTResult:
    """Mean first-passage time ``int_0^inf P(t) dt`` with regime dispatch."""
    regime = classify_mfpt(scn.clock, scn.alpha)
    if regime is MFPTRegime.NEVER_ABSORBED:
        return MFPTResult(regime=regime, p_infinity=asymptotic_survival(scn))
    if regime is MFPTRegime.INFINITE:
        return MFPTResult(regime=regime, tau=math.inf, tail_exponent=tail_exponent(scn.clock, scn.alpha))

    t_min = scn.policy.t_min
    p_min = float(survival(scn, t_min))
    head = 0.5 * t_min * (SURVIVAL_AT_ZERO + p_min)
    head_err = 0.5 * t_min * abs(SURVIVAL_AT_ZERO - p_min)

    def P(t: float) -> float:
        return float(survival(scn, t))

    lam1 = float(scn._absorbing[0][0])
    if scn.alpha == 1.0:
        t_star = t_min
        while P(t_star) > 1e-16 * max(p_min, 1e-300):
            t_star *= 2.0
            if t_star > 1e300:
                raise ConvergenceError("survival did not decay while searching for the tail cutoff")
        dg = float(scn.clock.deriv(np.asarray(t_star)))
        tail = P(t_star) / (lam1 * scn.diffusion * dg)
        tail_err = tail
    else:
        coeffs = _tail_terms(scn)
        t_star = max(t_min, float(scn.clock.inverse((50.0 / (lam1 * scn.diffusion)) ** (1.0 / scn.alpha))))
        while True:
            exact = P(t_star)
            approx = float(_tail_survival(scn, coeffs, t_star)[0])
            if abs(approx - exact) <= 1e-9 * abs(exact):
                break
            t_star *= 2.0
            if t_star > 1e200:
                raise ConvergenceError("asymptotic survival never matched the series")
        tail = sum(c * _clock_power_integral(scn, scn.alpha * (k + 1), t_star) / scn.diffusion ** (k + 1)
                   for k, c in enumerate(coeffs))
        tail_err = abs(approx - exact) / abs(exact) * abs(tail)

    body, body_err = (0.0, 0.0) if t_star <= t_min else _log_quad(P, t_min, t_star, 1e-11)
    tau = head + body + tail
    err = head_err + body_err + tail_err + abs(tau) * scn.policy.rel_tol
    return MFPTResult(regime=regime, tau=tau, error=err)


# }}}
