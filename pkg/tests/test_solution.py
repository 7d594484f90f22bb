from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from gfracdiff.clocks import Dodson, Identity, MFPTRegime, PowerLaw, make_clock
from gfracdiff.errors import BoundedClockError, ParameterError, TruncationError
from gfracdiff.solution import (
    SURVIVAL_AT_ZERO,
    Scenario,
    asymptotic_survival,
    field,
    field_points,
    fptd,
    fptd_curve,
    fptd_generic,
    fptd_rectangular,
    fptd_tail_constant,
    mfpt,
    stationary_field,
    survival,
)
from gfracdiff.spectral import BoxDomain, DeltaPeak, Density, SeriesPolicy, gaussian_density

from oracles import (
    classical_field_center,
    classical_fptd_center,
    classical_survival_center,
    mellin_mfpt_power_law,
)

# frozen oracle values (scripted classical sums and mpmath, see oracles.py)
CLASSICAL_FIELD = 0.745693231264826  # r = 0.5, t = 0.1
CLASSICAL_SURVIVAL = 0.4744874603797491
CLASSICAL_FPTD = 4.678353074531604
DODSON_STATIONARY_CENTER = 0.140468511457153852  # sum 2 sin^2(n pi/2) E_1/2(-n^2 pi^2)
DODSON_P_INF = 0.0701558756013849974
TAIL_CONSTANT_HALF = 1 / (16 * math.sqrt(math.pi))  # (1/8) / (2 sqrt(pi))
MFPT_POWER_LAW = 0.3546813071406  # alpha 0.75, g = t^2, Mellin closed form

LINE = BoxDomain((1.0,), 1.0)
SQUARE = BoxDomain((1.0, 1.0), 1.0)


def scenario(domain=LINE, clock=Identity(), alpha=0.5, r0=None, **policy):
    ic = DeltaPeak(r0 if r0 is not None else domain.center)
    return Scenario(domain, make_clock(clock), alpha, ic, SeriesPolicy(**policy))


def rel(a, b):
    return abs(a - b) / abs(b)


def test_frozen_values_reproduce():
    assert rel(classical_field_center(0.1), CLASSICAL_FIELD) < 1e-14
    assert rel(classical_survival_center(0.1), CLASSICAL_SURVIVAL) < 1e-14
    assert rel(classical_fptd_center(0.1), CLASSICAL_FPTD) < 1e-14


class TestScenario:
    def test_alpha_range(self):
        for a in (0.0, 1.2):
            with pytest.raises(ParameterError):
                scenario(alpha=a)

    def test_delta_interior(self):
        with pytest.raises(ParameterError):
            scenario(r0=(1.0,))
        with pytest.raises(ParameterError):
            scenario(r0=(0.5, 0.5))

    def test_density_normalized(self):
        with pytest.raises(ParameterError):
            Scenario(LINE, make_clock(Identity()), 0.5, Density(lambda x: 3 * np.ones_like(x)))

    def test_unknown_ic(self):
        with pytest.raises(ParameterError):
            Scenario(LINE, make_clock(Identity()), 0.5, "delta")


class TestField:
    def test_boundary(self):
        scn = scenario(SQUARE, PowerLaw(2.0), 0.6)
        assert field(scn, (0.0, 0.3), 1.0) == 0.0
        assert field(scn, (0.4, 1.0), 1.0) == 0.0
        pts = np.array([[0.0, 0.5], [1.0, 0.2], [0.3, 0.0]])
        assert np.all(field_points(scn, pts, 1.0) == 0.0)

    def test_classical(self):
        scn = scenario(alpha=1.0)
        assert rel(field(scn, (0.5,), 0.1), CLASSICAL_FIELD) < 1e-10

    def test_time_change_example(self):
        a = scenario(clock=PowerLaw(2.0), alpha=0.5, t_min=1e-3, lambda_max=1e6)
        b = scenario(clock=Identity(), alpha=0.5, t_min=1e-6, lambda_max=1e6)
        assert rel(field(a, (0.5,), 0.1), field(b, (0.5,), 0.01)) < 1e-12

    def test_points_match_single(self):
        scn = scenario(SQUARE, Identity(), 0.7)
        pts = np.array([[0.2, 0.3], [0.5, 0.5], [0.9, 0.1]])
        vals = field_points(scn, pts, 0.05)
        for p, v in zip(pts, vals):
            assert rel(field(scn, p, 0.05), v) < 1e-12

    def test_outside(self):
        with pytest.raises(ParameterError):
            field(scenario(), (1.2,), 1.0)

    def test_early_time_refused(self):
        scn = scenario(t_min=1e-2)
        with pytest.raises(TruncationError):
            field(scn, (0.5,), 1e-3)
        with pytest.raises(ParameterError):
            survival(scn, float("nan"))

    def test_vector_times(self):
        scn = scenario(alpha=0.8)
        t = np.array([0.01, 0.1])
        out = field(scn, (0.3,), t)
        assert out.shape == (2,)
        assert out[0] == field(scn, (0.3,), 0.01)


class TestSurvival:
    def test_classical(self):
        assert rel(survival(scenario(alpha=1.0), 0.1), CLASSICAL_SURVIVAL) < 1e-10

    @pytest.mark.parametrize("clock", [Identity(), PowerLaw(2.0), Dodson(1.0)])
    def test_bounds_and_monotone(self, clock):
        scn = scenario(SQUARE, clock, 0.6, r0=(0.3, 0.6))
        t = np.geomspace(1e-3, 1e3, 200)
        p = survival(scn, t)
        assert np.all(p >= 0) and np.all(p <= 1 + 1e-6)
        assert np.all(np.diff(p) <= 1e-15)

    def test_unbounded_decays(self):
        assert survival(scenario(alpha=0.5, clock=PowerLaw(2.0)), 1e6) < 1e-5

    def test_dodson_limit(self):
        scn = scenario(clock=Dodson(1.0))
        assert abs(survival(scn, 50.0) - asymptotic_survival(scn)) < 1e-12

    def test_survival_at_zero_constant(self):
        assert SURVIVAL_AT_ZERO == 1.0

    def test_deterministic(self):
        scn = scenario(SQUARE, PowerLaw(1.5), 0.7)
        t = np.geomspace(1e-2, 10, 7)
        a = survival(scn, t)
        b = survival(scenario(SQUARE, PowerLaw(1.5), 0.7), t)
        assert np.array_equal(a, b)


class TestFPTD:
    def test_classical(self):
        assert rel(fptd(scenario(alpha=1.0), 0.1), CLASSICAL_FPTD) < 1e-10

    @pytest.mark.parametrize("clock,alpha", [(Identity(), 0.5), (PowerLaw(2.0), 0.7), (Dodson(0.5), 0.8)])
    def test_minus_derivative_of_survival(self, clock, alpha):
        scn = scenario(SQUARE, clock, alpha, r0=(0.4, 0.55))
        for t in (0.05, 0.3, 2.0):
            h = 1e-4 * t
            d = (survival(scn, t - h) - survival(scn, t + h)) / (2 * h)
            assert rel(d, fptd(scn, t)) < 1e-4

    def test_generic_equals_rectangular(self):
        scn = scenario(BoxDomain((1.0, 2.0, 0.7)), PowerLaw(1.3), 0.65, r0=(0.2, 1.1, 0.3), lambda_max=3000.0)
        t = np.array([0.05, 0.5, 5.0])
        assert np.allclose(fptd_generic(scn, t), fptd_rectangular(scn, t), rtol=1e-10, atol=0)

    def test_rectangular_needs_delta(self):
        scn = Scenario(LINE, make_clock(Identity()), 0.5, gaussian_density(LINE, (0.5,), 0.08))
        with pytest.raises(ParameterError):
            fptd_rectangular(scn, 0.1)

    def test_nonnegative(self):
        scn = scenario(SQUARE, PowerLaw(2.0), 0.4)
        assert np.all(fptd(scn, np.geomspace(0.05, 1e4, 60)) >= 0)

    def test_curve(self):
        scn = scenario(clock=PowerLaw(2.0), alpha=0.6)
        c = fptd_curve(scn, [0.1, 1.0, 10.0])
        assert c.tail_constant == pytest.approx(fptd_tail_constant(scn))
        asym = c.asymptotic(scn.clock, 0.6)
        assert rel(asym[-1], c.density[-1]) < 0.05
        assert fptd_curve(scenario(alpha=1.0), [0.1]).tail_constant is None
        assert np.isnan(fptd_curve(scenario(clock=Dodson(1.0)), [0.1]).asymptotic(make_clock(Dodson(1.0)), 0.5)).all()
        with pytest.raises(ParameterError):
            fptd_curve(scn, [1.0, 0.5])

    @pytest.mark.parametrize("alpha,beta", [(0.5, 2.0), (0.7, 1.5), (0.3, 3.0)])
    def test_tail_slope(self, alpha, beta):
        scn = scenario(clock=PowerLaw(beta), alpha=alpha, t_min=1.0)
        t = np.logspace(2, 4, 21)
        slope = np.polyfit(np.log(t), np.log(fptd(scn, t)), 1)[0]
        assert rel(-slope, 1 + alpha * beta) < 0.02

    def test_normalization(self):
        # int_{t_min}^inf phi + P(t_min) = 1, with the tail beyond T from the tail law
        scn = scenario(SQUARE, PowerLaw(2.0), 0.75, t_min=1e-2)
        T = 1e4
        # int_t0^inf phi = P(t0)
        t0 = 2e-2  # the delta start is hardest to resolve at t_min itself
        body, _ = integrate.quad(lambda u: fptd(scn, math.exp(u)) * math.exp(u), math.log(t0), math.log(T), limit=400)
        C = fptd_tail_constant(scn)
        tail = C * T ** (-2 * 0.75) / 0.75  # int_T^inf C g' g^-(a+1) = C g(T)^-a / a
        assert abs(body + tail - survival(scn, t0)) < 1e-6


class TestTailConstant:
    def test_example(self):
        scn = scenario(alpha=0.5)
        assert rel(fptd_tail_constant(scn), TAIL_CONSTANT_HALF) < 1e-7

    def test_positive(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            r0 = tuple(rng.uniform(0.02, 0.98, 2))
            assert fptd_tail_constant(scenario(SQUARE, Identity(), 0.6, r0=r0)) > 0

    def test_bounded(self):
        with pytest.raises(BoundedClockError):
            fptd_tail_constant(scenario(clock=Dodson(1.0)))

    def test_classical(self):
        assert fptd_tail_constant(scenario(alpha=1.0)) == 0.0

    def test_ratio_converges(self):
        scn = scenario(alpha=0.5)
        t = np.array([1e4, 1e6])
        ratio = fptd(scn, t) * t**1.5 / fptd_tail_constant(scn)
        assert abs(math.log(ratio[-1])) < abs(math.log(ratio[0])) and abs(ratio[-1] - 1) < 1e-3


class TestMFPT:
    def test_classical(self):
        res = mfpt(scenario(alpha=1.0))
        assert res.regime is MFPTRegime.FINITE
        assert abs(res.tau - 0.125) < 1e-6 and res.error < 1e-6

    @pytest.mark.parametrize("x0", [0.2, 0.37, 0.9])
    def test_classical_off_center(self, x0):
        exact = x0 * (1 - x0) / 2
        res = mfpt(scenario(alpha=1.0, r0=(x0,)))
        assert abs(res.tau - exact) <= res.error
        assert abs(mfpt(scenario(alpha=1.0, r0=(x0,), t_min=1e-4)).tau - exact) < 1e-6

    def test_classical_2d_against_mode_sum(self):
        scn = scenario(SQUARE, Identity(), 1.0, r0=(0.3, 0.6), t_min=1e-4)
        lam, c = scn._absorbing
        assert abs(mfpt(scn).tau - float(np.sum(c / lam))) < 1e-6

    @pytest.mark.parametrize("alpha,beta", [(0.75, 2.0), (0.6, 2.5), (1.0, 2.0)])
    def test_power_law_against_mellin(self, alpha, beta):
        scn = scenario(clock=PowerLaw(beta), alpha=alpha, t_min=1e-3)
        # a million odd modes of the centered line, independent of the package's cutoff
        n = np.arange(1, 2_000_000, 2.0)
        c = 4 * np.sin(n * math.pi / 2) / (n * math.pi)
        ref = mellin_mfpt_power_law(alpha, beta, c, (n * math.pi) ** 2)
        res = mfpt(scn)
        assert res.regime is MFPTRegime.FINITE
        assert rel(res.tau, ref) < 1e-7
        if (alpha, beta) == (0.75, 2.0):
            assert rel(res.tau, MFPT_POWER_LAW) < 1e-9

    def test_infinite(self):
        res = mfpt(scenario(alpha=0.5))
        assert res.regime is MFPTRegime.INFINITE and res.tau == math.inf and res.tail_exponent == 1.5

    def test_undefined(self):
        res = mfpt(scenario(clock=Dodson(1.0)))
        assert res.regime is MFPTRegime.NEVER_ABSORBED
        assert res.tau is None and 0 < res.p_infinity < 1


class TestStationary:
    def test_unbounded(self):
        with pytest.raises(BoundedClockError):
            stationary_field(scenario(), (0.5,))
        with pytest.raises(BoundedClockError):
            asymptotic_survival(scenario())

    def test_dodson_center(self):
        scn = scenario(clock=Dodson(1.0))
        # the delta start makes the series at r0 converge like 1/N
        assert rel(stationary_field(scn, (0.5,)), DODSON_STATIONARY_CENTER) < 1e-4
        assert rel(asymptotic_survival(scn), DODSON_P_INF) < 1e-10

    def test_matches_late_field(self):
        scn = scenario(SQUARE, Dodson(2.0), 0.7, r0=(0.3, 0.4))
        for r in ((0.5, 0.5), (0.2, 0.8)):
            assert abs(stationary_field(scn, r) - field(scn, r, 60.0)) < 1e-6

    def test_fast_relaxation_freezes(self):
        scn = scenario(clock=Dodson(1e6), alpha=0.5, t_min=1e-9)
        assert asymptotic_survival(scn) > 0.99

    def test_slow_relaxation_empties(self):
        assert asymptotic_survival(scenario(clock=Dodson(1e-3), alpha=0.5)) < 0.01

    def test_mass_balance(self):
        scn = scenario(clock=Dodson(1.0), alpha=0.5)
        tm = scn.policy.t_min
        body, _ = integrate.quad(lambda u: fptd(scn, math.exp(u)) * math.exp(u), math.log(tm), math.log(60.0), limit=400)
        assert abs(body + (1 - survival(scn, tm)) - (1 - asymptotic_survival(scn))) < 1e-3
