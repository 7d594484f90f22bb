from __future__ import annotations

import ast
import inspect

import numpy as np
import pytest

from gfracdiff import oracle
from gfracdiff.clocks import Dodson, Identity, make_clock
from gfracdiff.errors import ParameterError
from gfracdiff.oracle import GridSpec, compare, refine, solve_l1
from gfracdiff.solution import Scenario, field_points
from gfracdiff.spectral import BoxDomain, DeltaPeak, SeriesPolicy, gaussian_density


def mollified(lengths=(1.0,), clock=Identity(), alpha=0.5, sigma=0.08):
    dom = BoxDomain(lengths)
    ic = gaussian_density(dom, dom.center, sigma)
    return Scenario(dom, make_clock(clock), alpha, ic, SeriesPolicy(t_min=1e-6))


def errors(scn, grid):
    sol = solve_l1(scn, grid)
    return compare(lambda p, t: field_points(scn, p, t), sol).errors


class TestGridSpec:
    def test_invariants(self):
        for kw in ({"points_per_axis": 8}, {"s_steps": 10}, {"s_final": 0.0}):
            with pytest.raises(ParameterError):
                GridSpec(**kw)

    def test_refine_keeps_nodes(self):
        g = GridSpec(32, 128, 0.1)
        r = refine(g)
        assert (r.points_per_axis, r.s_steps, r.s_final) == (65, 256, 0.1)
        coarse = np.linspace(0, 1, g.points_per_axis + 2)
        fine = np.linspace(0, 1, r.points_per_axis + 2)
        assert np.allclose(fine[::2], coarse)
        assert r.ds == pytest.approx(g.ds / 2)


class TestSolver:
    def test_maximum_principle(self):
        sol = solve_l1(mollified((1.0, 1.0), alpha=0.7), GridSpec(24, 64, 0.02))
        peak = sol.values.reshape(len(sol.s), -1).max(axis=1)
        assert np.all(sol.values >= -1e-12)
        assert np.all(np.diff(peak) <= 1e-12)

    def test_times_follow_clock(self):
        scn = mollified(clock=Dodson(2.0))
        sol = solve_l1(scn, GridSpec(16, 64, 0.1))
        assert np.allclose(scn.clock(sol.times), sol.s, rtol=1e-12, atol=1e-15)

    def test_matches_spectral_1d(self):
        err = errors(mollified(alpha=0.5), GridSpec(32, 256, 0.05))
        assert err.max() < 5e-2

    def test_refinement_ratio(self):
        scn = mollified(alpha=0.5)
        base = GridSpec(32, 256, 0.05)
        ratio = errors(scn, refine(base)) / errors(scn, base)
        assert np.all((0.2 <= ratio) & (ratio <= 0.6))

    def test_dodson_2d_decreases(self):
        scn = mollified((1.0, 1.0), Dodson(1.0), 0.7)
        base = GridSpec(24, 128, 0.03)
        assert np.all(errors(scn, refine(base)) < errors(scn, base))

    def test_time_change_invariance(self):
        # in s the scheme never sees the clock
        grid = GridSpec(16, 64, 0.05)
        a = solve_l1(mollified(clock=Identity()), grid)
        b = solve_l1(mollified(clock=Dodson(3.0)), grid)
        assert np.array_equal(a.values, b.values)


class TestErrors:
    def test_delta_refused(self):
        dom = BoxDomain((1.0,))
        scn = Scenario(dom, make_clock(Identity()), 0.5, DeltaPeak((0.5,)), SeriesPolicy(t_min=1e-3))
        with pytest.raises(ParameterError):
            solve_l1(scn, GridSpec())

    def test_beyond_clock_limit(self):
        with pytest.raises(ParameterError):
            solve_l1(mollified(clock=Dodson(1.0)), GridSpec(16, 64, 1.5))

    def test_dimension(self):
        scn = mollified((1.0,) * 4, sigma=0.1)
        with pytest.raises(ParameterError):
            solve_l1(scn, GridSpec(16, 64, 0.01))

    def test_compare_checks(self):
        sol = solve_l1(mollified(), GridSpec(16, 64, 0.01))
        with pytest.raises(ParameterError):
            compare(lambda p, t: np.zeros(3), sol)
        with pytest.raises(ParameterError):
            compare(lambda p, t: np.zeros(len(p)), sol, norm="l1")

    def test_report(self):
        sol = solve_l1(mollified(), GridSpec(16, 64, 0.01))
        rep = compare(lambda p, t: np.zeros(len(p)), sol, norm="l2")
        d = rep.as_dict()
        assert d["worst"] == rep.worst and len(d["slices"]) == 4
        assert rep.s[-1] == pytest.approx(0.01)


def test_independent_of_spectral_code():
    tree = ast.parse(inspect.getsource(oracle))
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom):
            imported.add(node.module or "")
            imported.update(f"{node.module}.{a.name}" for a in node.names)
        elif isinstance(node, ast.Import):
            imported.update(a.name for a in node.names)
    for banned in ("mittag_leffler", "solution"):
        assert not any(banned in name for name in imported), imported
