"""Command-line front end.

Every subcommand reads a scenario (``--config`` file and/or flags; flags
win), computes one quantity and writes CSV or JSON to ``--out`` or stdout.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from gfracdiff import oracle
from gfracdiff import solution as sol
from gfracdiff.clocks import MFPTRegime, classify_mfpt, tail_exponent
from gfracdiff.config import (
    ClassifyReport,
    CurveReport,
    MFPTReport,
    ScenarioConfig,
    ValidateReport,
    ValidationCase,
    finite_or_none,
    load_config,
)
from gfracdiff.errors import GFracError, ParameterError

logger = logging.getLogger("gfracdiff")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
#: spectral-vs-oracle max-norm bound on the base grid
VALIDATE_TOL = 5e-2


class ConfigError(Exception):
    pass


class ValidationFailed(GFracError):
    """The oracle comparison ran but missed its bound; carries the report."""

    def __init__(self, text: str) -> None:
        super().__init__("spectral and finite-difference solutions disagree beyond the tolerance")
        self.text = text


# {{{ output


def _fmt(v) -> str:
    if v is None:
        return "nan"
    return format(float(v), ".17g")


def _csv(columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def _curve(cfg: ScenarioConfig, command: str, columns: List[str], table: np.ndarray, p_inf=None) -> str:
    if cfg.format == "csv":
        return _csv(columns, table)
    rows = [[finite_or_none(v) for v in row] for row in table]
    report = CurveReport(command=command, columns=columns, rows=rows, p_infinity=p_inf)
    return report.model_dump_json(exclude_none=True) + "\n"


def _report(cfg: ScenarioConfig, report) -> str:
    if cfg.format == "json":
        return report.model_dump_json(exclude_none=True) + "\n"
    data = report.model_dump(exclude_none=True)
    return _csv(list(data), [list(data.values())])


# }}}


def _grid_points(cfg: ScenarioConfig) -> np.ndarray:
    axes = [np.linspace(0.0, L, cfg.points) for L in cfg.lengths]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _coords(d: int) -> List[str]:
    return [f"x{i + 1}" for i in range(d)]


# {{{ commands


def cmd_fptd(cfg: ScenarioConfig) -> str:
    scn = cfg.scenario()
    t = cfg.times()
    curve = sol.fptd_curve(scn, t)
    table = np.column_stack([t, curve.density, curve.asymptotic(scn.clock, scn.alpha)])
    return _curve(cfg, "fptd", ["t", "phi", "phi_asymptotic"], table)


def cmd_survival(cfg: ScenarioConfig) -> str:
    scn = cfg.scenario()
    t = cfg.times()
    table = np.column_stack([t, sol.survival(scn, t)])
    return _curve(cfg, "survival", ["t", "survival"], table)


def cmd_field(cfg: ScenarioConfig) -> str:
    if cfg.t is None:
        raise ConfigError("field needs a snapshot time (--t or 't = ...')")
    scn = cfg.scenario()
    pts = _grid_points(cfg)
    table = np.column_stack([pts, sol.field_points(scn, pts, cfg.t)])
    return _curve(cfg, "field", _coords(cfg.dim) + ["u"], table)


def cmd_mfpt(cfg: ScenarioConfig) -> str:
    res = sol.mfpt(cfg.scenario(t_min=cfg.mfpt_time()))
    report = MFPTReport(
        regime=res.regime.value,
        tau=res.tau if res.regime is MFPTRegime.FINITE else None,
        error=res.error,
        tail_exponent=res.tail_exponent,
        p_infinity=res.p_infinity,
    )
    return _report(cfg, report)


def cmd_classify(cfg: ScenarioConfig) -> str:
    clock = cfg.clock.build()
    regime = classify_mfpt(clock, cfg.alpha)
    if regime is MFPTRegime.NEVER_ABSORBED:
        report = ClassifyReport(regime=regime.value, p_infinity=sol.asymptotic_survival(cfg.scenario()))
    else:
        report = ClassifyReport(regime=regime.value, tail_exponent=tail_exponent(clock, cfg.alpha))
    return _report(cfg, report)


def cmd_stationary(cfg: ScenarioConfig) -> str:
    scn = cfg.scenario()
    if not scn.clock.bounded:
        raise ConfigError(
            f"clock {scn.clock.label!r} is unbounded: there is no stationary state "
            "(use a bounded clock such as dodson)"
        )
    p_inf = sol.asymptotic_survival(scn)
    pts = _grid_points(cfg)
    values = sol.stationary_points(scn, pts)
    if cfg.format == "json":
        return _curve(cfg, "stationary", _coords(cfg.dim) + ["u_stationary"], np.column_stack([pts, values]), p_inf)
    table = np.column_stack([pts, values, np.full(len(pts), p_inf)])
    return _curve(cfg, "stationary", _coords(cfg.dim) + ["u_stationary", "p_infinity"], table)


def run_validation(cfg: ScenarioConfig, norm: str = "max") -> ValidateReport:
    """Spectral solution of the mollified scenario against the L1 solver on
    the configured grid and on one refinement of it."""
    if cfg.dim > 3:
        raise ConfigError("validate supports d <= 3")
    scn = cfg.scenario(mollified=True)
    s_final = cfg.s_final
    if s_final is None:
        s_final = 0.05 * (min(cfg.lengths) ** 2 / cfg.diffusion) ** (1.0 / cfg.alpha)
        if scn.clock.limit is not None:
            s_final = min(s_final, 0.5 * scn.clock.limit)
    base = oracle.GridSpec(cfg.grid_points, cfg.s_steps, s_final)
    cases = []
    for grid in (base, oracle.refine(base)):
        ref = oracle.solve_l1(scn, grid)
        rep = oracle.compare(lambda p, t: sol.field_points(scn, p, t), ref, norm=norm)
        cases.append(
            ValidationCase(
                grid_points=grid.points_per_axis,
                s_steps=grid.s_steps,
                s=rep.s.tolist(),
                t=rep.times.tolist(),
                error=rep.errors.tolist(),
            )
        )
    coarse, fine = cases
    passed = max(coarse.error) < VALIDATE_TOL and all(f < c for f, c in zip(fine.error, coarse.error))
    return ValidateReport(norm=norm, sigma=cfg.width(), base=coarse, refined=fine, tolerance=VALIDATE_TOL, passed=passed)


def cmd_validate(cfg: ScenarioConfig) -> str:
    report = run_validation(cfg)
    if cfg.format == "json":
        text = report.model_dump_json() + "\n"
    else:
        rows = []
        for level, case in (("base", report.base), ("refined", report.refined)):
            for s, t, e in zip(case.s, case.t, case.error):
                rows.append([level, s, t, e])
        text = _csv(["grid", "s", "t", "error"], rows)
    if not report.passed:
        raise ValidationFailed(text)
    return text


COMMANDS = {
    "fptd": (cmd_fptd, "first-passage-time density curve"),
    "survival": (cmd_survival, "survival probability curve"),
    "field": (cmd_field, "field on a grid at time --t"),
    "mfpt": (cmd_mfpt, "mean first-passage time report"),
    "classify": (cmd_classify, "MFPT regime of the clock"),
    "stationary": (cmd_stationary, "stationary field and asymptotic survival (bounded clocks)"),
    "validate": (cmd_validate, "compare against the finite-difference solver"),
}

# }}}


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (key = value text or JSON)")
    common.add_argument("--alpha", type=float)
    common.add_argument("--clock", choices=["identity", "power_law", "dodson"])
    common.add_argument("--beta", type=float, help="power-law exponent or Dodson rate")
    common.add_argument("--dim", type=int)
    common.add_argument("--lengths", type=_floats, help="edge lengths, e.g. 1,1")
    common.add_argument("--diffusion", type=float)
    common.add_argument("--x0", type=_floats, help="start point, e.g. 0.5,0.5")
    common.add_argument("--ic", choices=["delta", "gaussian"])
    common.add_argument("--sigma", type=float, help="gaussian / mollifier width")
    common.add_argument("--tmin", type=float)
    common.add_argument("--tmax", type=float)
    common.add_argument("--tpoints", type=int)
    common.add_argument("--spacing", choices=["log", "linear"])
    common.add_argument("--t", type=float, help="snapshot time for field")
    common.add_argument("--points", type=int, help="grid nodes per axis for field/stationary")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="gfracdiff", description="g-fractional diffusion in a box with absorbing walls"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


_OVERRIDES = {
    "alpha": "alpha",
    "clock": "clock.family",
    "beta": "clock.beta",
    "dim": "dim",
    "lengths": "lengths",
    "diffusion": "diffusion",
    "x0": "x0",
    "ic": "ic",
    "sigma": "sigma",
    "tmin": "tmin",
    "tmax": "tmax",
    "tpoints": "tpoints",
    "spacing": "spacing",
    "t": "t",
    "points": "points",
    "format": "format",
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")

    overrides: Dict[str, object] = {key: getattr(args, attr) for attr, key in _OVERRIDES.items()}
    try:
        cfg = load_config(args.config, overrides)
    except ValidationError as exc:
        print(f"error: invalid scenario:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    handler = COMMANDS[args.command][0]
    code = EXIT_OK
    try:
        text = handler(cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailed as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        text, code = exc.text, EXIT_NUMERIC
    except (GFracError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
