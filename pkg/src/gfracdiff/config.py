"""Scenario configuration and report models for the command line.

A scenario file is either flat ``key = value`` text or a JSON object. Flat
files use dotted keys for the clock (``clock.family = power_law``) and
commas for lists (``lengths = 1, 1``); ``#`` starts a comment.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator

from gfracdiff.clocks import Clock, Dodson, Identity, PowerLaw, make_clock
from gfracdiff.errors import ParameterError
from gfracdiff.spectral import BoxDomain, DeltaPeak, SeriesPolicy, gaussian_density

__all__ = [
    "ClassifyReport",
    "ClockConfig",
    "CurveReport",
    "MFPTReport",
    "ScenarioConfig",
    "ValidateReport",
    "load_config",
    "parse_flat",
    "report_schemas",
]

_LIST_KEYS = {"lengths", "x0"}
#: ``lambda_1 D g(t)^alpha`` at the default first time and at the density peak
EDGE_SCALE = 0.2
PEAK_SCALE = 1.0
#: ``mfpt`` integrates P from zero, so its first time sits well before the wall is felt
MFPT_SCALE = 1e-2
#: default mollifier width as a fraction of the shortest edge
SIGMA_FRACTION = 0.08


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ClockConfig(_Strict):
    family: Literal["identity", "power_law", "dodson"] = "identity"
    #: exponent for power_law, rate for dodson
    beta: Optional[PositiveFloat] = None

    @model_validator(mode="after")
    def _need_beta(self):
        if self.family != "identity" and self.beta is None:
            raise ValueError(f"clock family {self.family!r} needs beta")
        return self

    def build(self) -> Clock:
        if self.family == "identity":
            return make_clock(Identity())
        if self.family == "power_law":
            return make_clock(PowerLaw(self.beta))
        return make_clock(Dodson(self.beta))


class ScenarioConfig(_Strict):
    dim: Optional[int] = Field(None, ge=1)
    lengths: Optional[List[PositiveFloat]] = None
    diffusion: PositiveFloat = 1.0
    alpha: float = Field(..., gt=0.0, le=1.0)
    clock: ClockConfig = ClockConfig()

    ic: Literal["delta", "gaussian"] = "delta"
    #: start point; the box center when omitted
    x0: Optional[List[float]] = None
    #: width of the gaussian start (and of the mollified peak in ``validate``)
    sigma: Optional[PositiveFloat] = None

    #: first time; derived from the rising edge of the density when omitted
    tmin: Optional[PositiveFloat] = None
    tmax: Optional[PositiveFloat] = None
    tpoints: int = Field(200, ge=1)
    spacing: Literal["log", "linear"] = "log"
    #: snapshot time for ``field``
    t: Optional[PositiveFloat] = None
    #: nodes per axis for ``field`` and ``stationary`` grids, walls included
    points: int = Field(41, ge=2)

    lambda_max: Optional[PositiveFloat] = None
    rel_tol: float = Field(1e-8, gt=0.0, le=1e-4)
    max_modes: int = Field(500_000, ge=1)

    grid_points: int = Field(32, ge=16)
    s_steps: int = Field(256, ge=64)
    s_final: Optional[PositiveFloat] = None

    format: Literal["csv", "json"] = "csv"

    @model_validator(mode="after")
    def _shape(self):
        if self.lengths is None:
            self.lengths = [1.0] * (self.dim or 1)
        if self.dim is None:
            self.dim = len(self.lengths)
        if len(self.lengths) != self.dim:
            raise ValueError(f"dim={self.dim} but {len(self.lengths)} lengths given")
        if self.x0 is not None and len(self.x0) != self.dim:
            raise ValueError(f"x0 has {len(self.x0)} coordinates, expected {self.dim}")
        if self.tmax is not None and self.tmin is not None and self.tmax <= self.tmin:
            raise ValueError(f"tmax={self.tmax} must exceed tmin={self.tmin}")
        if self.t is not None and self.tmin is not None and self.t < self.tmin:
            raise ValueError(f"t={self.t} is below tmin={self.tmin}")
        return self

    # {{{ builders

    def domain(self) -> BoxDomain:
        return BoxDomain(tuple(self.lengths), self.diffusion)

    def start(self) -> tuple:
        return tuple(self.x0) if self.x0 is not None else self.domain().center

    def width(self) -> float:
        return self.sigma if self.sigma is not None else SIGMA_FRACTION * min(self.lengths)

    def scaled_time(self, scale: float, near_wall: bool = False) -> float:
        """Time at which ``lambda_1 D g(t)^alpha = scale`` (half the clock
        limit stands in when a bounded clock never gets there). With
        *near_wall* the start's distance ``h`` to the closest wall sets the
        rate instead when ``(pi / 2h)^2`` exceeds ``lambda_1``."""
        clock = self.clock.build()
        lam1 = sum((math.pi / L) ** 2 for L in self.lengths)
        if near_wall:
            h = min(min(x, L - x) for x, L in zip(self.start(), self.lengths))
            lam1 = max(lam1, (math.pi / (2.0 * h)) ** 2)
        s = (scale / (lam1 * self.diffusion)) ** (1.0 / self.alpha)
        if clock.limit is not None and s >= 0.5 * clock.limit:
            s = 0.5 * clock.limit * min(1.0, scale)
        return float(clock.inverse(s))

    def first_time(self, scale: float = EDGE_SCALE, near_wall: bool = False) -> float:
        if self.tmin is not None:
            return self.tmin
        if self.t is not None:
            return self.t
        return self.scaled_time(scale, near_wall)

    def mfpt_time(self) -> float:
        return self.first_time(MFPT_SCALE, near_wall=True)

    def policy(self, t_min: Optional[float] = None) -> SeriesPolicy:
        return SeriesPolicy(
            lambda_max=self.lambda_max,
            rel_tol=self.rel_tol,
            t_min=self.first_time() if t_min is None else t_min,
            max_modes=self.max_modes,
        )

    def scenario(self, mollified: bool = False, t_min: Optional[float] = None):
        """Build the :class:`~gfracdiff.solution.Scenario`; *mollified* swaps
        a delta start for a Gaussian of width :meth:`width`, *t_min*
        replaces the default first time."""
        from gfracdiff.solution import Scenario

        domain = self.domain()
        if self.ic == "gaussian" or mollified:
            ic = gaussian_density(domain, self.start(), self.width())
        else:
            ic = DeltaPeak(self.start())
        return Scenario(domain, self.clock.build(), self.alpha, ic, self.policy(t_min))

    def times(self) -> np.ndarray:
        """Requested times; ``tmax`` defaults to ``1e4`` times the peak estimate."""
        t0 = self.first_time()
        tmax = self.tmax if self.tmax is not None else max(1e4 * self.scaled_time(PEAK_SCALE), 10.0 * t0)
        if tmax <= t0:
            raise ParameterError(f"tmax={tmax} must exceed the first time {t0}")
        if self.tpoints == 1:
            return np.array([t0])
        if self.spacing == "log":
            return np.geomspace(t0, tmax, self.tpoints)
        return np.linspace(t0, tmax, self.tpoints)

    # }}}


# {{{ parsing


def parse_flat(text: str) -> Dict[str, Any]:
    """Parse ``key = value`` lines into a (possibly nested) dict of strings."""
    out: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParameterError(f"line {lineno}: empty key")
        parsed: Any = [v.strip() for v in value.split(",") if v.strip()] if key in _LIST_KEYS else value
        node = out
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ParameterError(f"line {lineno}: {p!r} is both a value and a section")
        if leaf in node:
            raise ParameterError(f"line {lineno}: duplicate key {key!r}")
        node[leaf] = parsed
    return out


def load_config(path: Optional[str], overrides: Dict[str, Any]) -> ScenarioConfig:
    """Read *path* (flat text or JSON), apply *overrides*, validate.

    Override keys may be dotted (``clock.beta``). ``None`` values are ignored.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text()
        if text.lstrip().startswith("{"):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParameterError(f"{path}: invalid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise ParameterError(f"{path}: top level must be an object")
        else:
            data = parse_flat(text)
    for key, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return ScenarioConfig.model_validate(data)


# }}}

# {{{ reports


class MFPTReport(_Strict):
    regime: Literal["finite", "infinite", "never_absorbed"]
    #: only for the finite regime
    tau: Optional[float] = None
    error: Optional[float] = None
    tail_exponent: Optional[float] = None
    p_infinity: Optional[float] = None


class ClassifyReport(_Strict):
    regime: Literal["finite", "infinite", "never_absorbed"]
    tail_exponent: Optional[float] = None
    p_infinity: Optional[float] = None


class CurveReport(_Strict):
    command: str
    columns: List[str]
    #: JSON has no NaN; missing values are null
    rows: List[List[Optional[float]]]
    p_infinity: Optional[float] = None


class ValidationCase(_Strict):
    grid_points: int
    s_steps: int
    s: List[float]
    t: List[float]
    error: List[float]


class ValidateReport(_Strict):
    norm: Literal["max", "l2"]
    sigma: float
    base: ValidationCase
    refined: ValidationCase
    tolerance: float
    passed: bool


def report_schemas() -> Dict[str, Any]:
    """JSON schemas of the scenario file and of every report."""
    models = [ScenarioConfig, MFPTReport, ClassifyReport, CurveReport, ValidateReport]
    return {m.__name__: m.model_json_schema() for m in models}


def finite_or_none(x) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None


# }}}
