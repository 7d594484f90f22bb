"""Spectral solver for g-fractional diffusion in boxes with absorbing walls.

Survival probability, first-passage-time density, mean first-passage time
and the stationary regime of bounded clocks, all from Mittag-Leffler mode
sums over the Dirichlet eigen-system of the box.
"""

from gfracdiff.clocks import Custom, Dodson, Identity, MFPTRegime, PowerLaw, classify_mfpt, make_clock, tail_exponent
from gfracdiff.errors import (
    BoundedClockError,
    ConvergenceError,
    GFracError,
    InconclusiveLimitError,
    ParameterError,
    ThresholdError,
    TruncationError,
)
from gfracdiff.mittag_leffler import MLAccuracy, ml_one, ml_two, ml_two_asymptotic
from gfracdiff.solution import (
    FPTDCurve,
    MFPTResult,
    Scenario,
    asymptotic_survival,
    field,
    fptd,
    fptd_curve,
    fptd_tail_constant,
    mfpt,
    stationary_field,
    survival,
)
from gfracdiff.spectral import BoxDomain, DeltaPeak, Density, SeriesPolicy, gaussian_density

__version__ = "0.1.0"
