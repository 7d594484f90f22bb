"""Low-order finite-difference reference solver, for validation only.

The Caputo derivative with respect to ``g`` at time ``t`` equals the plain
Caputo derivative in ``s = g(t)`` of ``v(s) = u(g^{-1}(s))``, so one scheme
covers every clock: implicit L1 in ``s`` on a uniform grid, second-order
central Laplacian, homogeneous Dirichlet walls.

Nothing here touches the Mittag-Leffler evaluators or the mode sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from gfracdiff.errors import ConvergenceError, ParameterError

__all__ = ["ErrorReport", "GridSpec", "OracleSolution", "compare", "refine", "solve_l1"]


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: int = 32
    s_steps: int = 256
    s_final: float = 0.05

    def __post_init__(self) -> None:
        if self.points_per_axis < 16:
            raise ParameterError("points_per_axis must be >= 16")
        if self.s_steps < 64:
            raise ParameterError("s_steps must be >= 64")
        if not self.s_final > 0:
            raise ParameterError("s_final must be positive")

    @property
    def ds(self) -> float:
        return self.s_final / self.s_steps


def refine(grid: GridSpec) -> GridSpec:
    """Halve the mesh width and the time step; old nodes stay nodes."""
    return GridSpec(2 * grid.points_per_axis + 1, 2 * grid.s_steps, grid.s_final)


@dataclass
class OracleSolution:
    axes: List[np.ndarray]  # interior node coordinates per axis
    s: np.ndarray  # transformed times, s[0] = 0
    values: np.ndarray  # (len(s), *grid shape)
    times: np.ndarray  # physical times g^{-1}(s)

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def _laplacian(lengths: Sequence[float], n: int) -> sp.csc_matrix:
    ops = []
    for L in lengths:
        h = L / (n + 1)
        main = np.full(n, -2.0 / h**2)
        off = np.full(n - 1, 1.0 / h**2)
        ops.append(sp.diags([off, main, off], [-1, 0, 1], format="csr"))
    total = None
    for axis, op in enumerate(ops):
        term = op
        for other in range(len(ops)):
            if other == axis:
                continue
            eye = sp.identity(n, format="csr")
            term = sp.kron(term, eye, format="csr") if other > axis else sp.kron(eye, term, format="csr")
        total = term if total is None else total + term
    return total.tocsc()


def solve_l1(scn, grid: GridSpec) -> OracleSolution:
    """Solve ``D^alpha_s v = D lap v`` with the L1 scheme on ``[0, s_final]``.

    *scn* must carry a smooth density initial condition (use
    :func:`gfracdiff.spectral.gaussian_density` as a mollified point source).
    """
    from gfracdiff.spectral import Density

    if not isinstance(scn.ic, Density):
        raise ParameterError("the finite-difference oracle needs a smooth density initial condition")
    d = scn.domain.dim
    if d > 3:
        raise ParameterError("the finite-difference oracle supports d <= 3")
    clock = scn.clock
    if clock.limit is not None and grid.s_final >= clock.limit:
        raise ParameterError(f"s_final={grid.s_final} must stay below the clock limit {clock.limit}")

    n = grid.points_per_axis
    axes = [np.linspace(0.0, L, n + 2)[1:-1] for L in scn.domain.lengths]
    mesh = np.meshgrid(*axes, indexing="ij")
    v0 = np.broadcast_to(np.asarray(scn.ic.f(*mesh), dtype=float), mesh[0].shape).ravel()

    a = scn.alpha
    ds = grid.ds
    steps = grid.s_steps
    c = ds ** (-a) / math.gamma(2.0 - a)
    j = np.arange(steps + 1, dtype=float)
    b = (j + 1.0) ** (1.0 - a) - j ** (1.0 - a)

    A = _laplacian(scn.domain.lengths, n)
    system = c * b[0] * sp.identity(A.shape[0], format="csc") - scn.domain.diffusion * A
    try:
        lu = splu(system.tocsc())
    except RuntimeError as exc:  # singular factorization
        raise ConvergenceError(f"linear solver failed: {exc}") from exc

    values = np.empty((steps + 1, v0.size))
    values[0] = v0
    diffs = np.empty((steps, v0.size))  # diffs[k-1] = v^k - v^{k-1}
    for step in range(1, steps + 1):
        rhs = c * b[0] * values[step - 1]
        if step > 1:
            # sum_{j=1}^{n-1} b_j (v^{n-j} - v^{n-j-1})
            rhs -= c * (b[1:step] @ diffs[step - 2 :: -1][: step - 1])
        values[step] = lu.solve(rhs)
        diffs[step - 1] = values[step] - values[step - 1]

    s = ds * np.arange(steps + 1)
    times = np.asarray(clock.inverse(s), dtype=float)
    shape = (steps + 1,) + mesh[0].shape
    return OracleSolution(axes=axes, s=s, values=values.reshape(shape), times=times)


@dataclass
class ErrorReport:
    norm: str
    s: np.ndarray
    times: np.ndarray
    errors: np.ndarray
    scale: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def worst(self) -> float:
        return float(np.max(self.errors))

    def as_dict(self) -> Dict:
        return {
            "norm": self.norm,
            "worst": self.worst,
            "slices": [
                {"s": float(si), "t": float(ti), "error": float(ei)}
                for si, ti, ei in zip(self.s, self.times, self.errors)
            ],
        }


def compare(
    spectral_fn: Callable[[np.ndarray, float], np.ndarray],
    oracle_solution: OracleSolution,
    norm: str = "max",
    slices: Sequence[int] | None = None,
) -> ErrorReport:
    """Evaluate ``spectral_fn(points, t)`` on the oracle grid and report the
    error norm per time slice (default: four slices in the upper 3/4 of the
    horizon)."""
    if norm not in ("max", "l2"):
        raise ParameterError(f"norm must be 'max' or 'l2': got {norm!r}")
    sol = oracle_solution
    steps = len(sol.s) - 1
    if slices is None:
        slices = sorted({max(1, round(steps * q)) for q in (0.25, 0.5, 0.75, 1.0)})
    pts = sol.points
    cell = float(np.prod([ax[1] - ax[0] for ax in sol.axes]))
    errs, scale = [], []
    for k in slices:
        ref = sol.values[k].ravel()
        got = np.asarray(spectral_fn(pts, float(sol.times[k])), dtype=float)
        if got.shape != ref.shape:
            raise ParameterError(f"spectral values have shape {got.shape}, oracle grid {ref.shape}")
        diff = got - ref
        errs.append(np.max(np.abs(diff)) if norm == "max" else math.sqrt(cell * np.sum(diff**2)))
        scale.append(np.max(np.abs(ref)))
    idx = np.asarray(slices)
    return ErrorReport(norm=norm, s=sol.s[idx], times=sol.times[idx], errors=np.asarray(errs), scale=np.asarray(scale))
