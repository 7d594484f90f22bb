"""Dirichlet eigen-system of the Laplacian on a box ``[0, L_1] x ... x [0, L_d]``.

Eigenfunctions are products of ``sqrt(2/L) sin(pi n x / L)`` and
eigenvalues are sums of ``(pi n / L)^2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import roots_legendre

from gfracdiff.errors import ConvergenceError, ParameterError, TruncationError

__all__ = [
    "BoxDomain",
    "DeltaPeak",
    "Density",
    "SeriesPolicy",
    "SpectralCoefficients",
    "boundary_integral",
    "eigenfunction",
    "eigenvalue",
    "enumerate_modes",
    "gaussian_density",
    "project_initial",
]

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-8
MASS_TOL = 1e-6
_MAX_QUAD_POINTS = 1 << 24


@dataclass(frozen=True)
class BoxDomain:
    lengths: Tuple[float, ...]
    diffusion: float = 1.0

    def __post_init__(self) -> None:
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        object.__setattr__(self, "lengths", lengths)
        if not lengths:
            raise ParameterError("box needs at least one edge length")
        if not all(v > 0 and math.isfinite(v) for v in lengths):
            raise ParameterError(f"edge lengths must be positive: {lengths}")
        if not (self.diffusion > 0 and math.isfinite(self.diffusion)):
            raise ParameterError(f"diffusion constant must be positive: {self.diffusion}")

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def center(self) -> Tuple[float, ...]:
        return tuple(0.5 * v for v in self.lengths)

    def contains(self, r, *, strict: bool = False) -> bool:
        r = np.asarray(r, dtype=float)
        if r.shape != (self.dim,):
            return False
        L = np.asarray(self.lengths)
        if strict:
            return bool(np.all((r > 0) & (r < L)))
        return bool(np.all((r >= 0) & (r <= L)))


@dataclass(frozen=True)
class DeltaPeak:
    """Point source ``u_0 = delta(r - r0)`` at a strictly interior point."""

    r0: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "r0", tuple(float(v) for v in np.atleast_1d(self.r0)))


@dataclass(frozen=True)
class Density:
    """Normalized initial density. *f* takes one coordinate array per axis
    (broadcastable) and returns values of the same shape."""

    f: Callable[..., np.ndarray]
    label: str = "density"


InitialCondition = Union[DeltaPeak, Density]


@dataclass(frozen=True)
class SeriesPolicy:
    """Truncation controls for every mode sum.

    ``lambda_max=None`` lets the solver derive the cutoff from ``t_min``.
    """

    lambda_max: Optional[float] = None
    min_modes_per_axis: int = 3
    rel_tol: float = 1e-8
    t_min: float = 1e-3
    max_modes: int = 500_000

    def __post_init__(self) -> None:
        if self.lambda_max is not None and not self.lambda_max > 0:
            raise ParameterError("lambda_max must be positive")
        if self.min_modes_per_axis < 3:
            raise ParameterError("min_modes_per_axis must be >= 3")
        if not 0.0 < self.rel_tol <= 1e-4:
            raise ParameterError("rel_tol must lie in (0, 1e-4]")
        if not self.t_min > 0:
            raise ParameterError("t_min must be positive")
        if self.max_modes < 1:
            raise ParameterError("max_modes must be positive")


@dataclass(frozen=True)
class SpectralCoefficients:
    """Truncated mode table sorted by ascending eigenvalue."""

    indices: np.ndarray  # (m, d) int
    lambdas: np.ndarray  # (m,)
    u0n: np.ndarray  # (m,)
    phi_integral: np.ndarray  # (m,)
    lambda_max: float = field(default=math.inf)

    def __len__(self) -> int:
        return len(self.lambdas)

    @property
    def all_odd(self) -> np.ndarray:
        return np.all(self.indices % 2 == 1, axis=1)


def _check_index(domain: BoxDomain, n: Sequence[int]) -> np.ndarray:
    n = np.atleast_1d(np.asarray(n))
    if n.shape != (domain.dim,) or not np.issubdtype(n.dtype, np.integer):
        raise ParameterError(f"multi-index must be {domain.dim} integers: got {n!r}")
    if np.any(n < 1):
        raise ParameterError(f"multi-index entries must be >= 1: got {n.tolist()}")
    return n


def eigenvalue(domain: BoxDomain, n: Sequence[int]) -> float:
    n = _check_index(domain, n)
    return float(np.sum((math.pi * n / np.asarray(domain.lengths)) ** 2))


def eigenvalues(domain: BoxDomain, indices: np.ndarray) -> np.ndarray:
    return np.sum((math.pi * indices / np.asarray(domain.lengths)) ** 2, axis=1)


def eigenfunction(domain: BoxDomain, n: Sequence[int], r) -> float:
    """``phi_n(r)``; zero on the boundary."""
    n = _check_index(domain, n)
    return float(eigenfunctions(domain, n[None, :], r)[0])


def eigenfunctions(domain: BoxDomain, indices: np.ndarray, r) -> np.ndarray:
    """Values of every mode in *indices* at the single point *r*."""
    r = np.asarray(r, dtype=float)
    if not domain.contains(r):
        raise ParameterError(f"point {r.tolist()} lies outside the box {domain.lengths}")
    L = np.asarray(domain.lengths)
    if np.any((r == 0.0) | (r == L)):
        return np.zeros(len(indices))
    return np.prod(np.sqrt(2.0 / L) * np.sin(math.pi * indices * r / L), axis=1)


def boundary_integral(domain: BoxDomain, n: Sequence[int]) -> float:
    """Integral of ``phi_n`` over the box; zero unless every ``n_i`` is odd."""
    n = _check_index(domain, n)
    return float(boundary_integrals(domain, n[None, :])[0])


def boundary_integrals(domain: BoxDomain, indices: np.ndarray) -> np.ndarray:
    L = np.asarray(domain.lengths)
    per_axis = np.where(indices % 2 == 1, 2.0 * np.sqrt(2.0 * L) / (math.pi * indices), 0.0)
    return np.prod(per_axis, axis=1)


# {{{ quadrature


def _tensor_grid(domain: BoxDomain, order: int):
    x, w = roots_legendre(order)
    nodes, weights = [], []
    for L in domain.lengths:
        nodes.append(0.5 * L * (x + 1.0))
        weights.append(0.5 * L * w)
    return nodes, weights


def _eval_density(f: Callable, nodes) -> np.ndarray:
    mesh = np.meshgrid(*nodes, indexing="ij")
    values = np.asarray(f(*mesh), dtype=float)
    return np.broadcast_to(values, mesh[0].shape)


def _project_on_grid(domain: BoxDomain, f: Callable, order: int, n_max: np.ndarray) -> np.ndarray:
    """All projections ``<phi_n, f>`` for ``n <= n_max`` as a dense d-array."""
    nodes, weights = _tensor_grid(domain, order)
    coeffs = _eval_density(f, nodes)
    for axis, (x, w, L, m) in enumerate(zip(nodes, weights, domain.lengths, n_max)):
        n = np.arange(1, m + 1)[:, None]
        basis = math.sqrt(2.0 / L) * np.sin(math.pi * n * x / L) * w
        coeffs = np.moveaxis(np.tensordot(basis, coeffs, axes=([1], [axis])), 0, axis)
    return coeffs


def _converged_projection(domain: BoxDomain, f: Callable, n_max: np.ndarray) -> np.ndarray:
    order = max(32, 2 * int(np.max(n_max)) + 16)
    previous = _project_on_grid(domain, f, order, n_max)
    while True:
        order *= 2
        if order**domain.dim > _MAX_QUAD_POINTS:
            raise ConvergenceError(
                f"Gauss-Legendre projection did not reach {QUAD_TOL} before "
                f"{order // 2} points per axis"
            )
        current = _project_on_grid(domain, f, order, n_max)
        if np.max(np.abs(current - previous)) < QUAD_TOL:
            return current
        previous = current


def density_mass(domain: BoxDomain, f: Callable) -> float:
    """Integral of *f* over the box by tensor Gauss-Legendre, order doubling."""
    order = 32
    previous = None
    while order**domain.dim <= _MAX_QUAD_POINTS:
        nodes, weights = _tensor_grid(domain, order)
        vals = _eval_density(f, nodes)
        for w in weights[::-1]:
            vals = vals @ w
        mass = float(vals)
        if previous is not None and abs(mass - previous) < 0.1 * MASS_TOL:
            return mass
        previous = mass
        order *= 2
    raise ConvergenceError("density mass quadrature did not converge")


def check_density(domain: BoxDomain, ic: Density) -> None:
    mass = density_mass(domain, ic.f)
    if abs(mass - 1.0) > MASS_TOL:
        raise ParameterError(f"initial density {ic.label!r} integrates to {mass:.9g}, not 1")


def gaussian_density(domain: BoxDomain, center, sigma: float) -> Density:
    """Isotropic Gaussian of width *sigma* at *center*, renormalized to unit
    mass inside the box (a mollified point source)."""
    c = np.asarray(center, dtype=float)
    if not domain.contains(c, strict=True):
        raise ParameterError(f"Gaussian center {c.tolist()} must be interior")
    if not sigma > 0:
        raise ParameterError("sigma must be positive")

    def raw(*xs):
        r2 = sum((x - ci) ** 2 for x, ci in zip(xs, c))
        return np.exp(-0.5 * r2 / sigma**2)

    wall = max(math.exp(-0.5 * (min(ci, L - ci) / sigma) ** 2) for ci, L in zip(c, domain.lengths))
    if wall > 1e-8:
        logger.warning(
            "Gaussian of width %g is %.1e of its peak on the nearest wall; sine "
            "projections will decay slowly", sigma, wall,
        )
    mass = density_mass(domain, raw)

    def f(*xs):
        return raw(*xs) / mass

    return Density(f=f, label=f"gaussian(sigma={sigma:g})")


# }}}


def project_initial(domain: BoxDomain, ic: InitialCondition, n: Sequence[int]) -> float:
    """``u_{0,n} = integral of phi_n u_0`` over the box."""
    n = _check_index(domain, n)
    return float(project_all(domain, ic, n[None, :])[0])


def project_all(domain: BoxDomain, ic: InitialCondition, indices: np.ndarray) -> np.ndarray:
    if isinstance(ic, DeltaPeak):
        if not domain.contains(ic.r0, strict=True):
            raise ParameterError(f"delta peak {list(ic.r0)} must be strictly interior")
        return eigenfunctions(domain, indices, ic.r0)
    if isinstance(ic, Density):
        n_max = np.max(indices, axis=0)
        dense = _converged_projection(domain, ic.f, n_max)
        return dense[tuple((indices - 1).T)]
    raise ParameterError(f"unknown initial condition {ic!r}")


def _indices_in_ball(domain: BoxDomain, lambda_max: float, cap: int) -> np.ndarray:
    L = np.asarray(domain.lengths)
    per_axis = np.floor(L * math.sqrt(lambda_max) / math.pi).astype(int)
    idx = np.zeros((1, 0), dtype=np.int64)
    partial = np.zeros(1)
    for axis in range(domain.dim):
        n = np.arange(1, per_axis[axis] + 1)
        lam = (math.pi * n / L[axis]) ** 2
        # remaining axes contribute at least their n=1 eigenvalue
        floor = float(np.sum((math.pi / L[axis + 1 :]) ** 2))
        total = partial[:, None] + lam[None, :]
        keep = total + floor <= lambda_max * (1 + 1e-14)
        rows, cols = np.nonzero(keep)
        if rows.size > cap:
            raise TruncationError(
                f"mode count exceeds the policy cap of {cap} (lambda_max={lambda_max:.6g})"
            )
        idx = np.concatenate([idx[rows], n[cols][:, None]], axis=1)
        partial = total[rows, cols]
    return idx


def enumerate_modes(
    domain: BoxDomain,
    policy: SeriesPolicy,
    ic: Optional[InitialCondition] = None,
) -> SpectralCoefficients:
    """All modes with ``lambda_n <= policy.lambda_max``, ascending in
    ``lambda_n`` (ties broken lexicographically).

    When *ic* is given the projections ``u_{0,n}`` are filled in, otherwise
    they are left as NaN.
    """
    if policy.lambda_max is None:
        raise ParameterError("enumerate_modes needs an explicit lambda_max")
    idx = _indices_in_ball(domain, policy.lambda_max, policy.max_modes)
    if idx.shape[0] == 0:
        raise TruncationError(
            f"lambda_max={policy.lambda_max:.6g} is below the first eigenvalue "
            f"{eigenvalue(domain, [1] * domain.dim):.6g}"
        )
    lambdas = eigenvalues(domain, idx)
    order = np.lexsort(tuple(idx[:, k] for k in range(domain.dim - 1, -1, -1)) + (lambdas,))
    idx, lambdas = idx[order], lambdas[order]
    u0n = project_all(domain, ic, idx) if ic is not None else np.full(len(lambdas), np.nan)
    return SpectralCoefficients(
        indices=idx,
        lambdas=lambdas,
        u0n=u0n,
        phi_integral=boundary_integrals(domain, idx),
        lambda_max=float(policy.lambda_max),
    )
