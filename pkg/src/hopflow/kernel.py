"""Heat kernels on free space and on periodic boxes, and discrete convolution tables.

The Gaussian heat kernel factors across axes, and so does its lattice of
periodic images.  A table is therefore stored as one dense ``N_k x N_k``
matrix per axis.  The full table is their Kronecker product and is applied
one axis at a time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from hopflow.errors import GridMismatch, TimeOffsetTooSmall
from hopflow.fields import Grid, ScalarField

DEFAULT_IMAGE_TOLERANCE = 1e-15
OPEN_BOUNDARY_TOLERANCE = 1e-8
MAX_IMAGE_SHELLS = 1_000_000

# Test hook: relative bias added to periodic row sums after renormalization.
_row_sum_fault = 0.0


@dataclass(frozen=True)
class KernelSpec:
    nu: float
    grid: Grid
    image_tolerance: float = DEFAULT_IMAGE_TOLERANCE
    dt_floor: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"nu must be finite and positive, got {self.nu}")
        if not 0 < self.image_tolerance < 1:
            raise ValueError(f"image_tolerance must lie in (0, 1), got {self.image_tolerance}")
        if self.dt_floor is None:
            # narrowest kernel the grid can represent
            object.__setattr__(self, "dt_floor", 0.1 * min(self.grid.spacing) ** 2 / self.nu)
        elif not self.dt_floor > 0:
            raise ValueError(f"dt_floor must be positive, got {self.dt_floor}")


def _check_offset(dt: float, dt_floor: float) -> None:
    if not (dt > 0 and dt >= dt_floor):
        raise TimeOffsetTooSmall(f"time offset {dt:.3e} is below the floor {dt_floor:.3e}")


def _gauss_1d(d: np.ndarray, dt: float, nu: float) -> np.ndarray:
    return np.exp(-(d**2) / (4.0 * nu * dt)) / np.sqrt(4.0 * np.pi * nu * dt)


def _image_sum_1d(d: np.ndarray, dt: float, nu: float, period: float, tol: float) -> np.ndarray:
    d = np.mod(np.asarray(d, dtype=float) + 0.5 * period, period) - 0.5 * period
    total = _gauss_1d(d, dt, nu)
    for n in range(1, MAX_IMAGE_SHELLS):
        shell = _gauss_1d(d + n * period, dt, nu) + _gauss_1d(d - n * period, dt, nu)
        total = total + shell
        if np.all(shell <= tol * total):
            break
    return total


def _split_points(x, xi, dim: int):
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if dim == 1:
        if x.ndim and x.shape[-1] == 1:
            x = x[..., 0]
        if xi.ndim and xi.shape[-1] == 1:
            xi = xi[..., 0]
        return [x - xi]
    return [x[..., k] - xi[..., k] for k in range(dim)]


def free_space_kernel(x, xi, dt: float, nu: float, dim: int, dt_floor: float = 0.0):
    """(4 pi nu dt)^(-dim/2) exp(-|x - xi|^2 / (4 nu dt)).

    Points are scalars in 1D or arrays whose last axis has length ``dim``.
    """
    _check_offset(dt, dt_floor)
    parts = _split_points(x, xi, dim)
    return reduce(np.multiply, (_gauss_1d(d, dt, nu) for d in parts))


def periodic_kernel(x, xi, dt: float, spec: KernelSpec):
    """Kernel of the box in ``spec.grid``: image sums on periodic axes, free on open ones."""
    _check_offset(dt, spec.dt_floor)
    g = spec.grid
    parts = _split_points(x, xi, g.dim)
    factors = []
    for k, d in enumerate(parts):
        if g.periodic[k]:
            factors.append(_image_sum_1d(d, dt, spec.nu, g.lengths[k], spec.image_tolerance))
        else:
            factors.append(_gauss_1d(d, dt, spec.nu))
    return reduce(np.multiply, factors)


@dataclass(frozen=True, eq=False)
class KernelTable:
    spec: KernelSpec
    time_offset: float
    axis_weights: tuple[np.ndarray, ...]
    max_correction: float = 0.0
    is_identity: bool = field(default=False)
    # exact row sum of each periodic axis matrix, None on open axes
    axis_mass: tuple[float | None, ...] = ()

    @classmethod
    def identity(cls, spec: KernelSpec) -> KernelTable:
        """Delta-limit table used below ``dt_floor``."""
        eyes = tuple(np.eye(n) for n in spec.grid.extents)
        return cls(spec, 0.0, eyes, 0.0, True)

    def dense(self) -> np.ndarray:
        """Full (points x points) weight matrix in row-major point order."""
        return reduce(np.kron, self.axis_weights)

    def row_sums(self) -> np.ndarray:
        sums = [w.sum(axis=1) for w in self.axis_weights]
        return reduce(np.multiply.outer, sums).reshape(-1)


def _axis_matrix(spec: KernelSpec, axis: int, dt: float) -> tuple[np.ndarray, float, float | None]:
    g = spec.grid
    n, h = g.extents[axis], g.spacing[axis]
    if g.periodic[axis]:
        offsets = h * np.arange(n)
        ring = _image_sum_1d(offsets, dt, spec.nu, g.lengths[axis], spec.image_tolerance) * h
        # every row is a cyclic shift of ring, so one scalar renormalizes them all
        total = ring.sum()
        correction = float(abs(total - 1.0))
        mass = 1.0 + _row_sum_fault
        ring = ring * (mass / total)
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        return ring[idx], correction, mass
    x = g.axis_coords(axis)
    mat = _gauss_1d(x[:, None] - x[None, :], dt, spec.nu) * g.quadrature_weights(axis)[None, :]
    return mat, 0.0, None


def build_kernel_table(spec: KernelSpec, dt: float) -> KernelTable:
    _check_offset(dt, spec.dt_floor)
    mats, corrections, masses = zip(*(_axis_matrix(spec, k, dt) for k in range(spec.grid.dim)))
    return KernelTable(spec, float(dt), tuple(mats), max(corrections), axis_mass=tuple(masses))


def table_for_offset(spec: KernelSpec, dt: float) -> KernelTable:
    """Kernel table at ``dt``, or the identity when ``dt`` is below the floor."""
    if dt < spec.dt_floor:
        return KernelTable.identity(spec)
    return build_kernel_table(spec, dt)


def _warn_open_boundary(values: np.ndarray, grid: Grid) -> None:
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        return
    for k in range(grid.dim):
        if grid.periodic[k]:
            continue
        edge = max(
            float(np.max(np.abs(np.take(values, 0, axis=k)))),
            float(np.max(np.abs(np.take(values, -1, axis=k)))),
        )
        if edge > OPEN_BOUNDARY_TOLERANCE * peak:
            warnings.warn(
                f"field is not negligible on the open boundary of axis {k} "
                f"({edge / peak:.1e} of max); free-space convolution truncates it",
                RuntimeWarning,
                stacklevel=3,
            )
            return


def apply_table(table: KernelTable, values: np.ndarray) -> np.ndarray:
    """Array-level convolution, no grid checks."""
    if table.is_identity:
        return np.array(values, dtype=float, copy=True)
    out = np.asarray(values, dtype=float)
    masses = table.axis_mass or (None,) * len(table.axis_weights)
    for k, (mat, mass) in enumerate(zip(table.axis_weights, masses)):
        if mass is None:
            out = np.moveaxis(np.tensordot(mat, out, axes=([1], [k])), 0, k)
        else:
            # conservative form: the axis mean passes through exactly
            mean = out.mean(axis=k, keepdims=True)
            shifted = np.moveaxis(np.tensordot(mat, out - mean, axes=([1], [k])), 0, k)
            out = mass * mean + shifted
    return out


def convolve(table: KernelTable, f: ScalarField, *, warn_open: bool = True) -> ScalarField:
    """Discrete integral sum_xi table(x, xi) f(xi)."""
    if f.grid != table.spec.grid:
        raise GridMismatch("field grid differs from the kernel table grid")
    if warn_open and not f.grid.fully_periodic:
        _warn_open_boundary(f.values, f.grid)
    return ScalarField(f.grid, apply_table(table, f.values))
