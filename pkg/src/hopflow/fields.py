"""Uniform grids, sampled fields and second-order finite-difference calculus.

Values are stored as numpy arrays shaped like the grid (row-major, axis 0
slowest).  Periodic axes place ``N`` points on ``[origin, origin + N*h)``;
open axes place them on ``[origin, origin + (N-1)*h]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from hopflow.errors import CurlTooLarge

MIN_EXTENT = 4


def _as_tuple(value, dim: int | None = None) -> tuple:
    if np.ndim(value) == 0:
        value = [value] if dim is None else [value] * dim
    return tuple(np.asarray(value).tolist())


@dataclass(frozen=True)
class Grid:
    extents: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]
    periodic: tuple[bool, ...]

    def __post_init__(self):
        extents = tuple(int(n) for n in _as_tuple(self.extents))
        dim = len(extents)
        spacing = tuple(float(h) for h in _as_tuple(self.spacing, dim))
        origin = tuple(float(o) for o in _as_tuple(self.origin, dim))
        periodic = tuple(bool(p) for p in _as_tuple(self.periodic, dim))
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "periodic", periodic)

        if dim not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {dim}")
        if not (len(spacing) == len(origin) == len(periodic) == dim):
            raise ValueError("extents, spacing, origin and periodic must have equal length")
        if any(n < MIN_EXTENT for n in extents):
            raise ValueError(f"every extent must be >= {MIN_EXTENT}, got {extents}")
        if not all(np.isfinite(h) and h > 0 for h in spacing):
            raise ValueError(f"spacings must be finite and positive, got {spacing}")
        if not all(np.isfinite(o) for o in origin):
            raise ValueError(f"origin must be finite, got {origin}")

    @classmethod
    def periodic_box(cls, extents, lengths, origin=0.0) -> Grid:
        """Fully periodic box; ``lengths`` are the period lengths."""
        extents = _as_tuple(extents)
        lengths = _as_tuple(lengths, len(extents))
        spacing = tuple(L / n for L, n in zip(lengths, extents))
        return cls(extents, spacing, _as_tuple(origin, len(extents)), (True,) * len(extents))

    @classmethod
    def open_box(cls, extents, lower, upper) -> Grid:
        """Open box whose first and last points sit on ``lower`` and ``upper``."""
        extents = _as_tuple(extents)
        lower = _as_tuple(lower, len(extents))
        upper = _as_tuple(upper, len(extents))
        spacing = tuple((b - a) / (n - 1) for a, b, n in zip(lower, upper, extents))
        return cls(extents, spacing, lower, (False,) * len(extents))

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extents

    @property
    def size(self) -> int:
        return int(np.prod(self.extents))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(
            n * h if p else (n - 1) * h
            for n, h, p in zip(self.extents, self.spacing, self.periodic)
        )

    @property
    def fully_periodic(self) -> bool:
        return all(self.periodic)

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.extents[axis])

    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to the full grid shape."""
        return tuple(np.meshgrid(*(self.axis_coords(k) for k in range(self.dim)), indexing="ij"))

    def quadrature_weights(self, axis: int) -> np.ndarray:
        """Trapezoid weights on open axes, uniform rectangle weights on periodic ones."""
        w = np.full(self.extents[axis], self.spacing[axis])
        if not self.periodic[axis]:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w


def _check_values(grid: Grid, values, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.size != grid.size:
        raise ValueError(f"expected {grid.size} values for grid {grid.shape}, got {arr.size}")
    arr = arr.reshape(grid.shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("field values must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, float))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> ScalarField:
        return cls(grid, np.broadcast_to(fn(*grid.coords()), grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> ScalarField:
        return cls(grid, np.full(grid.shape, float(value)))

    def with_values(self, values) -> ScalarField:
        return ScalarField(self.grid, values)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        g = self.grid
        if comps.size != g.dim * g.size:
            raise ValueError(f"expected {g.dim} components of {g.size} values")
        comps = comps.reshape((g.dim,) + g.shape)
        if not np.all(np.isfinite(comps)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_scalars(cls, fields: Sequence[ScalarField]) -> VectorField:
        grid = fields[0].grid
        if any(f.grid != grid for f in fields):
            raise ValueError("components must share one grid")
        return cls(grid, np.stack([f.values for f in fields]))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., Sequence[np.ndarray]]) -> VectorField:
        comps = fn(*grid.coords())
        return cls(grid, np.stack([np.broadcast_to(c, grid.shape) for c in comps]))

    def component(self, axis: int) -> ScalarField:
        return ScalarField(self.grid, self.components[axis])

    def magnitude_squared(self) -> ScalarField:
        return ScalarField(self.grid, np.sum(self.components**2, axis=0))


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, complex))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> ComplexField:
        return cls(grid, np.broadcast_to(fn(*grid.coords()), grid.shape))


# -- array-level stencils ---------------------------------------------------


def _slc(ndim: int, axis: int, s) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def diff_axis(a: np.ndarray, h: float, axis: int, periodic: bool, order: int = 2) -> np.ndarray:
    """First derivative along one axis.

    Central differences in the interior (and everywhere on periodic axes),
    one-sided closures of the same order at open boundaries.  ``order`` is 2
    or 4; open axes shorter than 5 points fall back to order 2.
    """
    if order not in (2, 4):
        raise ValueError(f"order must be 2 or 4, got {order}")
    n = a.shape[axis]
    if order == 4 and (periodic or n >= 5):
        return _diff4(a, h, axis, periodic)

    if periodic:
        return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2 * h)
    s = lambda k: a[_slc(a.ndim, axis, k)]  # noqa: E731
    out = np.empty_like(a)
    out[_slc(a.ndim, axis, slice(1, -1))] = (s(slice(2, None)) - s(slice(None, -2))) / (2 * h)
    out[_slc(a.ndim, axis, 0)] = (-3 * s(0) + 4 * s(1) - s(2)) / (2 * h)
    out[_slc(a.ndim, axis, -1)] = (3 * s(-1) - 4 * s(-2) + s(-3)) / (2 * h)
    return out


def _diff4(a: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    r = lambda k: np.roll(a, -k, axis)  # noqa: E731
    out = (8 * (r(1) - r(-1)) - (r(2) - r(-2))) / (12 * h)
    if periodic:
        return out
    s = lambda k: a[_slc(a.ndim, axis, k)]  # noqa: E731
    out[_slc(a.ndim, axis, 0)] = (
        -25 * s(0) + 48 * s(1) - 36 * s(2) + 16 * s(3) - 3 * s(4)
    ) / (12 * h)
    out[_slc(a.ndim, axis, 1)] = (
        -3 * s(0) - 10 * s(1) + 18 * s(2) - 6 * s(3) + s(4)
    ) / (12 * h)
    out[_slc(a.ndim, axis, -1)] = (
        25 * s(-1) - 48 * s(-2) + 36 * s(-3) - 16 * s(-4) + 3 * s(-5)
    ) / (12 * h)
    out[_slc(a.ndim, axis, -2)] = (
        3 * s(-1) + 10 * s(-2) - 18 * s(-3) + 6 * s(-4) - s(-5)
    ) / (12 * h)
    return out


def second_diff_axis(a: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(a, -1, axis) - 2 * a + np.roll(a, 1, axis)) / h**2
    s = lambda k: a[_slc(a.ndim, axis, k)]  # noqa: E731
    out = np.empty_like(a)
    out[_slc(a.ndim, axis, slice(1, -1))] = (
        s(slice(2, None)) - 2 * s(slice(1, -1)) + s(slice(None, -2))
    ) / h**2
    # 4-point one-sided closure, second order
    out[_slc(a.ndim, axis, 0)] = (2 * s(0) - 5 * s(1) + 4 * s(2) - s(3)) / h**2
    out[_slc(a.ndim, axis, -1)] = (2 * s(-1) - 5 * s(-2) + 4 * s(-3) - s(-4)) / h**2
    return out


def integrate_array(values: np.ndarray, grid: Grid) -> float:
    total = values
    for axis in reversed(range(grid.dim)):
        total = np.tensordot(total, grid.quadrature_weights(axis), axes=([axis], [0]))
    return float(total)


# -- field operators --------------------------------------------------------


def gradient(f: ScalarField, order: int = 2) -> VectorField:
    g = f.grid
    comps = [
        diff_axis(f.values, g.spacing[k], k, g.periodic[k], order) for k in range(g.dim)
    ]
    return VectorField(g, np.stack(comps))


def divergence(v: VectorField) -> ScalarField:
    g = v.grid
    total = np.zeros(g.shape)
    for k in range(g.dim):
        total += diff_axis(v.components[k], g.spacing[k], k, g.periodic[k])
    return ScalarField(g, total)


def laplacian(f: ScalarField) -> ScalarField:
    g = f.grid
    total = np.zeros(g.shape)
    for k in range(g.dim):
        total += second_diff_axis(f.values, g.spacing[k], k, g.periodic[k])
    return ScalarField(g, total)


def volume_integral(f: ScalarField) -> float:
    return integrate_array(f.values, f.grid)


def _jacobian(v: VectorField) -> np.ndarray:
    """J[i, j] = d v_i / d x_j."""
    g = v.grid
    return np.stack(
        [
            np.stack([diff_axis(v.components[i], g.spacing[j], j, g.periodic[j]) for j in range(g.dim)])
            for i in range(g.dim)
        ]
    )


def curl_residual(v: VectorField) -> float:
    """Largest |dv_i/dx_j - dv_j/dx_i| over all points and axis pairs."""
    if v.grid.dim == 1:
        return 0.0
    jac = _jacobian(v)
    worst = 0.0
    for i in range(v.grid.dim):
        for j in range(i + 1, v.grid.dim):
            worst = max(worst, float(np.max(np.abs(jac[i, j] - jac[j, i]))))
    return worst


def check_curl_free(v: VectorField, curl_tol: float = 1e-2) -> None:
    """Raise CurlTooLarge unless the curl is small relative to the velocity gradients.

    The limit is ``curl_tol * max |dv_i/dx_j|`` so that it does not depend on
    the velocity scale.
    """
    if v.grid.dim == 1:
        return
    jac = _jacobian(v)
    scale = float(np.max(np.abs(jac)))
    residual = 0.0
    for i in range(v.grid.dim):
        for j in range(i + 1, v.grid.dim):
            residual = max(residual, float(np.max(np.abs(jac[i, j] - jac[j, i]))))
    limit = curl_tol * scale
    if residual > limit and residual > 0.0:
        raise CurlTooLarge(residual, limit)


def path_integral_field(v: VectorField, curl_tol: float = 1e-2) -> ScalarField:
    """Line integral of v.dx from the grid origin to every grid point.

    Follows the staircase path: axis 0 first with the other indices at 0,
    then axis 1, then axis 2.  Each leg is accumulated with the trapezoid
    rule.
    """
    check_curl_free(v, curl_tol)
    g = v.grid
    total = np.zeros(g.shape)
    for k in range(g.dim):
        # later axes pinned to index 0 while walking axis k
        leg = v.components[k][tuple(slice(None) if a <= k else slice(0, 1) for a in range(g.dim))]
        total = total + cumulative_trapezoid(leg, dx=g.spacing[k], axis=k, initial=0.0)
    return ScalarField(g, total)


def path_integral_from_origin(
    v: VectorField, target: Sequence[int] | int, curl_tol: float = 1e-2
) -> float:
    target = (target,) if np.ndim(target) == 0 else tuple(target)
    if len(target) != v.grid.dim:
        raise ValueError(f"target index {target} does not match grid dimension {v.grid.dim}")
    return float(path_integral_field(v, curl_tol).values[target])


def field_norm(f: ScalarField | VectorField, kind: str = "L2") -> float:
    if isinstance(f, VectorField):
        sq = np.sum(f.components**2, axis=0)
    else:
        sq = f.values**2
    if kind == "Linf":
        return float(np.sqrt(np.max(sq)))
    if kind == "L2":
        return float(np.sqrt(max(integrate_array(sq, f.grid), 0.0)))
    raise ValueError(f"unknown norm kind {kind!r}; use 'L2' or 'Linf'")
