"""Reference solutions used to check the mapping solver.

burgers_exact is spectral and runs at high resolution, while fd_burgers and
fd_reaction_diffusion are explicit finite-difference integrators.  None of
them shares code with the heat-kernel machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from hopflow.colehopf import ReactionField
from hopflow.errors import NonPositivePsi, PeriodCirculationNonzero, UnstableStep
from hopflow.fields import ComplexField, Grid, ScalarField, VectorField, second_diff_axis


@dataclass(frozen=True)
class BurgersProblem:
    nu: float
    grid: Grid
    v0: np.ndarray

    def __post_init__(self):
        if self.grid.dim != 1 or not self.grid.periodic[0]:
            raise ValueError("Burgers oracle needs a 1D periodic grid")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        v0 = np.asarray(self.v0, dtype=float).reshape(self.grid.shape)
        object.__setattr__(self, "v0", v0)
        circulation = self.grid.spacing[0] * v0.sum()
        scale = max(float(np.abs(v0).max()) * self.grid.lengths[0], 1e-300)
        if abs(circulation) > 1e-8 * scale:
            raise PeriodCirculationNonzero(0, abs(circulation), 1e-8 * scale)


def _spectral_upsample(v: np.ndarray, m: int) -> np.ndarray:
    n = v.size
    coeffs = np.fft.rfft(v)
    if n % 2 == 0:
        coeffs[-1] *= 0.5  # split the Nyquist mode symmetrically
    fine = np.zeros(m // 2 + 1, dtype=complex)
    fine[: coeffs.size] = coeffs
    return np.fft.irfft(fine, m) * (m / n)


def burgers_exact(p: BurgersProblem, t: float, modes: int | None = None) -> VectorField:
    """Exact viscous Burgers solution on the periodic line via Cole-Hopf.

    The initial velocity is interpolated spectrally onto ``modes`` points
    (default max(4N, 4096)).  The potential is integrated spectrally, psi
    is diffused exactly in Fourier space, the velocity is recovered with
    spectral derivatives, and the result is sampled back onto the grid.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    n = p.grid.extents[0]
    m = modes or max(4 * n, 4096)
    m = int(np.ceil(m / n)) * n  # integer refinement so samples coincide
    length = p.grid.lengths[0]
    k = 2 * np.pi * np.fft.rfftfreq(m, d=1.0 / m) / length

    v_hat = np.fft.rfft(_spectral_upsample(p.v0, m))
    v_hat[0] = 0.0
    phi_hat = np.zeros_like(v_hat)
    phi_hat[1:] = v_hat[1:] / (1j * k[1:])
    phi = np.fft.irfft(phi_hat, m)

    log_psi = -phi / (2 * p.nu)
    psi = np.exp(log_psi - log_psi.max())
    psi_hat = np.fft.rfft(psi) * np.exp(-p.nu * k**2 * t)
    psi_t = np.fft.irfft(psi_hat, m)
    dpsi = np.fft.irfft(1j * k * psi_hat, m)
    if psi_t.min() <= 0:
        raise NonPositivePsi("spectral psi lost positivity")
    v = -2 * p.nu * dpsi / psi_t
    return VectorField(p.grid, v[:: m // n])


def _reaction_values(c, t: float, grid: Grid) -> np.ndarray | float:
    value = c(t) if callable(c) else c
    if isinstance(value, ScalarField):
        return value.values
    if isinstance(value, ReactionField):
        return value.c.values
    return np.asarray(value, dtype=float)


def fd_reaction_diffusion(
    psi_init: ScalarField,
    c: float | ScalarField | Callable[[float], object],
    nu: float,
    T: float,
    dt: float,
) -> ScalarField:
    """Forward-Euler psi <- psi + dt (nu lap psi + c psi).

    The step is shrunk to T/ceil(T/dt) so it lands on T.  Raises
    UnstableStep if nu*dt/h^2 > 0.25 on any axis or |c|*dt > 0.1.
    """
    g = psi_init.grid
    steps = max(1, int(np.ceil(T / dt - 1e-9)))
    step = T / steps
    for h in g.spacing:
        if nu * step / h**2 > 0.25:
            raise UnstableStep(f"nu*dt/h^2 = {nu * step / h**2:.3f} exceeds 0.25")
    psi = psi_init.values.copy()
    for i in range(steps):
        cval = _reaction_values(c, i * step, g)
        if float(np.max(np.abs(cval))) * step > 0.1:
            raise UnstableStep(f"|c|*dt = {float(np.max(np.abs(cval))) * step:.3f} exceeds 0.1")
        lap = sum(second_diff_axis(psi, g.spacing[k], k, g.periodic[k]) for k in range(g.dim))
        psi = psi + step * (nu * lap + cval * psi)
    return ScalarField(g, psi)


def fd_burgers(v0: ScalarField | VectorField, nu: float, T: float, dt: float) -> VectorField:
    """Forward Euler for v_t + v v_x = nu v_xx on a 1D periodic grid, central in space."""
    g = v0.grid
    if g.dim != 1 or not g.periodic[0]:
        raise ValueError("fd_burgers needs a 1D periodic grid")
    v = (v0.values if isinstance(v0, ScalarField) else v0.components[0]).copy()
    h = g.spacing[0]
    steps = max(1, int(np.ceil(T / dt - 1e-9)))
    step = T / steps
    if nu * step / h**2 > 0.25:
        raise UnstableStep(f"nu*dt/h^2 = {nu * step / h**2:.3f} exceeds 0.25")
    a = nu * step / h**2
    b = step / (2 * h)
    for _ in range(steps):
        if np.abs(v).max() * step / h > 0.5:
            raise UnstableStep(f"CFL {np.abs(v).max() * step / h:.3f} exceeds 0.5")
        vp = np.roll(v, -1)
        vm = np.roll(v, 1)
        v = v + a * (vp - 2 * v + vm) - b * v * (vp - vm)
    return VectorField(g, v[None, :])


def gaussian_free_packet(
    grid: Grid, x0: float, k0: float, sigma0: float, hbar_over_m: float, t: float
) -> ComplexField:
    """Closed-form free Gaussian packet for i psi_t = -(hbar/2m) psi_xx on a 1D grid.

    At t = 0 this is (2 pi sigma0^2)^(-1/4) exp(-(x-x0)^2/(4 sigma0^2) + i k0 x).
    """
    if grid.dim != 1:
        raise ValueError("gaussian_free_packet is one-dimensional")
    if not sigma0 > 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    x = grid.axis_coords(0)
    a = hbar_over_m
    spread = 1 + 1j * a * t / (2 * sigma0**2)
    centre = x0 + a * k0 * t
    psi = (
        (2 * np.pi * sigma0**2) ** -0.25
        / np.sqrt(spread)
        * np.exp(-((x - centre) ** 2) / (4 * sigma0**2 * spread) + 1j * k0 * x - 0.5j * a * k0**2 * t)
    )
    return ComplexField(grid, psi)
