"""Density, probability current and velocity of a sampled wave function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hopflow.errors import GridMismatch, ZeroAmplitude
from hopflow.fields import ComplexField, ScalarField, VectorField, diff_axis, divergence, field_norm

AMPLITUDE_FLOOR = 1e-12


@dataclass(frozen=True)
class WaveState:
    psi: ComplexField
    hbar_over_m: float

    def __post_init__(self):
        if not (np.isfinite(self.hbar_over_m) and self.hbar_over_m > 0):
            raise ValueError(f"hbar_over_m must be finite and positive, got {self.hbar_over_m}")

    @property
    def grid(self):
        return self.psi.grid


def probability_density(s: WaveState) -> ScalarField:
    return ScalarField(s.grid, np.abs(s.psi.values) ** 2)


def probability_current(s: WaveState) -> VectorField:
    """j = (hbar/m) Im(psi* grad psi), from gradients of the real and imaginary parts."""
    g = s.grid
    psi = s.psi.values
    comps = []
    for k in range(g.dim):
        dre = diff_axis(psi.real, g.spacing[k], k, g.periodic[k])
        dim_ = diff_axis(psi.imag, g.spacing[k], k, g.periodic[k])
        # Im(conj(psi) * dpsi) = re*dim - im*dre
        comps.append(s.hbar_over_m * (psi.real * dim_ - psi.imag * dre))
    return VectorField(g, np.stack(comps))


def _phase_gradient(psi: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    # phase increments between neighbours; exact for linear phase
    fwd = np.angle(np.roll(psi, -1, axis) * np.conj(psi))
    if periodic:
        return (fwd + np.roll(fwd, 1, axis)) / (2 * h)

    def s(a, k):
        idx = [slice(None)] * a.ndim
        idx[axis] = k
        return a[tuple(idx)]

    out = np.empty(psi.shape)
    interior = [slice(None)] * psi.ndim
    interior[axis] = slice(1, -1)
    out[tuple(interior)] = (s(fwd, slice(1, -1)) + s(fwd, slice(None, -2))) / (2 * h)
    # one-sided second order: (3*d01 - d12) / 2h
    first = [slice(None)] * psi.ndim
    first[axis] = 0
    out[tuple(first)] = (3 * s(fwd, 0) - s(fwd, 1)) / (2 * h)
    last = [slice(None)] * psi.ndim
    last[axis] = -1
    out[tuple(last)] = (3 * s(fwd, -2) - s(fwd, -3)) / (2 * h)
    return out


def velocity_from_wavefunction(s: WaveState, amplitude_floor: float = AMPLITUDE_FLOOR) -> VectorField:
    """v = (hbar/m) grad(theta), the real part of -i (hbar/m) grad(psi)/psi.

    The phase gradient is differenced through neighbour phase increments, so
    global phase and positive rescaling of psi drop out.  Raises
    ZeroAmplitude when |psi| falls below ``amplitude_floor`` times its max.
    """
    g = s.grid
    psi = s.psi.values
    amp = np.abs(psi)
    peak = float(amp.max())
    if peak == 0.0 or float(amp.min()) < amplitude_floor * peak:
        raise ZeroAmplitude(
            f"|psi| min {float(amp.min()):.3e} below floor {amplitude_floor:.1e} x max {peak:.3e}"
        )
    comps = [
        s.hbar_over_m * _phase_gradient(psi, g.spacing[k], k, g.periodic[k]) for k in range(g.dim)
    ]
    return VectorField(g, np.stack(comps))


def continuity_residual(s_before: WaveState, s_after: WaveState, dt: float) -> float:
    """Sup norm of (w_after - w_before)/dt + div(j_mid), j_mid the average current."""
    if s_before.grid != s_after.grid:
        raise GridMismatch("wave states live on different grids")
    if s_before.hbar_over_m != s_after.hbar_over_m:
        raise ValueError("wave states carry different hbar_over_m")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = s_before.grid
    dw = (probability_density(s_after).values - probability_density(s_before).values) / dt
    j_mid = VectorField(
        g, 0.5 * (probability_current(s_before).components + probability_current(s_after).components)
    )
    return field_norm(ScalarField(g, dw + divergence(j_mid).values), "Linf")
