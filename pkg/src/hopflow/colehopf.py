"""Cole-Hopf transform pair and the reaction/pressure coefficient relations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hopflow.errors import NonPositivePsi, NonPositiveTime, PeriodCirculationNonzero
from hopflow.fields import ScalarField, VectorField, diff_axis, gradient, path_integral_field

PSI_ABS_FLOOR = 1e-300
PSI_REL_FLOOR = 1e-14
CIRCULATION_TOL = 1e-8


@dataclass(frozen=True)
class FluidParams:
    """Kinematic viscosity ``nu``, dynamic viscosity ``mu`` and density ``rho``."""

    nu: float
    mu: float
    rho: float

    def __post_init__(self):
        for name in ("nu", "mu", "rho"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value}")
        if abs(self.nu - self.mu / self.rho) > 1e-12 * self.nu:
            raise ValueError(f"nu={self.nu} is inconsistent with mu/rho={self.mu / self.rho}")

    @classmethod
    def from_nu(cls, nu: float, rho: float = 1.0) -> FluidParams:
        return cls(nu=nu, mu=nu * rho, rho=rho)


@dataclass(frozen=True)
class ReactionField:
    """Reaction coefficient c = dp/(2 mu), units 1/time."""

    c: ScalarField


def check_psi_positive(psi: ScalarField) -> None:
    values = psi.values
    peak = float(values.max())
    low = float(values.min())
    if not peak > PSI_ABS_FLOOR or low < max(PSI_ABS_FLOOR, PSI_REL_FLOOR * peak):
        raise NonPositivePsi(f"psi min {low:.3e} is below the positivity floor (max {peak:.3e})")


def _check_circulation(v: VectorField, tol: float) -> None:
    g = v.grid
    scale = float(np.max(np.abs(v.components))) if v.components.size else 0.0
    for k in range(g.dim):
        if not g.periodic[k]:
            continue
        loops = g.spacing[k] * np.sum(v.components[k], axis=k)
        worst = float(np.max(np.abs(loops)))
        limit = tol * max(scale * g.lengths[k], 1e-300)
        if worst > limit:
            raise PeriodCirculationNonzero(k, worst, limit)


def _log_psi(v: VectorField, params: FluidParams, curl_tol: float, circulation_tol: float) -> np.ndarray:
    _check_circulation(v, circulation_tol)
    potential = path_integral_field(v, curl_tol).values
    return -potential / (2.0 * params.nu)


def velocity_to_psi(
    v: VectorField,
    params: FluidParams,
    normalization: float = 1.0,
    *,
    curl_tol: float = 1e-2,
    circulation_tol: float = CIRCULATION_TOL,
) -> ScalarField:
    """psi = normalization * exp(-(1/2nu) * integral of v.dx from the grid origin)."""
    if not normalization > 0:
        raise ValueError(f"normalization must be positive, got {normalization}")
    with np.errstate(over="raise", under="ignore"):
        try:
            psi = normalization * np.exp(_log_psi(v, params, curl_tol, circulation_tol))
        except FloatingPointError as exc:
            raise NonPositivePsi("psi overflows; lower the normalization") from exc
    out = ScalarField(v.grid, psi)
    check_psi_positive(out)
    return out


def initial_psi(
    v0: VectorField,
    params: FluidParams,
    *,
    curl_tol: float = 1e-2,
    circulation_tol: float = CIRCULATION_TOL,
) -> ScalarField:
    """Initial psi scaled so that its maximum is 1."""
    log_psi = _log_psi(v0, params, curl_tol, circulation_tol)
    with np.errstate(under="ignore"):
        psi = ScalarField(v0.grid, np.exp(log_psi - log_psi.max()))
    check_psi_positive(psi)
    return psi


def psi_to_velocity(psi: ScalarField, params: FluidParams) -> VectorField:
    """v = -2 nu grad(psi)/psi.

    Evaluated as -2 nu grad(ln psi) with fourth-order central differences,
    which keeps the transform accurate where psi spans many decades.
    """
    check_psi_positive(psi)
    g = psi.grid
    log_psi = np.log(psi.values)
    comps = [
        -2.0 * params.nu * diff_axis(log_psi, g.spacing[k], k, g.periodic[k], order=4)
        for k in range(g.dim)
    ]
    return VectorField(g, np.stack(comps))


def reaction_from_pressure(delta_p: ScalarField, params: FluidParams) -> ReactionField:
    return ReactionField(ScalarField(delta_p.grid, delta_p.values / (2.0 * params.mu)))


def pressure_from_reaction(c: ReactionField, params: FluidParams) -> ScalarField:
    return ScalarField(c.c.grid, 2.0 * params.mu * c.c.values)


def reaction_from_psi(psi: ScalarField, params: FluidParams) -> ReactionField:
    """c = 8 nu |grad psi|^2 / psi (first power of psi in the denominator)."""
    check_psi_positive(psi)
    grad = gradient(psi).components
    return ReactionField(
        ScalarField(psi.grid, 8.0 * params.nu * np.sum(grad**2, axis=0) / psi.values)
    )


def reynolds_diagnostic(c: ReactionField, t: float) -> ScalarField:
    """Pointwise Reynolds number Re = t*c/2."""
    if not t > 0:
        raise NonPositiveTime(f"t must be positive, got {t}")
    return ScalarField(c.c.grid, 0.5 * t * c.c.values)
