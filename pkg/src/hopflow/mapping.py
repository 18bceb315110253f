"""Integral-mapping solver for the reaction-diffusion form of the flow.

Over one window of length ``t`` the mapping is

    Y(psi)(x) = K(t) * psi_init  +  int_0^t K(t - tau) * [c(tau) psi(tau)] dtau,

where ``*`` is spatial convolution with the heat kernel.  Iterating
psi <- Y(psi) starts from the pure-diffusion term.  Inside a window the
iterate is interpolated linearly between ``psi_init`` (tau = 0) and the
current end-of-window field (tau = t), and the time integral uses the
trapezoid rule on ``substeps + 1`` nodes.  The surface term vanishes on the
periodic and decaying domains supported here.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

from hopflow.colehopf import (
    FluidParams,
    ReactionField,
    check_psi_positive,
    initial_psi,
    psi_to_velocity,
    reaction_from_psi,
)
from hopflow.errors import NonPositivePsi, NotConverged
from hopflow.fields import Grid, ScalarField, VectorField, gradient, integrate_array
from hopflow.kernel import (
    DEFAULT_IMAGE_TOLERANCE,
    KernelSpec,
    _warn_open_boundary,
    apply_table,
    build_kernel_table,
    table_for_offset,
)

# -- reaction coefficients ---------------------------------------------------


class Reaction:
    """Source coefficient c(x, t) of the reaction term."""

    def coefficient(self, psi: np.ndarray, t: float, grid: Grid, params: FluidParams):
        raise NotImplementedError

    def bound(self, t_start: float, t_end: float) -> float | None:
        """Upper bound of |c| over the window, if cheaply known."""
        return None


class ZeroReaction(Reaction):
    def coefficient(self, psi, t, grid, params):
        return 0.0

    def bound(self, t_start, t_end):
        return 0.0

    def __repr__(self):
        return "ZeroReaction()"


@dataclass(frozen=True)
class PrescribedReaction(Reaction):
    """Fixed coefficient: a number, a field, or a callable ``t -> number | field``."""

    source: float | ScalarField | ReactionField | Callable

    def coefficient(self, psi, t, grid, params):
        value = self.source(t) if callable(self.source) else self.source
        if isinstance(value, ReactionField):
            value = value.c
        if isinstance(value, ScalarField):
            return value.values
        return np.asarray(value, dtype=float)

    def bound(self, t_start, t_end):
        if callable(self.source):
            return None
        return float(np.max(np.abs(self.coefficient(None, t_start, None, None))))


class SelfConsistentReaction(Reaction):
    """c = 8 nu |grad psi|^2 / psi from the lagged iterate."""

    def coefficient(self, psi, t, grid, params):
        return reaction_from_psi(ScalarField(grid, psi), params).c.values

    def __repr__(self):
        return "SelfConsistentReaction()"


@dataclass(frozen=True)
class ReynoldsSchedule(Reaction):
    """Uniform c = 2 Re0 / max(t, t0); the cap t0 keeps the source finite at t = 0."""

    re0: float
    t0: float

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")

    def coefficient(self, psi, t, grid, params):
        return 2.0 * self.re0 / max(t, self.t0)

    def bound(self, t_start, t_end):
        return abs(2.0 * self.re0 / max(t_start, self.t0))


# -- configuration and results ----------------------------------------------


@dataclass
class MappingConfig:
    params: FluidParams
    grid: Grid
    window: float
    substeps: int = 4
    fp_tolerance: float = 1e-10
    fp_max_iters: int = 50
    reaction: Reaction = field(default_factory=ZeroReaction)
    image_tolerance: float = DEFAULT_IMAGE_TOLERANCE
    dt_floor: float | None = None

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError(f"window must be positive, got {self.window}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be an integer >= 1, got {self.substeps}")
        if not self.fp_tolerance > 0:
            raise ValueError(f"fp_tolerance must be positive, got {self.fp_tolerance}")
        if int(self.fp_max_iters) != self.fp_max_iters or self.fp_max_iters < 1:
            raise ValueError(f"fp_max_iters must be an integer >= 1, got {self.fp_max_iters}")

    @cached_property
    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.params.nu, self.grid, self.image_tolerance, self.dt_floor)


@dataclass
class IterationTrace:
    differences: list[float]
    converged: bool
    iterations_used: int

    def ratios(self) -> np.ndarray:
        d = np.asarray(self.differences)
        with np.errstate(divide="ignore", invalid="ignore"):
            return d[1:] / d[:-1]


@dataclass
class SolveReport:
    times: list[float] = field(default_factory=list)
    psi: list[ScalarField] = field(default_factory=list)
    velocity: list[VectorField] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    term1_norm: list[float] = field(default_factory=list)
    term2_norm: list[float] = field(default_factory=list)
    fp_iterations: list[int] = field(default_factory=list)
    traces: list[IterationTrace] = field(default_factory=list)

    def term_ratio(self) -> np.ndarray:
        t1 = np.asarray(self.term1_norm)
        t2 = np.asarray(self.term2_norm)
        return t1 / t2

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("t,energy,term1_norm,term2_norm,fp_iterations\n")
        for row in zip(self.times, self.energy, self.term1_norm, self.term2_norm, self.fp_iterations):
            t, e, a, b, n = row
            out.write(f"{float(t)!r},{float(e)!r},{float(a)!r},{float(b)!r},{int(n)}\n")
        return out.getvalue()


# -- kernel cache -------------------------------------------------------------


@lru_cache(maxsize=256)
def _table(spec: KernelSpec, offset: float, strict: bool):
    return build_kernel_table(spec, offset) if strict else table_for_offset(spec, offset)


def _nodes(t: float, substeps: int):
    j = np.arange(substeps + 1)
    taus = t * j / substeps
    offsets = t * (substeps - j) / substeps
    weights = np.full(substeps + 1, t / substeps)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return taus, offsets, weights


def _source_term(
    psi_iter: np.ndarray, psi_init: np.ndarray, t: float, cfg: MappingConfig, t_start: float
) -> np.ndarray:
    if isinstance(cfg.reaction, ZeroReaction):
        return np.zeros_like(psi_init)
    spec = cfg.kernel_spec
    total = np.zeros_like(psi_init)
    for tau, offset, weight in zip(*_nodes(t, cfg.substeps)):
        frac = tau / t
        psi_tau = (1.0 - frac) * psi_init + frac * psi_iter
        c = cfg.reaction.coefficient(psi_tau, t_start + tau, cfg.grid, cfg.params)
        total += weight * apply_table(_table(spec, float(offset), False), c * psi_tau)
    return total


def _diffusion_term(psi_init: np.ndarray, t: float, cfg: MappingConfig) -> np.ndarray:
    return apply_table(_table(cfg.kernel_spec, float(t), True), psi_init)


def _check_inputs(psi_init: ScalarField, cfg: MappingConfig) -> None:
    if psi_init.grid != cfg.grid:
        raise ValueError("psi_init grid differs from the configured grid")
    check_psi_positive(psi_init)
    if not cfg.grid.fully_periodic:
        _warn_open_boundary(psi_init.values, cfg.grid)


def psi0(psi_init: ScalarField, t: float, cfg: MappingConfig) -> ScalarField:
    """Initial-data term: psi_init diffused for time ``t`` (pure heat solution)."""
    _check_inputs(psi_init, cfg)
    return ScalarField(cfg.grid, _diffusion_term(psi_init.values, t, cfg))


def mapping_terms(
    psi_iter: ScalarField,
    psi_init: ScalarField,
    t: float,
    cfg: MappingConfig,
    *,
    t_start: float = 0.0,
) -> tuple[ScalarField, ScalarField]:
    """(source term, initial-data term) of one mapping application."""
    _check_inputs(psi_init, cfg)
    term2 = _diffusion_term(psi_init.values, t, cfg)
    term1 = _source_term(psi_iter.values, psi_init.values, t, cfg, t_start)
    return ScalarField(cfg.grid, term1), ScalarField(cfg.grid, term2)


def apply_mapping(
    psi_iter: ScalarField,
    psi_init: ScalarField,
    t: float,
    cfg: MappingConfig,
    *,
    t_start: float = 0.0,
) -> ScalarField:
    term1, term2 = mapping_terms(psi_iter, psi_init, t, cfg, t_start=t_start)
    return ScalarField(cfg.grid, term1.values + term2.values)


def _solve_window(psi_init: np.ndarray, t: float, cfg: MappingConfig, t_start: float):
    term2 = _diffusion_term(psi_init, t, cfg)
    current = term2
    term1 = np.zeros_like(term2)
    diffs: list[float] = []
    converged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.fp_max_iters):
            term1 = _source_term(current, psi_init, t, cfg, t_start)
            nxt = term1 + term2
            diff = float(np.max(np.abs(nxt - current)))
            diffs.append(diff)
            if not np.isfinite(diff):
                break
            if isinstance(cfg.reaction, SelfConsistentReaction) and float(nxt.min()) <= 0.0:
                raise NonPositivePsi(f"iterate lost positivity (min {float(nxt.min()):.3e})")
            current = nxt
            if diff < cfg.fp_tolerance:
                converged = True
                break
    trace = IterationTrace(diffs, converged, len(diffs))
    if not converged:
        raise NotConverged(trace)
    return current, trace, term1, term2


def fixed_point_solve(
    psi_init: ScalarField, t: float, cfg: MappingConfig, *, t_start: float = 0.0
) -> tuple[ScalarField, IterationTrace]:
    """Iterate psi <- Y(psi) from the diffusion term until the sup-norm update is below tolerance.

    Raises NotConverged (carrying the trace) after ``cfg.fp_max_iters``
    applications.
    """
    _check_inputs(psi_init, cfg)
    psi, trace, _, _ = _solve_window(psi_init.values, t, cfg, t_start)
    return ScalarField(cfg.grid, psi), trace


def _windows(T: float, window: float, dt_floor: float) -> list[tuple[float, float]]:
    n = max(1, int(np.ceil(T / window - 1e-9)))
    starts = [i * window for i in range(n)]
    ends = [(i + 1) * window for i in range(n - 1)] + [T]
    if n > 1 and ends[-1] - starts[-1] < dt_floor:
        # fold a sliver below the kernel floor into the previous window
        starts.pop()
        ends.pop()
        ends[-1] = T
    return list(zip(starts, ends))


def _energy(v: VectorField) -> float:
    return 0.5 * integrate_array(np.sum(v.components**2, axis=0), v.grid)


def _norm(a: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(max(integrate_array(a**2, grid), 0.0)))


def march(
    v0: VectorField,
    T: float,
    cfg: MappingConfig,
    *,
    sample_every: int = 1,
) -> SolveReport:
    """Advance v0 to time T one window at a time.

    Each window solves the fixed point from the previous end state, which
    is rescaled to max 1 (the scale of psi cancels in the velocity).
    Samples are taken at t = 0, every ``sample_every`` windows, and at T.
    A NotConverged raised mid-run carries the partial report as ``.report``.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if v0.grid != cfg.grid:
        raise ValueError("v0 grid differs from the configured grid")
    grid, params = cfg.grid, cfg.params
    report = SolveReport()

    def record(t, psi, term1, term2, iters):
        field_psi = ScalarField(grid, psi)
        v = psi_to_velocity(field_psi, params)
        report.times.append(float(t))
        report.psi.append(field_psi)
        report.velocity.append(v)
        report.energy.append(_energy(v))
        report.term1_norm.append(_norm(term1, grid))
        report.term2_norm.append(_norm(term2, grid))
        report.fp_iterations.append(int(iters))

    psi = initial_psi(v0, params).values
    record(0.0, psi, np.zeros_like(psi), psi, 0)

    windows = _windows(T, cfg.window, cfg.kernel_spec.dt_floor)
    for i, (start, end) in enumerate(windows):
        try:
            out, trace, term1, term2 = _solve_window(psi, end - start, cfg, start)
        except NotConverged as exc:
            report.traces.append(exc.trace)
            exc.report = report
            exc.time = start
            raise
        report.traces.append(trace)
        if (i + 1) % sample_every == 0 or i == len(windows) - 1:
            record(end, out, term1, term2, trace.iterations_used)
        psi = out / out.max()
    return report


def perturbation_separation(
    v0: VectorField,
    delta: ScalarField,
    T: float,
    cfg: MappingConfig,
    *,
    sample_every: int = 1,
) -> np.ndarray:
    """L2 distance between runs started from v0 and from v0 + grad(delta), per sample."""
    v_b = VectorField(v0.grid, v0.components + gradient(delta).components)
    a = march(v0, T, cfg, sample_every=sample_every)
    b = march(v_b, T, cfg, sample_every=sample_every)
    return np.array(
        [
            _norm(np.sqrt(np.sum((va.components - vb.components) ** 2, axis=0)), v0.grid)
            for va, vb in zip(a.velocity, b.velocity)
        ]
    )
