"""Acceptance checks, each with pinned tolerances and a runtime budget.

``run_all`` is what ``hopflow validate`` prints; tests/test_acceptance.py
runs the same functions one by one.
"""

from __future__ import annotations

import contextlib
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from scipy.integrate import quad

from hopflow import kernel
from hopflow.colehopf import FluidParams, initial_psi, psi_to_velocity, velocity_to_psi
from hopflow.errors import NotConverged
from hopflow.fields import ComplexField, Grid, ScalarField, VectorField, integrate_array
from hopflow.kernel import KernelSpec, build_kernel_table, free_space_kernel, periodic_kernel
from hopflow.kinematics import WaveState, continuity_residual, velocity_from_wavefunction
from hopflow.mapping import (
    MappingConfig,
    PrescribedReaction,
    ReynoldsSchedule,
    _table,
    fixed_point_solve,
    march,
    psi0,
)
from hopflow.oracles import (
    BurgersProblem,
    burgers_exact,
    fd_burgers,
    fd_reaction_diffusion,
    gaussian_free_packet,
)

# Re-laminarization run: horizon by which term1/term2 must drop below 0.01.
RELAMINARIZATION_HORIZON = 20.0
RELAMINARIZATION_SETUP = {
    "nu": 1.0,
    "extents": 64,
    "length": "2*pi",
    "initial": "sin(x)",
    "window": 0.0015,
    "substeps": 2,
    "re0": 50.0,
    "t0": 0.1,
    "horizon": RELAMINARIZATION_HORIZON,
}
# Roundoff allowance when checking that energy never increases.
ENERGY_INCREASE_RTOL = 1e-12


@dataclass
class Check:
    label: str
    measured: float
    required: float
    relation: str = "<="

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.measured):
            return False
        if self.relation == "<=":
            return self.measured <= self.required
        return self.measured >= self.required

    def __str__(self) -> str:
        return f"{self.label} {self.measured:.3e} {self.relation} {self.required:.3g}"


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[Check]
    seconds: float = 0.0
    budget: float = 0.0
    notes: dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and self.seconds < self.budget

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        checks = "; ".join(str(c) for c in self.checks)
        return (
            f"{status} {self.number:>2} {self.title:<34} {checks} | "
            f"{self.seconds:.2f} s < {self.budget:g} s"
        )


def _periodic_sine(n: int, nu: float = 0.1):
    g = Grid.periodic_box(n, 2 * np.pi)
    return g, VectorField.from_function(g, lambda x: (np.sin(x),)), FluidParams.from_nu(nu)


def _rel_l2(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(integrate_array((a - b) ** 2, grid) / integrate_array(b**2, grid)))


# -- criteria --------------------------------------------------------------


def kernel_normalization() -> list[Check]:
    nu = 0.1
    worst_row = 0.0
    for grid, dt in (
        (Grid.periodic_box(128, 2 * np.pi), 0.05),
        (Grid.periodic_box(64, 1.0), 0.002),
        (Grid.periodic_box((16, 24), (1.0, 2.0)), 0.01),
    ):
        table = build_kernel_table(KernelSpec(nu, grid), dt)
        worst_row = max(worst_row, float(np.max(np.abs(table.dense().sum(axis=1) - 1.0))))

    worst_free = 0.0
    for x, dt in ((0.3, 0.05), (-1.2, 0.7), (0.0, 2.0)):
        total, _ = quad(
            lambda xi: free_space_kernel(x, xi, dt, nu, 1), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13
        )
        worst_free = max(worst_free, abs(total - 1.0))

    spec = KernelSpec(nu, Grid.periodic_box(64, 1.0))
    cell, _ = quad(lambda xi: periodic_kernel(0.2, xi, 0.5, spec), 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return [
        Check("periodic row-sum error", worst_row, 1e-9),
        Check("free-space integral error", worst_free, 1e-8),
        Check("periodic cell integral error", abs(cell - 1.0), 1e-9),
    ]


def heat_mode_decay() -> list[Check]:
    nu, L = 0.1, 1.0
    grid = Grid.periodic_box(256, L)
    cfg = MappingConfig(FluidParams.from_nu(nu), grid, window=1.0)
    x = grid.axis_coords(0)
    mode = np.cos(2 * np.pi * x / L)
    init = ScalarField(grid, 1.0 + 0.5 * mode)
    worst = 0.0
    for t in (0.1, 0.5, 1.0):
        out = psi0(init, t, cfg).values
        measured = 2.0 * np.mean((out - 1.0) * mode) / 0.5
        expected = np.exp(-nu * (2 * np.pi / L) ** 2 * t)
        worst = max(worst, abs(measured / expected - 1.0))
    return [Check("decay factor relative error", worst, 1e-5)]


def cole_hopf_round_trip() -> list[Check]:
    errors = []
    for n in (256, 512):
        _, v, params = _periodic_sine(n)
        back = psi_to_velocity(velocity_to_psi(v, params), params)
        errors.append(float(np.max(np.abs(back.components - v.components))))
    return [
        Check("round-trip Linf error (N=256)", errors[0], 1e-4),
        Check("refinement ratio N=256->512", errors[0] / errors[1], 3.5, ">="),
    ]


def burgers_end_to_end() -> list[Check]:
    nu = 0.1
    grid, v0, params = _periodic_sine(256, nu)
    cfg = MappingConfig(params, grid, window=0.05)
    report = march(v0, 1.0, cfg)
    exact = burgers_exact(BurgersProblem(nu, grid, v0.components[0]), 1.0).components
    rel = float(np.max(np.abs(report.velocity[-1].components - exact)) / np.max(np.abs(exact)))

    # dual oracle: spectral Cole-Hopf vs explicit finite differences
    fine, fine_v0, _ = _periodic_sine(2048, nu)
    spectral = burgers_exact(BurgersProblem(nu, fine, fine_v0.components[0]), 1.0).components
    explicit = fd_burgers(fine_v0, nu, 1.0, 1e-5).components
    dual = float(np.max(np.abs(spectral - explicit)))
    return [
        Check("march vs exact (Linf rel, t=1)", rel, 1e-2),
        Check("exact vs fd_burgers (Linf)", dual, 1e-5),
    ]


def reaction_diffusion_oracle() -> list[Check]:
    nu, T, window = 0.1, 1.0, 0.05
    grid = Grid.periodic_box(128, 2 * np.pi)
    x = grid.axis_coords(0)
    params = FluidParams.from_nu(nu)

    def c(t):
        return 0.5 * (1.0 + np.cos(x)) * np.exp(-t)

    cfg = MappingConfig(params, grid, window=window, substeps=4, reaction=PrescribedReaction(c))
    start = initial_psi(VectorField.from_function(grid, lambda x: (0.5 * np.sin(x),)), params)
    psi = start
    n = int(round(T / window))
    for i in range(n):
        psi, _ = fixed_point_solve(psi, window, cfg, t_start=i * window)
    reference = fd_reaction_diffusion(start, c, nu, T, 1e-4)
    return [Check("mapping vs FD (relative L2, T=1)", _rel_l2(psi.values, reference.values, grid), 1e-2)]


def fixed_point_contraction() -> list[Check]:
    grid = Grid.periodic_box(64, 2 * np.pi)
    params = FluidParams.from_nu(0.1)
    init = ScalarField.from_function(grid, lambda x: 1.0 + 0.3 * np.cos(x))

    cfg = MappingConfig(params, grid, window=1.0, fp_max_iters=30, reaction=PrescribedReaction(0.4))
    try:
        _, trace = fixed_point_solve(init, 1.0, cfg)
        d = np.asarray(trace.differences)
        monotone = bool(np.all(np.diff(d) < 0))
        final = float(d[-1])
    except NotConverged as exc:
        monotone, final = False, float(exc.trace.differences[-1])

    cfg = MappingConfig(params, grid, window=1.0, fp_max_iters=30, reaction=PrescribedReaction(5.0))
    try:
        _, trace = fixed_point_solve(init, 1.0, cfg)
        noncontractive = bool(np.any(np.diff(trace.differences) >= 0))
    except NotConverged:
        noncontractive = True
    return [
        Check("|c|w=0.4 final difference (<=30 its)", final, 1e-10),
        Check("|c|w=0.4 monotone (1=yes)", float(monotone), 1.0, ">="),
        Check("|c|w=5 non-contractive (1=yes)", float(noncontractive), 1.0, ">="),
    ]


def relaminarization() -> tuple[list[Check], dict[str, object]]:
    s = RELAMINARIZATION_SETUP
    grid, v0, params = _periodic_sine(s["extents"], s["nu"])
    cfg = MappingConfig(
        params,
        grid,
        window=s["window"],
        substeps=s["substeps"],
        fp_max_iters=200,
        reaction=ReynoldsSchedule(s["re0"], s["t0"]),
    )
    report = march(v0, RELAMINARIZATION_HORIZON, cfg)
    times = np.asarray(report.times)
    ratio = report.term_ratio()
    below = np.nonzero((times > 0) & (ratio < 0.01))[0]
    crossing = float(times[below[0]]) if below.size else float("inf")
    energy = np.asarray(report.energy)
    rise = float(np.max(np.diff(energy[1:]))) / energy[0]
    return (
        [
            Check("time term1/term2 < 0.01", crossing, RELAMINARIZATION_HORIZON),
            Check("max energy rise / E0 after window 1", max(rise, 0.0), ENERGY_INCREASE_RTOL),
        ],
        {"relaminarization_horizon": RELAMINARIZATION_HORIZON, "setup": dict(s), "crossing_time": crossing},
    )


def quantum_kinematics() -> list[Check]:
    worst = 0.0
    grid = Grid.periodic_box(64, 2 * np.pi)
    x = grid.axis_coords(0)
    for k, a in ((3, 1.0), (5, 0.7), (-2, 2.5)):
        state = WaveState(ComplexField(grid, np.exp(1j * k * x)), a)
        v = velocity_from_wavefunction(state).components[0]
        worst = max(worst, float(np.max(np.abs(v - a * k))))

    residuals = []
    for n, dt in ((201, 0.01), (401, 0.005)):
        g = Grid.open_box(n, -20.0, 20.0)
        before = WaveState(gaussian_free_packet(g, 0.0, 1.0, 1.0, 1.0, 0.5), 1.0)
        after = WaveState(gaussian_free_packet(g, 0.0, 1.0, 1.0, 1.0, 0.5 + dt), 1.0)
        residuals.append(continuity_residual(before, after, dt))
    return [
        Check("plane-wave velocity error", worst, 1e-10),
        Check("continuity residual ratio (h,dt halved)", residuals[0] / residuals[1], 3.5, ">="),
    ]


def transform_invariances() -> list[Check]:
    grid, v, params = _periodic_sine(256)
    psi = velocity_to_psi(v, params)
    a = psi_to_velocity(psi, params).components
    b = psi_to_velocity(ScalarField(grid, 1000.0 * psi.values), params).components
    scale_err = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))

    g2 = Grid.periodic_box((32, 32), (2 * np.pi, 2 * np.pi))
    X, Y = g2.coords()
    wave = np.exp(1j * (np.sin(X) + 0.5 * np.cos(Y))) * (1.5 + 0.5 * np.cos(X + Y))
    va = velocity_from_wavefunction(WaveState(ComplexField(g2, wave), 1.3)).components
    vb = velocity_from_wavefunction(WaveState(ComplexField(g2, np.exp(0.7j) * wave), 1.3)).components
    phase_err = float(np.max(np.abs(va - vb)) / np.max(np.abs(va)))
    return [
        Check("psi -> 1000 psi velocity change (rel)", scale_err, 1e-12),
        Check("global phase velocity change (rel)", phase_err, 1e-12),
    ]


DETERMINISM_SCENARIO = """\
dim = 1
extents = 128
lengths = 2*pi
periodic = true
nu = 0.1
initial = sine
reaction = constant
gamma = 0.5
window = 0.05
substeps = 4
T = 0.5
sample_every = 2
"""


def determinism() -> list[Check]:
    from hopflow.cli import main

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = tmp / "scenario.cfg"
        cfg.write_text(DETERMINISM_SCENARIO, encoding="utf-8")
        codes = []
        for run in ("a", "b"):
            codes.append(main(["solve", "--config", str(cfg), "--out", str(tmp / run), "--quiet"]))
        files_a = sorted(p.relative_to(tmp / "a") for p in (tmp / "a").rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(tmp / "b") for p in (tmp / "b").rglob("*") if p.is_file())
        same = files_a == files_b and all(
            (tmp / "a" / f).read_bytes() == (tmp / "b" / f).read_bytes() for f in files_a
        )
        has_csv = (tmp / "a" / "report.csv").exists()
    return [
        Check("exit codes (sum)", float(sum(codes)), 0.0),
        Check("byte-identical outputs (1=yes)", float(same and has_csv), 1.0, ">="),
    ]


@dataclass
class Criterion:
    number: int
    title: str
    budget: float
    run: Callable[[], object]


CRITERIA = [
    Criterion(1, "kernel normalization", 1.0, kernel_normalization),
    Criterion(2, "heat-mode decay", 1.0, heat_mode_decay),
    Criterion(3, "Cole-Hopf round trip", 1.0, cole_hopf_round_trip),
    Criterion(4, "Burgers end-to-end + dual oracle", 30.0, burgers_end_to_end),
    Criterion(5, "reaction-diffusion oracle", 30.0, reaction_diffusion_oracle),
    Criterion(6, "fixed-point contraction", 10.0, fixed_point_contraction),
    Criterion(7, "re-laminarization", 60.0, relaminarization),
    Criterion(8, "quantum kinematics", 5.0, quantum_kinematics),
    Criterion(9, "transform invariances", 1.0, transform_invariances),
    Criterion(10, "determinism", 60.0, determinism),
]


def run_criterion(c: Criterion) -> CriterionResult:
    start = time.perf_counter()
    out = c.run()
    elapsed = time.perf_counter() - start
    checks, notes = out if isinstance(out, tuple) else (out, {})
    return CriterionResult(c.number, c.title, checks, elapsed, c.budget, notes)


@contextlib.contextmanager
def injected_fault(name: str | None) -> Iterator[None]:
    """Deliberately break one component so the harness can prove it notices."""
    if name is None:
        yield
        return
    if name != "kernel-normalization":
        raise ValueError(f"unknown fault {name!r}")
    saved = kernel._row_sum_fault
    kernel._row_sum_fault = 1e-6
    _table.cache_clear()
    try:
        yield
    finally:
        kernel._row_sum_fault = saved
        _table.cache_clear()


def run_all(only: set[int] | None = None, fault: str | None = None, emit=print) -> list[CriterionResult]:
    results = []
    with injected_fault(fault):
        for c in CRITERIA:
            if only and c.number not in only:
                continue
            result = run_criterion(c)
            emit(result.line())
            results.append(result)
    return results
