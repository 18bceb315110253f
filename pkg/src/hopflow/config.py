"""Scenario files: ``key = value`` lines, ``#`` comments.

Example::

    # 1D Burgers check
    dim = 1
    extents = 256
    lengths = 2*pi
    periodic = true
    nu = 0.1
    initial = sine
    reaction = zero
    window = 0.05
    T = 1.0
    output = out/burgers

Every problem is reported as ``path:line: message``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hopflow.colehopf import FluidParams, reaction_from_pressure
from hopflow.fields import Grid, ScalarField, VectorField, gradient
from hopflow.mapping import (
    MappingConfig,
    PrescribedReaction,
    Reaction,
    ReynoldsSchedule,
    SelfConsistentReaction,
    ZeroReaction,
)
from hopflow.snapshot import read_snapshot

PRESETS = ("zero", "sine", "gaussian-bump")
REACTIONS = ("zero", "constant", "pressure", "self_consistent", "reynolds_schedule")

KEYS = {
    "dim", "extents", "lengths", "origin", "periodic",
    "nu", "mu", "rho",
    "initial", "amplitude", "wavenumber", "bump_width",
    "reaction", "gamma", "delta_p_file", "reference_pressure", "re0", "t0",
    "window", "substeps", "fp_tolerance", "fp_max_iters",
    "T", "output", "sample_every",
}  # fmt: skip

_PI_RE = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]*(?:[eE][-+]?[0-9]+)?)\s*\*?\s*pi\s*$")


class ConfigError(ValueError):
    pass


def parse_number(text: str) -> float:
    """A float, optionally written as a multiple of pi (``2*pi``, ``0.5pi``)."""
    try:
        return float(text)
    except ValueError:
        pass
    m = _PI_RE.match(text)
    if m:
        coeff = m.group(1)
        return (float(coeff) if coeff not in ("", "+", "-") else float(coeff + "1")) * math.pi
    raise ValueError(f"not a number: {text!r}")


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ScenarioConfig:
    path: Path
    entries: dict[str, str]
    lines: dict[str, int]
    grid: Grid = field(init=False)
    params: FluidParams = field(init=False)
    initial_velocity: VectorField = field(init=False)
    reaction: Reaction = field(init=False)
    mapping: MappingConfig = field(init=False)
    T: float = field(init=False)
    output: Path = field(init=False)
    sample_every: int = field(init=False)

    @classmethod
    def load(cls, path: str | Path) -> ScenarioConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
        return cls.parse(text, path)

    @classmethod
    def parse(cls, text: str, path: str | Path = "<config>") -> ScenarioConfig:
        path = Path(path)
        entries: dict[str, str] = {}
        lines: dict[str, int] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = (s.strip() for s in line.partition("="))
            if key not in KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in entries:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r} (first on line {lines[key]})")
            entries[key] = value
            lines[key] = lineno
        cfg = cls(path, entries, lines)
        cfg._build()
        return cfg

    # -- helpers ----------------------------------------------------------

    def _fail(self, key: str, message: str):
        where = f"{self.path}:{self.lines[key]}" if key in self.lines else f"{self.path}"
        raise ConfigError(f"{where}: {key}: {message}")

    def _get(self, key: str, convert, default=None, required: bool = False):
        if key not in self.entries:
            if required:
                self._fail(key, "required key is missing")
            return default
        try:
            return convert(self.entries[key])
        except ValueError as exc:
            self._fail(key, str(exc))

    def _list(self, key: str, convert, dim: int, default=None, required: bool = False):
        def parse(text):
            items = [convert(s) for s in text.replace(",", " ").split()]
            if len(items) == 1:
                items = items * dim
            if len(items) != dim:
                raise ValueError(f"expected {dim} values, got {len(items)}")
            return items

        return self._get(key, parse, default, required)

    def _positive(self, key: str, value: float):
        if not (np.isfinite(value) and value > 0):
            self._fail(key, f"must be positive, got {value}")
        return value

    def _resolve(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.path.parent / p

    # -- construction -----------------------------------------------------

    def _build(self) -> None:
        dim = self._get("dim", int, 1)
        if dim not in (1, 2, 3):
            self._fail("dim", f"must be 1, 2 or 3, got {dim}")
        extents = self._list("extents", int, dim, required=True)
        lengths = self._list("lengths", parse_number, dim, required=True)
        origin = self._list("origin", parse_number, dim, default=[0.0] * dim)
        periodic = self._list("periodic", _parse_bool, dim, default=[True] * dim)
        for L in lengths:
            self._positive("lengths", L)
        try:
            spacing = [L / n if p else L / (n - 1) for L, n, p in zip(lengths, extents, periodic)]
            self.grid = Grid(extents, spacing, origin, periodic)
        except (ValueError, ZeroDivisionError) as exc:
            self._fail("extents", str(exc))

        nu = self._positive("nu", self._get("nu", parse_number, required=True))
        rho = self._positive("rho", self._get("rho", parse_number, 1.0))
        mu = self._positive("mu", self._get("mu", parse_number, nu * rho))
        try:
            self.params = FluidParams(nu=nu, mu=mu, rho=rho)
        except ValueError as exc:
            self._fail("mu", str(exc))

        self.initial_velocity = self._initial_velocity()
        self.reaction = self._reaction()

        self.T = self._positive("T", self._get("T", parse_number, required=True))
        window = self._positive("window", self._get("window", parse_number, required=True))
        substeps = self._get("substeps", int, 4)
        if substeps < 1:
            self._fail("substeps", f"must be >= 1, got {substeps}")
        tol = self._positive("fp_tolerance", self._get("fp_tolerance", parse_number, 1e-10))
        max_iters = self._get("fp_max_iters", int, 50)
        if max_iters < 1:
            self._fail("fp_max_iters", f"must be >= 1, got {max_iters}")
        self.mapping = MappingConfig(
            self.params, self.grid, window, substeps, tol, max_iters, self.reaction
        )
        if window < self.mapping.kernel_spec.dt_floor:
            self._fail(
                "window",
                f"{window} is below the kernel floor {self.mapping.kernel_spec.dt_floor:.3e} "
                "(0.1 h^2 / nu)",
            )
        self.sample_every = self._get("sample_every", int, 1)
        if self.sample_every < 1:
            self._fail("sample_every", f"must be >= 1, got {self.sample_every}")
        self.output = self._resolve(self._get("output", str, "out"))

    def _initial_velocity(self) -> VectorField:
        g = self.grid
        name = self._get("initial", str, "zero")
        amplitude = self._get("amplitude", parse_number, 1.0)
        if name == "zero":
            return VectorField(g, np.zeros((g.dim,) + g.shape))
        if name == "sine":
            m = self._get("wavenumber", int, 1)
            x = g.coords()[0]
            comps = np.zeros((g.dim,) + g.shape)
            comps[0] = amplitude * np.sin(2 * np.pi * m * (x - g.origin[0]) / g.lengths[0])
            return VectorField(g, comps)
        if name == "gaussian-bump":
            width = self._positive(
                "bump_width", self._get("bump_width", parse_number, 0.1 * min(g.lengths))
            )
            centre = [o + 0.5 * L for o, L in zip(g.origin, g.lengths)]
            r2 = sum((c - x0) ** 2 for c, x0 in zip(g.coords(), centre))
            potential = ScalarField(g, amplitude * np.exp(-r2 / (2 * width**2)))
            return gradient(potential)
        path = self._resolve(name)
        if not path.exists():
            self._fail("initial", f"not a preset ({', '.join(PRESETS)}) and no such file: {path}")
        try:
            field_ = read_snapshot(path).field
        except ValueError as exc:
            self._fail("initial", f"{path}: {exc}")
        if field_.grid != g:
            self._fail("initial", f"{path}: snapshot grid does not match the configured grid")
        if isinstance(field_, ScalarField) and g.dim == 1:
            return VectorField(g, field_.values[None, ...])
        if not isinstance(field_, VectorField):
            self._fail("initial", f"{path}: expected a velocity snapshot with {g.dim} components")
        return field_

    def _reaction(self) -> Reaction:
        kind = self._get("reaction", str, "zero")
        if kind == "zero":
            return ZeroReaction()
        if kind == "constant":
            return PrescribedReaction(self._get("gamma", parse_number, required=True))
        if kind == "self_consistent":
            return SelfConsistentReaction()
        if kind == "reynolds_schedule":
            re0 = self._get("re0", parse_number, required=True)
            t0 = self._positive("t0", self._get("t0", parse_number, required=True))
            return ReynoldsSchedule(re0, t0)
        if kind == "pressure":
            path = self._resolve(self._get("delta_p_file", str, required=True))
            if not path.exists():
                self._fail("delta_p_file", f"no such file: {path}")
            try:
                snap = read_snapshot(path).field
            except ValueError as exc:
                self._fail("delta_p_file", f"{path}: {exc}")
            if not isinstance(snap, ScalarField) or snap.grid != self.grid:
                self._fail("delta_p_file", f"{path}: expected a scalar snapshot on the configured grid")
            p_ref = self._get("reference_pressure", parse_number, 0.0)
            delta_p = ScalarField(self.grid, snap.values - p_ref)
            return PrescribedReaction(reaction_from_pressure(delta_p, self.params))
        self._fail("reaction", f"unknown reaction {kind!r}; choose from {', '.join(REACTIONS)}")

    def with_reaction(self, reaction: Reaction, fp_max_iters: int | None = None) -> MappingConfig:
        m = self.mapping
        return MappingConfig(
            m.params,
            m.grid,
            m.window,
            m.substeps,
            m.fp_tolerance,
            fp_max_iters or m.fp_max_iters,
            reaction,
            m.image_tolerance,
            m.dt_floor,
        )

    def echo(self) -> dict[str, str]:
        return dict(sorted(self.entries.items()))
