"""Plain-text field snapshots.

Layout::

    dim: 2
    extents: 64 64
    spacing: 0.098 0.098
    origin: 0 0
    periodic: true true
    components: 1
    complex: false
    time: 0.5
    <one row per grid point, row-major, `components` columns (x2 if complex)>

``complex`` and ``time`` are optional.  Complex rows interleave real and
imaginary parts.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hopflow.fields import ComplexField, Grid, ScalarField, VectorField

Field = ScalarField | VectorField | ComplexField

_REQUIRED = ("dim", "extents", "spacing", "origin", "periodic", "components")


class SnapshotFormatError(ValueError):
    pass


@dataclass
class Snapshot:
    field: Field
    time: float | None = None


def _fmt(x: float) -> str:
    return "%.17g" % x


def _bool(s: str) -> bool:
    s = s.strip().lower()
    if s in ("true", "1", "yes"):
        return True
    if s in ("false", "0", "no"):
        return False
    raise SnapshotFormatError(f"not a boolean: {s!r}")


def dumps(field: Field, time: float | None = None) -> str:
    g = field.grid
    if isinstance(field, VectorField):
        rows = field.components.reshape(g.dim, -1).T
        ncomp, is_complex = g.dim, False
    elif isinstance(field, ComplexField):
        flat = field.values.reshape(-1)
        rows = np.column_stack([flat.real, flat.imag])
        ncomp, is_complex = 1, True
    else:
        rows = field.values.reshape(-1, 1)
        ncomp, is_complex = 1, False

    out = io.StringIO()
    out.write(f"dim: {g.dim}\n")
    out.write("extents: " + " ".join(str(n) for n in g.extents) + "\n")
    out.write("spacing: " + " ".join(_fmt(h) for h in g.spacing) + "\n")
    out.write("origin: " + " ".join(_fmt(o) for o in g.origin) + "\n")
    out.write("periodic: " + " ".join("true" if p else "false" for p in g.periodic) + "\n")
    out.write(f"components: {ncomp}\n")
    out.write(f"complex: {'true' if is_complex else 'false'}\n")
    if time is not None:
        out.write(f"time: {_fmt(time)}\n")
    for row in rows:
        out.write(" ".join(_fmt(x) for x in row) + "\n")
    return out.getvalue()


def write_snapshot(path: str | Path, field: Field, time: float | None = None) -> None:
    Path(path).write_text(dumps(field, time), encoding="utf-8")


def loads(text: str) -> Snapshot:
    lines = text.splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line or line.startswith("#"):
            i += 1
            continue
        if ":" not in line:
            break
        key, _, value = line.partition(":")
        header[key.strip().lower()] = value.strip()
        i += 1

    missing = [k for k in _REQUIRED if k not in header]
    if missing:
        raise SnapshotFormatError(f"missing header lines: {', '.join(missing)}")
    try:
        dim = int(header["dim"])
        grid = Grid(
            [int(s) for s in header["extents"].split()],
            [float(s) for s in header["spacing"].split()],
            [float(s) for s in header["origin"].split()],
            [_bool(s) for s in header["periodic"].split()],
        )
        ncomp = int(header["components"])
        is_complex = _bool(header.get("complex", "false"))
        time = float(header["time"]) if "time" in header else None
    except ValueError as exc:
        raise SnapshotFormatError(f"bad header: {exc}") from exc
    if grid.dim != dim:
        raise SnapshotFormatError(f"dim {dim} disagrees with extents {grid.extents}")

    ncols = ncomp * (2 if is_complex else 1)
    body = "\n".join(lines[i:])
    try:
        data = np.loadtxt(io.StringIO(body), ndmin=2) if body.strip() else np.empty((0, ncols))
    except ValueError as exc:
        raise SnapshotFormatError(f"bad data row: {exc}") from exc
    if data.shape != (grid.size, ncols):
        raise SnapshotFormatError(
            f"expected {grid.size} rows of {ncols} values, got shape {data.shape}"
        )

    if is_complex:
        if ncomp != 1:
            raise SnapshotFormatError("complex snapshots carry exactly one component")
        field: Field = ComplexField(grid, data[:, 0] + 1j * data[:, 1])
    elif ncomp == 1:
        field = ScalarField(grid, data[:, 0])
    elif ncomp == grid.dim:
        field = VectorField(grid, data.T)
    else:
        raise SnapshotFormatError(f"components must be 1 or {grid.dim}, got {ncomp}")
    return Snapshot(field, time)


def read_snapshot(path: str | Path) -> Snapshot:
    return loads(Path(path).read_text(encoding="utf-8"))
