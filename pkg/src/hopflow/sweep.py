"""Classification of fixed-point iterate-difference traces for reaction-amplitude sweeps."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from hopflow.errors import NotConverged
from hopflow.fields import ScalarField
from hopflow.mapping import MappingConfig, fixed_point_solve

CONVERGED = "converged"
PERIODIC = "periodic"
DIVERGENT = "divergent"
APERIODIC = "bounded-aperiodic"

MAX_PERIOD = 64
PERIOD_RTOL = 1e-6
DIVERGENCE_GROWTH = 1e8


@dataclass
class SweepRow:
    parameter: float
    classification: str
    final_ratio: float
    period: int | None


def detect_period(diffs, max_period: int = MAX_PERIOD, rtol: float = PERIOD_RTOL) -> int | None:
    """Smallest p <= max_period such that the last 4p values are four copies of one block."""
    d = np.asarray(diffs, dtype=float)
    for p in range(1, max_period + 1):
        if 4 * p > d.size:
            break
        tail = d[-4 * p :]
        scale = float(np.max(np.abs(tail)))
        if scale == 0.0:
            return p
        if np.all(np.abs(tail[p:] - tail[:-p]) <= rtol * scale):
            return p
    return None


def classify_trace(diffs, converged: bool) -> tuple[str, int | None]:
    d = np.asarray(diffs, dtype=float)
    if converged:
        return CONVERGED, None
    if d.size == 0:
        return APERIODIC, None
    if not np.all(np.isfinite(d)) or d[-1] > DIVERGENCE_GROWTH * max(d[0], np.finfo(float).tiny):
        return DIVERGENT, None
    period = detect_period(d)
    if period is not None:
        return PERIODIC, period
    return APERIODIC, None


def _final_ratio(diffs) -> float:
    d = np.asarray(diffs, dtype=float)
    if d.size < 2 or d[-2] == 0 or not np.all(np.isfinite(d[-2:])):
        return float("nan")
    return float(d[-1] / d[-2])


def run_point(psi_init: ScalarField, cfg: MappingConfig, parameter: float) -> SweepRow:
    try:
        _, trace = fixed_point_solve(psi_init, cfg.window, cfg)
    except NotConverged as exc:
        trace = exc.trace
    label, period = classify_trace(trace.differences, trace.converged)
    return SweepRow(parameter, label, _final_ratio(trace.differences), period)


def rows_to_csv(rows: list[SweepRow]) -> str:
    out = io.StringIO()
    out.write("parameter,classification,final_ratio,period\n")
    for r in rows:
        period = "" if r.period is None else str(r.period)
        out.write(f"{float(r.parameter)!r},{r.classification},{float(r.final_ratio)!r},{period}\n")
    return out.getvalue()
