import numpy as np
import pytest

from hopflow.colehopf import FluidParams
from hopflow.fields import Grid, ScalarField
from hopflow.mapping import MappingConfig, PrescribedReaction
from hopflow.sweep import (
    APERIODIC,
    CONVERGED,
    DIVERGENT,
    PERIODIC,
    SweepRow,
    classify_trace,
    detect_period,
    rows_to_csv,
    run_point,
)


def logistic_differences(r, n=400, x=0.3):
    xs = []
    for _ in range(n):
        x = r * x * (1 - x)
        xs.append(x)
    return np.abs(np.diff(xs))


@pytest.mark.parametrize("r, period", [(3.2, 2), (3.5, 4), (3.56, 8)])
def test_logistic_periods(r, period):
    label, p = classify_trace(logistic_differences(r), converged=False)
    # differences of a period-q orbit repeat with period q (or a divisor)
    assert label == PERIODIC
    assert period % p == 0


def test_chaotic_logistic_is_aperiodic():
    assert classify_trace(logistic_differences(3.9), converged=False) == (APERIODIC, None)


def test_converged_wins():
    assert classify_trace([1e-3, 1e-6, 1e-11], converged=True) == (CONVERGED, None)


@pytest.mark.parametrize("diffs", [[1.0, 10.0, np.inf], [1.0, np.nan], [1e-3, 1e6]])
def test_divergent(diffs):
    assert classify_trace(diffs, converged=False)[0] == DIVERGENT


def test_detect_period_smallest():
    block = [1.0, 2.0, 3.0]
    assert detect_period(block * 10) == 3
    assert detect_period([5.0] * 8) == 1
    assert detect_period([1.0, 2.0, 3.0]) is None


def test_period_tolerance_is_relative():
    block = np.array([1.0, 2.0])
    trace = np.tile(block, 6) * (1 + 1e-8 * np.arange(12))
    assert detect_period(trace) == 2
    noisy = np.tile(block, 6) * (1 + 1e-4 * np.arange(12))
    assert detect_period(noisy) is None


def _cfg(gamma, window=0.1):
    g = Grid.periodic_box(32, 2 * np.pi)
    return g, MappingConfig(FluidParams.from_nu(0.1), g, window, fp_max_iters=200, reaction=PrescribedReaction(gamma))


@pytest.mark.parametrize("gamma", [0.2, 0.6, 1.0])
def test_strong_contraction_converges(gamma):
    g, cfg = _cfg(gamma)
    row = run_point(ScalarField.from_function(g, lambda x: 1 + 0.2 * np.sin(x)), cfg, gamma)
    assert row.classification == CONVERGED


def test_loss_of_contraction():
    g, cfg = _cfg(50.0)
    row = run_point(ScalarField.from_function(g, lambda x: 1 + 0.2 * np.sin(x)), cfg, 50.0)
    assert row.classification in (DIVERGENT, APERIODIC)


def test_csv_rows():
    rows = [SweepRow(0.5, CONVERGED, 0.1, None), SweepRow(1.5, PERIODIC, -1.0, 2)]
    lines = rows_to_csv(rows).splitlines()
    assert lines == ["parameter,classification,final_ratio,period", "0.5,converged,0.1,", "1.5,periodic,-1.0,2"]
