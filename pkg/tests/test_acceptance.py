"""Acceptance criteria at their pinned tolerances and runtime budgets.

Each criterion prints one PASS/FAIL line with measured against required values.
"""

import pytest

from hopflow.validation import CRITERIA, injected_fault, run_criterion


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: f"{c.number:02d}-{c.title.replace(' ', '-')}")
def test_criterion(criterion, capsys):
    result = run_criterion(criterion)
    with capsys.disabled():
        print("\n" + result.line())
    failed = [str(c) for c in result.checks if not c.passed]
    assert result.passed, f"failed checks: {failed}; {result.seconds:.2f} s of {result.budget:g} s"


def test_normalization_fault_is_detected():
    with injected_fault("kernel-normalization"):
        result = run_criterion(CRITERIA[0])
    assert not result.passed
    assert run_criterion(CRITERIA[0]).passed
