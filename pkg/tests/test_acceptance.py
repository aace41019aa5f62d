"""Acceptance criteria 1-10, one pass/fail line each.

The tolerances live in :mod:`desitter_kg.acceptance`; this file only runs
the checks and reports them.
"""

from __future__ import annotations

import pytest

from desitter_kg.acceptance import CHECKS, run_check


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, capsys):
    result = run_check(number)
    with capsys.disabled():
        print("\n" + result.line())
        if not result.passed:
            print(f"    details: {result.details}")
    assert result.passed, result.details
