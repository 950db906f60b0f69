from __future__ import annotations

import pytest

from ..config import RunConfig
from ..measure import Outcome, ideal_outcome
from ..qstate import SiteLevel
from ..services.verification import (
    EXACT_TOL,
    LEAK_CONDITIONS,
    VerificationSuite,
    check_process_matrices,
    truth_table_violations,
    wilson_max_error,
)


def test_every_unit_follows_its_truth_table_without_noise():
    worst = truth_table_violations()
    assert worst
    assert max(worst.values()) <= EXACT_TOL


def test_standard_process_matrices_pass():
    assert check_process_matrices().passed


def test_wilson_matches_the_closed_form():
    assert wilson_max_error(60) < 1e-12


def test_suite_rejects_unknown_checks():
    with pytest.raises(ValueError):
        VerificationSuite(RunConfig()).run(["bogus"])


def test_ancilla_loss_check_passes():
    (result,) = VerificationSuite(RunConfig()).run(["ancilla_loss"])
    assert result.passed, result.message
    assert result.seconds >= 0


def test_check_over_budget_fails():
    (result,) = VerificationSuite(RunConfig(), budget_seconds=0.0).run(["process_matrix"])
    assert not result.passed
    assert "budget" in result.message
    assert result.seconds > 0


def test_hyperfine_leakage_is_only_checked_where_it_can_be_seen():
    assert ideal_outcome(SiteLevel.L3) is Outcome.ZERO
    assert ideal_outcome(SiteLevel.L4) is Outcome.ONE
    assert ideal_outcome(SiteLevel.LOST) is Outcome.NEITHER
    assert {SiteLevel.L3, SiteLevel.L4} <= set(LEAK_CONDITIONS["standard"])
    for unit in ("swap", "teleport"):
        assert LEAK_CONDITIONS[unit] == (SiteLevel.LOST,)
