"""Direct tests for the randomized suite runner."""

import pytest

from twobar.errors import DomainError
from twobar.verify import SUITES, run_suite


def test_all_suites_pass_at_modest_trials():
    results = run_suite("all", trials=30, seed=5)
    assert [r.name for r in results] == list(SUITES)
    for res in results:
        assert res.trials == 30
        assert res.passed, (res.name, res.worst)
        assert res.worst <= res.tol


def test_single_suite_is_deterministic():
    first = run_suite("routes", trials=12, seed=2)
    second = run_suite("routes", trials=12, seed=2)
    assert len(first) == len(second) == 1
    assert first[0].as_dict() == second[0].as_dict()


def test_results_serialize_to_plain_dicts():
    (res,) = run_suite("jumps", trials=5, seed=0)
    payload = res.as_dict()
    assert set(payload) == {
        "name", "trials", "passed", "worst", "tol", "witness_seed", "detail",
    }
    assert payload["name"] == "jumps"
    assert isinstance(payload["passed"], bool)


def test_tol_override_can_force_a_failure():
    (res,) = run_suite("routes", trials=8, seed=2, tol=-1.0)
    assert not res.passed
    assert res.worst >= 0.0
    # with an impossible tolerance every trial fails, so a witness is recorded
    assert res.witness_seed is not None


def test_unknown_suite_is_rejected():
    with pytest.raises(DomainError, match="unknown suite"):
        run_suite("everything")
