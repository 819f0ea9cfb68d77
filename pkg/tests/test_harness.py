"""Trial scheduling, Wilson intervals, determinism, checkpoint round-trip."""

import json
import math

import pytest
from hypothesis import given, strategies as st

from lppsim.errors import CheckpointError, DomainError, InvariantViolation
from lppsim.harness import (
    Checkpoint,
    TrialPlan,
    config_hash,
    merge_aggregates,
    run_trials,
    trial_seed,
    wilson_interval,
)


def test_wilson_examples():
    lo, hi = wilson_interval(0, 100, 1.96)
    assert lo == 0.0 and hi > 0.0
    lo, hi = wilson_interval(50, 100, 1.96)
    assert lo == pytest.approx(0.4038, abs=1e-3)
    assert hi == pytest.approx(0.5962, abs=1e-3)
    lo, hi = wilson_interval(100, 100, 1.96)
    assert hi == 1.0 and lo < 1.0


def test_wilson_domain_errors():
    with pytest.raises(DomainError):
        wilson_interval(-1, 10)
    with pytest.raises(DomainError):
        wilson_interval(11, 10)
    with pytest.raises(DomainError):
        wilson_interval(0, 0)
    with pytest.raises(DomainError):
        wilson_interval(1, 10, z=0.0)


@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_bounds_property(s, n):
    if s > n:
        s = n
    lo, hi = wilson_interval(s, n)
    p = s / n
    assert 0.0 <= lo <= p <= hi <= 1.0


def test_trial_seed_is_stable_and_spread():
    assert trial_seed(1, 0) == trial_seed(1, 0)
    seeds = {trial_seed(1, t) for t in range(10000)}
    assert len(seeds) == 10000
    assert trial_seed(1, 5) != trial_seed(2, 5)
    assert all(0 <= s < 2 ** 64 for s in list(seeds)[:100])


def test_merge_aggregates():
    a = {"trials": 2, "x": 1.5, "v": [1, 0, 2]}
    b = {"trials": 1, "x": 0.25, "v": [0, 3, 1], "extra": 7}
    out = merge_aggregates(a, b)
    assert out == {"trials": 3, "x": 1.75, "v": [1, 3, 3], "extra": 7}
    assert merge_aggregates({}, a) == a


def _record(t):
    # float sums make grouping-sensitivity visible
    return {"trials": 1, "s": math.sin(t) * 1e-3, "c": [t % 3 == 0, t % 3 != 0]}


def test_run_trials_worker_independence():
    plans = [TrialPlan(9, 333, batch_size=16) for _ in range(3)]
    a1 = run_trials(plans[0], _record, workers=1)
    a2 = run_trials(plans[1], _record, workers=4)
    a3 = run_trials(plans[2], _record, workers=2)
    assert a1 == a2 == a3
    assert a1["trials"] == 333


def test_run_trials_empty_plan():
    assert run_trials(TrialPlan(1, 0), _record, workers=2) == {}


def test_run_trials_failure_diagnostic():
    def bad(t):
        if t == 37:
            raise InvariantViolation("synthetic failure")
        return {"trials": 1}

    with pytest.raises(InvariantViolation) as exc:
        run_trials(TrialPlan(5, 100, batch_size=8), bad, workers=1)
    msg = str(exc.value)
    assert "trial 37" in msg
    assert str(trial_seed(5, 37)) in msg


def test_checkpoint_resume_matches_uninterrupted(tmp_path):
    ck_path = str(tmp_path / "run.ckpt")
    h = config_hash({"demo": 1})

    def interrupting(t):
        if t >= 120:
            raise InvariantViolation("interrupt")
        return _record(t)

    with pytest.raises(InvariantViolation):
        run_trials(TrialPlan(3, 200, batch_size=10), interrupting, workers=1,
                   checkpoint=Checkpoint(ck_path, every_batches=2, cfg_hash=h))
    state = json.load(open(ck_path))
    assert 0 < state["completed_trials"] < 200

    resumed = run_trials(TrialPlan(3, 200, batch_size=10), _record, workers=2,
                         checkpoint=Checkpoint(ck_path, every_batches=2, cfg_hash=h))
    clean = run_trials(TrialPlan(3, 200, batch_size=10), _record, workers=1)
    assert resumed == clean

    # finished checkpoint resumes to the same aggregate without rerunning
    again = run_trials(TrialPlan(3, 200, batch_size=10),
                       lambda t: (_ for _ in ()).throw(AssertionError("reran")),
                       checkpoint=Checkpoint(ck_path, every_batches=2, cfg_hash=h))
    assert again == clean


def test_checkpoint_config_mismatch(tmp_path):
    ck_path = str(tmp_path / "run.ckpt")
    run_trials(TrialPlan(3, 40, batch_size=10), _record,
               checkpoint=Checkpoint(ck_path, cfg_hash=config_hash({"a": 1})))
    with pytest.raises(CheckpointError):
        run_trials(TrialPlan(3, 40, batch_size=10), _record,
                   checkpoint=Checkpoint(ck_path, cfg_hash=config_hash({"a": 2})))


def test_plan_validation():
    with pytest.raises(DomainError):
        TrialPlan(1, -1)
    with pytest.raises(DomainError):
        TrialPlan(1, 10, batch_size=0)
    with pytest.raises(DomainError):
        run_trials(TrialPlan(1, 1), _record, workers=0)


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
