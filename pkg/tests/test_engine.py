import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacheck.binomial_stats import Tally
from pacheck.engine import (
    TrialEngine,
    TrialSource,
    checkpoint,
    derive_seed,
    derive_seeds,
    load_checkpoint,
    restore,
    resume,
    run_trials,
    save_checkpoint,
    seeds_to_uniform,
    turning_point_test,
)
from pacheck.errors import CheckpointError, InsufficientDataError, TrialInfrastructureError
from pacheck.subjects import bernoulli_source


class Constant(TrialSource):
    def __init__(self, value):
        self.value = value
        self.properties = ("p",)

    def trial(self, index, seed):
        return {"p": self.value}


class TwoProps(TrialSource):
    """Per-trial source (no vectorized batch) with two seed-dependent properties."""

    properties = ("low", "even")

    def trial(self, index, seed):
        return {"low": seed % 7 != 0, "even": index % 5 != 3}

    def fingerprint(self):
        return "two-props"


class Crashes(TrialSource):
    properties = ("p",)

    def __init__(self, at):
        self.at = at

    def trial(self, index, seed):
        if index == self.at:
            raise RuntimeError("subject crashed")
        return {"p": True}


def test_seed_derivation_is_index_based():
    seeds = derive_seeds(42, 0, 1000)
    assert [derive_seed(42, i) for i in (0, 1, 999)] == [int(seeds[0]), int(seeds[1]), int(seeds[999])]
    assert len(set(seeds.tolist())) == 1000
    assert not np.array_equal(derive_seeds(43, 0, 10), seeds[:10])
    u = seeds_to_uniform(seeds)
    assert u.min() >= 0 and u.max() < 1


def test_constant_sources():
    ledger = run_trials(Constant(True), 100)
    assert ledger.tallies["p"] == Tally(100, 100)
    ledger = run_trials(Constant(False), 7)
    assert ledger.tallies["p"] == Tally(7, 0)
    assert ledger.violation_log == [(i, "p") for i in range(7)]


def test_bernoulli_half_million_trials():
    ledger = run_trials(bernoulli_source(0.5), 10**6, base_seed=11, batch_size=65536)
    t = ledger.tallies["phi"]
    assert abs(t.x / t.n - 0.5) <= 0.002


def test_zero_count():
    assert run_trials(Constant(True), 0).trial_count == 0


@pytest.mark.parametrize("workers", [1, 2, 5])
def test_determinism_byte_identical(workers):
    a = run_trials(TwoProps(), 1003, base_seed=9, workers=workers, batch_size=17, retain_bits=True)
    b = run_trials(TwoProps(), 1003, base_seed=9, workers=workers, batch_size=17, retain_bits=True)
    assert a.to_json() == b.to_json()


def test_tallies_invariant_to_worker_count_and_batching():
    ref = run_trials(TwoProps(), 2000, base_seed=3)
    for workers, batch in [(3, 7), (8, 64), (1, 1000)]:
        other = run_trials(TwoProps(), 2000, base_seed=3, workers=workers, batch_size=batch)
        assert other.tallies == ref.tallies
        assert other.violation_log == ref.violation_log


def test_conservation():
    ledger = run_trials(TwoProps(), 777, base_seed=1, workers=3)
    for p in ledger.properties:
        t = ledger.tallies[p]
        assert t.n == ledger.trial_count
        assert t.x + len(ledger.violation_indices(p)) == t.n


def test_stop_rule_truncates_batch():
    def stop(ledger, start, columns):
        return 5 if start + 5 >= 100 else None

    ledger = run_trials(Constant(True), 1000, batch_size=64, stop=stop)
    # batches start at 0, 64, 128; the rule first fires at 128 and keeps 5
    assert ledger.trial_count == 133


def test_outcome_bits_retention_and_cap():
    ledger = run_trials(TwoProps(), 300, retain_bits=True, bits_cap=120)
    bits = ledger.outcome_bits("even")
    assert len(bits) == 120
    assert not bits[3] and bits[4]
    assert run_trials(TwoProps(), 10).outcome_bits("even") is None


@pytest.mark.parametrize("workers", [1, 4])
def test_infrastructure_error_carries_index_and_partial_ledger(workers):
    with pytest.raises(TrialInfrastructureError) as info:
        run_trials(Crashes(130), 500, workers=workers, batch_size=50)
    exc = info.value
    assert exc.trial_index == 130
    assert exc.ledger.trial_count == 130
    assert exc.ledger.tallies["p"] == Tally(130, 130)


def _interrupted(n, at, workers, tmp_path):
    engine = TrialEngine(TwoProps(), workers, 32, retain_bits=True)
    first = engine.run(at, base_seed=123)
    path = tmp_path / f"snap-{at}.json"
    save_checkpoint(first, path)
    return resume(load_checkpoint(path), TwoProps(), n, workers, batch_size=32, retain_bits=True)


@pytest.mark.parametrize("workers", [1, 3])
def test_checkpoint_resume_differential(tmp_path, workers):
    n = 1000
    whole = TrialEngine(TwoProps(), workers, 32, retain_bits=True).run(n, base_seed=123)
    for at in (0, 1, 500, n - 1):
        assert _interrupted(n, at, workers, tmp_path).to_json() == whole.to_json()


def test_resume_rejects_other_worker_count():
    snap = checkpoint(TrialEngine(TwoProps(), 2).run(100, 5))
    with pytest.raises(CheckpointError):
        resume(snap, TwoProps(), 200, workers=3)


def test_restore_rejects_corruption_and_versions():
    snap = checkpoint(run_trials(TwoProps(), 50))
    assert restore(snap).to_json() == run_trials(TwoProps(), 50).to_json()
    tampered = json.loads(json.dumps(snap))
    tampered["ledger"]["tallies"]["low"][1] -= 1
    with pytest.raises(CheckpointError):
        restore(tampered)
    old = dict(snap, version=0)
    with pytest.raises(CheckpointError):
        restore(old)
    with pytest.raises(CheckpointError):
        restore({"format": "something-else"})


def test_load_checkpoint_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


# -- turning point test --------------------------------------------------------


def test_turning_points_examples():
    d = turning_point_test([1, 1, 1, 1, 1])
    assert d.turning_points == 0 and d.tie_fraction == 1.0
    d = turning_point_test([0, 1, 0, 1, 0])
    assert d.turning_points == 3
    assert d.expected == pytest.approx(2.0)
    assert d.variance == pytest.approx(51 / 90)
    assert d.z_statistic == pytest.approx(1 / np.sqrt(51 / 90))
    assert round(d.z_statistic, 3) == 1.328
    assert turning_point_test(np.arange(20)).turning_points == 0
    with pytest.raises(InsufficientDataError):
        turning_point_test([0, 1, 0])


def _count_turning_points(seq):
    return sum(
        1
        for i in range(1, len(seq) - 1)
        if (seq[i] > seq[i - 1] and seq[i] > seq[i + 1]) or (seq[i] < seq[i - 1] and seq[i] < seq[i + 1])
    )


@settings(max_examples=200)
@given(st.lists(st.integers(0, 3), min_size=4, max_size=60))
def test_turning_point_invariants(seq):
    d = turning_point_test(seq)
    assert d.turning_points == _count_turning_points(seq)
    assert d.variance > 0
    assert 0.0 <= d.two_sided_p <= 1.0
    assert 0.0 <= d.tie_fraction <= 1.0
