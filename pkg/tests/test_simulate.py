"""Schedule generation and synthetic observer sessions."""
import math
from collections import Counter

import numpy as np
import pytest

from lenrepro.model import NoiseModel
from lenrepro.simulate import (
    ConfigError,
    DemonstratorNoise,
    ObserverParams,
    ScheduleConfig,
    Trial,
    generate_schedule,
    simulate_cohort,
    simulate_observer,
)


class TestScheduleConfig:
    def test_default_lengths(self):
        cfg = ScheduleConfig()
        assert len(cfg.lengths) == 11
        assert cfg.lengths[0] == 6.0
        assert cfg.lengths[-1] == pytest.approx(14.0)
        assert cfg.mean_length == pytest.approx(10.0)

    @pytest.mark.parametrize("kwargs", [
        {"num_lengths": 1},
        {"reps": 0},
        {"step": 0.0},
        {"practice": -1},
        {"first_dot_range": (3.5, 0.5)},
        {"min_length": 0.0},
    ])
    def test_invalid_configs(self, kwargs):
        with pytest.raises(ConfigError):
            ScheduleConfig(**kwargs)


class TestGenerateSchedule:
    def test_counts_and_balance(self):
        trials = generate_schedule(ScheduleConfig(seed=42))
        assert len(trials) == 69
        practice = [t for t in trials if t.is_practice]
        main = [t for t in trials if not t.is_practice]
        assert len(practice) == 3
        assert len(main) == 66
        counts = Counter(t.nominal_length for t in main)
        assert len(counts) == 11
        assert set(counts.values()) == {6}

    def test_practice_first_and_indices_sequential(self):
        trials = generate_schedule(ScheduleConfig(seed=0))
        assert [t.index for t in trials] == list(range(69))
        assert all(t.is_practice for t in trials[:3])
        assert not any(t.is_practice for t in trials[3:])

    def test_offsets_within_range(self):
        cfg = ScheduleConfig(seed=5, first_dot_range=(0.5, 3.5))
        for t in generate_schedule(cfg):
            assert 0.5 <= t.first_dot_offset <= 3.5

    def test_deterministic_and_seed_sensitive(self):
        a = generate_schedule(ScheduleConfig(seed=7))
        b = generate_schedule(ScheduleConfig(seed=7))
        c = generate_schedule(ScheduleConfig(seed=8))
        assert a == b
        assert a != c

    def test_shuffle_actually_mixes(self):
        main = [t.nominal_length for t in generate_schedule(ScheduleConfig(seed=1))
                if not t.is_practice]
        blocked = list(np.repeat(ScheduleConfig().lengths, 6))
        assert main != blocked


def _flat_schedule(nominal: float, n: int) -> list:
    return [Trial(i, nominal, 1.0, False) for i in range(n)]


class TestSimulateObserver:
    def test_zero_noise_identity(self):
        sched = generate_schedule(ScheduleConfig(seed=3))
        obs = ObserverParams(NoiseModel.weber(0.0), 10.0, 1.5)
        recs = simulate_observer(sched, obs, seed=11)
        assert len(recs) == 66
        for r in recs:
            assert r.response == r.nominal_length
            assert r.actual_length == r.nominal_length

    def test_practice_trials_excluded(self):
        sched = generate_schedule(ScheduleConfig(seed=3))
        obs = ObserverParams(NoiseModel.weber(0.0), 10.0, 1.5)
        recs = simulate_observer(sched, obs, seed=11)
        assert min(r.trial_index for r in recs) == 3

    def test_mean_response_matches_fusion(self):
        # constant noise 1, prior (10, 2) at stimulus 6: fused mean 6.8
        sched = _flat_schedule(6.0, 100_000)
        obs = ObserverParams(NoiseModel.constant(1.0), 10.0, 2.0)
        recs = simulate_observer(sched, obs, seed=99)
        mean = float(np.mean([r.response for r in recs]))
        assert abs(mean - 6.8) < 0.02

    def test_response_sd_matches_quadrature(self):
        # weber 0.15, prior sd 1.5, motor 1.2 at s=10:
        # w = 2.25/4.5 = 0.5, sd = sqrt((0.5*1.5)^2 + 1.2^2) = sqrt(2.0025)
        sched = _flat_schedule(10.0, 100_000)
        obs = ObserverParams(NoiseModel.weber(0.15), 10.0, 1.5, motor_sd=1.2)
        recs = simulate_observer(sched, obs, seed=17)
        sd = float(np.std([r.response for r in recs]))
        assert abs(sd - math.sqrt(2.0025)) < 0.02

    def test_demonstrator_noise_moves_actuals(self):
        sched = _flat_schedule(10.0, 10_000)
        obs = ObserverParams(NoiseModel.weber(0.0), 10.0, 1.5)
        recs = simulate_observer(sched, obs, DemonstratorNoise(0.3), seed=4)
        actuals = np.array([r.actual_length for r in recs])
        assert abs(actuals.std() - 0.3) < 0.01
        assert abs(actuals.mean() - 10.0) < 0.02
        # perfect observer reproduces the actual, not the nominal
        assert all(r.response == r.actual_length for r in recs)

    def test_response_floor(self):
        sched = _flat_schedule(6.0, 5000)
        obs = ObserverParams(NoiseModel.weber(0.3), 10.0, 1.5,
                             motor_sd=6.0, response_floor=0.0)
        recs = simulate_observer(sched, obs, seed=21)
        assert min(r.response for r in recs) >= 0.0

    def test_invalid_observer_params(self):
        with pytest.raises(ConfigError):
            ObserverParams(NoiseModel.weber(0.2), 10.0, 0.0)
        with pytest.raises(ConfigError):
            ObserverParams(NoiseModel.weber(0.1), 10.0, 1.5, motor_sd=-1)
        with pytest.raises(ConfigError):
            DemonstratorNoise(-0.1)


class TestSimulateCohort:
    PARAMS = {
        "individual": ObserverParams(NoiseModel.weber(0.3), 10.0, 1.5, 1.2),
        "mechanical": ObserverParams(NoiseModel.weber(0.18), 10.0, 1.5, 1.2),
        "social": ObserverParams(NoiseModel.weber(0.14), 10.0, 1.5, 1.2),
    }

    def test_shape_and_ids(self):
        recs = simulate_cohort(25, self.PARAMS, master_seed=1)
        assert len(recs) == 25 * 3 * 66
        pids = sorted({r.participant_id for r in recs})
        assert len(pids) == 25
        assert pids[0] == "p01" and pids[-1] == "p25"
        per_session = Counter((r.participant_id, r.condition) for r in recs)
        assert set(per_session.values()) == {66}

    def test_worker_count_irrelevant(self):
        one = simulate_cohort(4, self.PARAMS, master_seed=5, workers=1)
        two = simulate_cohort(4, self.PARAMS, master_seed=5, workers=4)
        assert one == two

    def test_sessions_use_distinct_streams(self):
        recs = simulate_cohort(2, self.PARAMS, master_seed=0)
        by_session = {}
        for r in recs:
            by_session.setdefault((r.participant_id, r.condition), []).append(r.response)
        responses = [tuple(v) for v in by_session.values()]
        assert len(set(responses)) == len(responses)

    def test_master_seed_changes_output(self):
        a = simulate_cohort(2, self.PARAMS, master_seed=0)
        b = simulate_cohort(2, self.PARAMS, master_seed=1)
        assert a != b

    def test_pairs_accepted_duplicates_rejected(self):
        pairs = list(self.PARAMS.items())
        recs = simulate_cohort(2, pairs, master_seed=9)
        assert recs == simulate_cohort(2, dict(pairs), master_seed=9)
        with pytest.raises(ConfigError):
            simulate_cohort(2, pairs + pairs[:1], master_seed=9)

    def test_empty_inputs_rejected(self):
        with pytest.raises(ConfigError):
            simulate_cohort(0, self.PARAMS)
        with pytest.raises(ConfigError):
            simulate_cohort(2, {})
