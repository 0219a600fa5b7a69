"""Seeded trial-schedule generation and synthetic observer simulation.

Randomness contract: all sampling uses numpy's PCG64 generator; per
(participant, condition) substreams are derived with SeedSequence from
(master_seed, participant_index, condition_index), so cohort output is
independent of evaluation order and worker count.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import NoiseModel, fusion_weight, sigma_l_at
from .records import TrialRecord


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleConfig:
    """Session layout: 11 lengths 6..14 cm, 6 reps, 3 practice trials."""

    num_lengths: int = 11
    min_length: float = 6.0
    step: float = 0.8
    reps: int = 6
    practice: int = 3
    first_dot_range: tuple = (0.5, 3.5)
    seed: int = 0

    def __post_init__(self):
        if self.num_lengths < 2:
            raise ConfigError("num_lengths must be >= 2")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.step <= 0:
            raise ConfigError("step must be > 0")
        if self.practice < 0:
            raise ConfigError("practice must be >= 0")
        lo, hi = self.first_dot_range
        if not (lo <= hi):
            raise ConfigError("first_dot_range must be (lo, hi) with lo <= hi")
        if self.min_length <= 0:
            raise ConfigError("min_length must be > 0")

    @property
    def lengths(self) -> tuple:
        return tuple(
            self.min_length + self.step * k for k in range(self.num_lengths)
        )

    @property
    def mean_length(self) -> float:
        return self.min_length + self.step * (self.num_lengths - 1) / 2


@dataclass(frozen=True)
class Trial:
    index: int
    nominal_length: float
    first_dot_offset: float
    is_practice: bool


@dataclass(frozen=True)
class ObserverParams:
    """Generative observer: sensory noise, session prior, motor noise."""

    noise: NoiseModel
    prior_mean: float
    prior_sd: float
    motor_sd: float = 0.0
    response_floor: float = 0.0

    def __post_init__(self):
        if self.noise.magnitude > 0 and not (self.prior_sd > 0):
            raise ConfigError("prior_sd must be > 0 when sensory noise is nonzero")
        if self.prior_sd < 0 or self.motor_sd < 0:
            raise ConfigError("prior_sd and motor_sd must be >= 0")


@dataclass(frozen=True)
class DemonstratorNoise:
    """Gaussian imprecision of the presented stimulus around its nominal."""

    sd: float = 0.0

    def __post_init__(self):
        if self.sd < 0:
            raise ConfigError("demonstrator sd must be >= 0")


def generate_schedule(cfg: ScheduleConfig) -> list:
    """Seeded schedule: practice trials first, then a uniform shuffle of
    each length repeated ``reps`` times; first-dot offsets uniform in range.
    """
    rng = np.random.default_rng(cfg.seed)
    lengths = cfg.lengths
    main = np.repeat(lengths, cfg.reps)
    rng.shuffle(main)
    practice = rng.choice(lengths, size=cfg.practice, replace=True)
    lo, hi = cfg.first_dot_range
    n_total = cfg.practice + main.size
    offsets = rng.uniform(lo, hi, size=n_total)
    trials = []
    for i in range(cfg.practice):
        trials.append(Trial(i, float(practice[i]), float(offsets[i]), True))
    for j, nominal in enumerate(main):
        i = cfg.practice + j
        trials.append(Trial(i, float(nominal), float(offsets[i]), False))
    return trials


def simulate_observer(
    schedule: Sequence[Trial],
    obs: ObserverParams,
    demo: DemonstratorNoise = DemonstratorNoise(),
    seed=0,
    participant_id: str = "p01",
    condition: str = "individual",
) -> list:
    """Simulate one session; practice trials are skipped.

    Per trial: actual = nominal + demo noise; a noisy measurement of the
    actual length is fused with the prior (weight evaluated at the actual
    length); motor noise is added to the fused estimate and the response
    is clamped at the floor.
    """
    rng = np.random.default_rng(seed)
    main = [t for t in schedule if not t.is_practice]
    nominal = np.array([t.nominal_length for t in main])
    n = nominal.size
    actual = nominal + rng.normal(0.0, 1.0, n) * demo.sd
    actual = np.maximum(actual, 1e-9)
    sig_l = np.array([sigma_l_at(obs.noise, a) for a in actual])
    m = actual + rng.normal(0.0, 1.0, n) * sig_l
    w = np.array([fusion_weight(sl, obs.prior_sd) for sl in sig_l])
    estimate = w * m + (1.0 - w) * obs.prior_mean
    response = estimate + rng.normal(0.0, 1.0, n) * obs.motor_sd
    response = np.maximum(response, obs.response_floor)
    return [
        TrialRecord(
            participant_id=participant_id,
            condition=condition,
            trial_index=t.index,
            nominal_length=t.nominal_length,
            actual_length=float(actual[k]),
            response=float(response[k]),
        )
        for k, t in enumerate(main)
    ]


def _session_seed(master_seed: int, p_idx: int, c_idx: int, stream: int) -> int:
    ss = np.random.SeedSequence([master_seed, p_idx, c_idx, stream])
    return int(ss.generate_state(1)[0])


def _one_session(args):
    master_seed, p_idx, pid, c_idx, label, params, cfg, demo = args
    sched_cfg = dataclasses.replace(cfg, seed=_session_seed(master_seed, p_idx, c_idx, 0))
    schedule = generate_schedule(sched_cfg)
    return simulate_observer(
        schedule,
        params,
        demo,
        seed=_session_seed(master_seed, p_idx, c_idx, 1),
        participant_id=pid,
        condition=label,
    )


def simulate_cohort(
    n_participants: int,
    condition_params: Mapping[str, ObserverParams],
    cfg: ScheduleConfig = ScheduleConfig(),
    demo: DemonstratorNoise = DemonstratorNoise(),
    master_seed: int = 0,
    workers: int = 1,
) -> list:
    """Simulate a cohort; output is identical for any worker count.

    ``condition_params`` maps condition label -> ObserverParams; condition
    index follows insertion order.  Accepts a sequence of (label, params)
    pairs too, in which case duplicate labels are rejected.
    """
    if n_participants < 1:
        raise ConfigError("n_participants must be >= 1")
    if not isinstance(condition_params, Mapping):
        pairs = list(condition_params)
        labels = [label for label, _ in pairs]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate condition labels in {labels}")
        condition_params = dict(pairs)
    if not condition_params:
        raise ConfigError("need at least one condition")

    width = max(2, len(str(n_participants)))
    jobs = []
    for p_idx in range(n_participants):
        pid = f"p{p_idx + 1:0{width}d}"
        for c_idx, (label, params) in enumerate(condition_params.items()):
            jobs.append((master_seed, p_idx, pid, c_idx, label, params, cfg, demo))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sessions = list(pool.map(_one_session, jobs))
    else:
        sessions = [_one_session(j) for j in jobs]

    records = []
    for session in sessions:
        records.extend(session)
    return records
