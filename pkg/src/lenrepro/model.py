"""Closed-form Bayesian observer for length reproduction.

Perception of each stimulus is a precision-weighted fusion of a Gaussian
sensory likelihood (sd scales with the stimulus under Weber noise) and a
Gaussian prior over the session's stimulus range.  Everything here is a
deterministic closed form or a deterministic numeric inversion of one;
the stochastic trial-level counterpart lives in :mod:`lenrepro.simulate`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np


class DegenerateFusionError(ValueError):
    """Both inputs are delta functions at different locations."""


class BracketError(ValueError):
    """Inversion target lies outside the achievable range on the bracket."""


@dataclass(frozen=True)
class GaussianBelief:
    """A 1-D Gaussian over length (cm); sd == 0 denotes a delta function."""

    mean: float
    sd: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean}")
        if not (self.sd >= 0):
            raise ValueError(f"sd must be >= 0, got {self.sd}")


class NoiseMode(Enum):
    WEBER = "weber"
    CONSTANT = "constant"


# Weber fractions above this are allowed but unusual for length perception;
# we warn instead of rejecting.
WEBER_SWEEP_MAX = 0.6


@dataclass(frozen=True)
class NoiseModel:
    """Sensory noise: sd = magnitude * stimulus (Weber) or magnitude cm."""

    mode: NoiseMode
    magnitude: float

    def __post_init__(self):
        if not (self.magnitude >= 0):
            raise ValueError(f"magnitude must be >= 0, got {self.magnitude}")
        if self.mode is NoiseMode.WEBER and self.magnitude > WEBER_SWEEP_MAX:
            warnings.warn(
                f"Weber fraction {self.magnitude} is outside the usual "
                f"[0, {WEBER_SWEEP_MAX}] sweep range",
                stacklevel=2,
            )

    @classmethod
    def weber(cls, fraction: float) -> "NoiseModel":
        return cls(NoiseMode.WEBER, fraction)

    @classmethod
    def constant(cls, sd_cm: float) -> "NoiseModel":
        return cls(NoiseMode.CONSTANT, sd_cm)


@dataclass(frozen=True)
class StimulusSet:
    """Ordered stimulus lengths (cm) plus their arithmetic mean."""

    lengths: tuple

    def __post_init__(self):
        # A singleton set supports the error predictions; regression-index
        # operations additionally require >= 2 distinct lengths.
        if len(self.lengths) < 1:
            raise ValueError("need at least 1 stimulus length")
        if any(s <= 0 for s in self.lengths):
            raise ValueError("stimulus lengths must be > 0")
        object.__setattr__(self, "lengths", tuple(float(s) for s in self.lengths))

    @property
    def mean_stimulus(self) -> float:
        # fsum keeps symmetric sets exact (the default set averages to 10.0).
        return math.fsum(self.lengths) / len(self.lengths)

    @classmethod
    def linspace(cls, lo: float, hi: float, n: int) -> "StimulusSet":
        return cls(tuple(np.linspace(lo, hi, n)))


#: 11 lengths from 6 cm to 14 cm in 0.8 cm steps, mean 10 cm.
DEFAULT_STIMULI = StimulusSet.linspace(6.0, 14.0, 11)


class MotorCombination(Enum):
    """How the non-sensory motor constant enters the predicted variability.

    QUADRATURE folds it into each per-stimulus response sd (independent
    noises add in variance; matches the generative simulator exactly).
    LINEAR_CV keeps per-stimulus sds sensory-only and adds sd/mean-stimulus
    to the session CV after averaging.
    """

    QUADRATURE = "quadrature"
    LINEAR_CV = "linear_cv"


@dataclass(frozen=True)
class MotorNoiseSpec:
    sd_cm: float
    combination: MotorCombination = MotorCombination.LINEAR_CV

    def __post_init__(self):
        if not (self.sd_cm >= 0):
            raise ValueError(f"sd_cm must be >= 0, got {self.sd_cm}")


NO_MOTOR_NOISE = MotorNoiseSpec(0.0, MotorCombination.QUADRATURE)


@dataclass(frozen=True)
class ModelPrediction:
    """Per-stimulus predictions plus the derived summary quantities."""

    per_stimulus: tuple  # of (stimulus, mean_response, response_sd)
    regression_index: float
    bias_norm: float
    cv_norm: float
    rmse_norm: float


def fuse_gaussians(a: GaussianBelief, b: GaussianBelief) -> GaussianBelief:
    """Product of two Gaussians, renormalized (precision-weighted fusion).

    mean = (sb^2*ma + sa^2*mb)/(sa^2+sb^2), var = sa^2*sb^2/(sa^2+sb^2).
    A zero-sd input dominates; two zero-sd inputs at different means are
    contradictory and raise :class:`DegenerateFusionError`.
    """
    if a.sd == 0 and b.sd == 0:
        if a.mean == b.mean:
            return GaussianBelief(a.mean, 0.0)
        raise DegenerateFusionError(
            f"cannot fuse two delta functions at {a.mean} and {b.mean}"
        )
    if a.sd == 0:
        return GaussianBelief(a.mean, 0.0)
    if b.sd == 0:
        return GaussianBelief(b.mean, 0.0)
    va, vb = a.sd**2, b.sd**2
    mean = (vb * a.mean + va * b.mean) / (va + vb)
    sd = math.sqrt(va * vb / (va + vb))
    return GaussianBelief(mean, sd)


def sigma_l_at(noise: NoiseModel, stimulus: float) -> float:
    """Sensory sd (cm) at a given stimulus length."""
    if stimulus <= 0:
        raise ValueError(f"stimulus must be > 0, got {stimulus}")
    if noise.mode is NoiseMode.WEBER:
        return noise.magnitude * stimulus
    return noise.magnitude


def fusion_weight(sigma_l: float, sigma_p: float) -> float:
    """Weight on the sensory measurement; the prior gets 1 - weight.

    A noiseless likelihood dominates regardless of the prior width.
    """
    if sigma_l == 0:
        return 1.0
    if sigma_p == 0:
        return 0.0
    return sigma_p**2 / (sigma_p**2 + sigma_l**2)


def _per_stimulus_arrays(noise, prior, stimuli):
    s = np.asarray(stimuli.lengths)
    sig_l = np.array([sigma_l_at(noise, x) for x in s])
    w = np.array([fusion_weight(sl, prior.sd) for sl in sig_l])
    means = w * s + (1.0 - w) * prior.mean
    return s, sig_l, w, means


def predict_per_stimulus(
    noise: NoiseModel,
    prior: GaussianBelief,
    stimuli: StimulusSet,
    motor: MotorNoiseSpec = NO_MOTOR_NOISE,
):
    """Predicted (stimulus, mean response, response sd) per stimulus.

    The fusion weight is evaluated at the true stimulus, so the predicted
    mean is exactly w*s + (1-w)*prior_mean.  Under QUADRATURE the motor
    constant enters each response sd; under LINEAR_CV the sds here are
    sensory-only and the motor term is applied by :func:`predict_errors`.
    """
    s, sig_l, w, means = _per_stimulus_arrays(noise, prior, stimuli)
    sens_sd = w * sig_l
    if motor.combination is MotorCombination.QUADRATURE:
        sd = np.sqrt(sens_sd**2 + motor.sd_cm**2)
    else:
        sd = sens_sd
    return tuple(zip(s.tolist(), means.tolist(), sd.tolist()))


def _ols_slope(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom == 0:
        raise ValueError("degenerate regressor: all x values identical")
    return float(np.dot(xc, y - y.mean()) / denom)


def predict_regression_index(
    noise: NoiseModel, prior: GaussianBelief, stimuli: StimulusSet
) -> float:
    """1 minus the OLS slope of predicted mean responses on the stimuli.

    Uses the same estimator as the empirical pipeline; under constant
    noise the predicted means are exactly linear in the stimulus and the
    index reduces to sigma_l^2 / (sigma_l^2 + sigma_p^2).
    """
    s, _, _, means = _per_stimulus_arrays(noise, prior, stimuli)
    return 1.0 - _ols_slope(s, means)


def predict_errors(
    noise: NoiseModel,
    prior: GaussianBelief,
    stimuli: StimulusSet,
    motor: MotorNoiseSpec = NO_MOTOR_NOISE,
):
    """Normalized (bias, cv, rmse) averaged over the stimulus set.

    bias = mean |predicted mean - s| / mean stimulus; cv = mean response
    sd / mean stimulus.  Under LINEAR_CV the motor term sd/mean-stimulus
    is added to the cv after averaging; under QUADRATURE it is already
    inside each per-stimulus sd.
    """
    s_bar = stimuli.mean_stimulus
    per = predict_per_stimulus(noise, prior, stimuli, motor)
    s = np.array([p[0] for p in per])
    means = np.array([p[1] for p in per])
    sds = np.array([p[2] for p in per])
    bias = float(np.mean(np.abs(means - s)) / s_bar)
    cv = float(np.mean(sds) / s_bar)
    if motor.combination is MotorCombination.LINEAR_CV:
        cv += motor.sd_cm / s_bar
    rmse = math.hypot(bias, cv)
    return bias, cv, rmse


def predict(
    noise: NoiseModel,
    prior: GaussianBelief,
    stimuli: StimulusSet,
    motor: MotorNoiseSpec = NO_MOTOR_NOISE,
) -> ModelPrediction:
    """Full model prediction for one observer configuration."""
    per = predict_per_stimulus(noise, prior, stimuli, motor)
    bias, cv, rmse = predict_errors(noise, prior, stimuli, motor)
    ri = predict_regression_index(noise, prior, stimuli)
    return ModelPrediction(per, ri, bias, cv, rmse)


def _session_prior(prior_sd: float, stimuli: StimulusSet) -> GaussianBelief:
    # The session prior sits on the mean stimulus.
    return GaussianBelief(stimuli.mean_stimulus, prior_sd)


def error_curve(
    prior_sd: float,
    wf_grid: Sequence[float],
    stimuli: StimulusSet = DEFAULT_STIMULI,
    motor: MotorNoiseSpec = MotorNoiseSpec(1.2),
):
    """(wf, bias, cv) along a Weber-fraction sweep at fixed prior width."""
    if len(wf_grid) == 0:
        raise ValueError("wf_grid must be nonempty")
    prior = _session_prior(prior_sd, stimuli)
    out = []
    for wf in wf_grid:
        bias, cv, _ = predict_errors(NoiseModel.weber(wf), prior, stimuli, motor)
        out.append((float(wf), bias, cv))
    return out


def ri_curve(
    prior_sd: float,
    wf_grid: Sequence[float],
    stimuli: StimulusSet = DEFAULT_STIMULI,
):
    """(wf, regression index) along a Weber-fraction sweep."""
    if len(wf_grid) == 0:
        raise ValueError("wf_grid must be nonempty")
    prior = _session_prior(prior_sd, stimuli)
    return [
        (float(wf), predict_regression_index(NoiseModel.weber(wf), prior, stimuli))
        for wf in wf_grid
    ]


def wf_from_ri(
    target_ri: float,
    prior_sd: float,
    stimuli: StimulusSet = DEFAULT_STIMULI,
) -> float:
    """Invert the regression index for the Weber fraction by bisection.

    The index is strictly increasing in the Weber fraction at fixed prior
    width, 0 at wf=0 and approaching 1 from below; the returned wf
    round-trips through :func:`predict_regression_index` to within 1e-9.
    """
    if not (0 <= target_ri < 1):
        raise ValueError(f"target_ri must be in [0, 1), got {target_ri}")
    if not (prior_sd > 0):
        raise ValueError(f"prior_sd must be > 0, got {prior_sd}")
    if target_ri == 0:
        return 0.0
    prior = _session_prior(prior_sd, stimuli)

    def ri(wf):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # bracketing may probe wf > 0.6
            noise = NoiseModel.weber(wf)
        return predict_regression_index(noise, prior, stimuli)

    lo, hi = 0.0, 1.0
    while ri(hi) < target_ri:
        hi *= 2.0
        if hi > 1e9:
            raise BracketError(
                f"target {target_ri} unreachable: achievable range is "
                f"[0, {ri(1e9):.12f}) on the bracket"
            )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ri(mid) < target_ri:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def sigma_p_from_ri(
    target_ri: float,
    noise: NoiseModel,
    stimuli: StimulusSet = DEFAULT_STIMULI,
    prior_mean: float | None = None,
    bracket=(1e-3, 1e3),
) -> float:
    """Invert the regression index for the prior width at fixed noise.

    The index is strictly decreasing in the prior width when the sensory
    noise is nonzero; bisection on ``bracket`` (cm).
    """
    lo, hi = bracket
    mean = stimuli.mean_stimulus if prior_mean is None else prior_mean

    def ri(sp):
        return predict_regression_index(noise, GaussianBelief(mean, sp), stimuli)

    ri_hi, ri_lo = ri(lo), ri(hi)  # ri_hi at the narrow-prior end
    if not (ri_lo <= target_ri <= ri_hi):
        raise BracketError(
            f"target {target_ri} unreachable: achievable range is "
            f"[{ri_lo:.12f}, {ri_hi:.12f}] on the bracket"
        )
    for _ in range(200):
        mid = math.sqrt(lo * hi)  # log-scale bisection over 6 decades
        if ri(mid) > target_ri:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return math.sqrt(lo * hi)


def rmse_surface(
    wf_grid: Sequence[float],
    ri_grid: Sequence[float],
    stimuli: StimulusSet = DEFAULT_STIMULI,
    motor: MotorNoiseSpec = MotorNoiseSpec(1.2),
    prior_mean: float | None = None,
) -> np.ndarray:
    """Normalized RMSE over a (wf, ri) grid; shape (len(wf), len(ri)).

    Each cell inverts its ri for the prior width at that wf, computes the
    normalized rmse, and each wf-slice is then divided by its own minimum,
    so every defined cell is >= 1 and each slice attains 1.  Cells whose
    ri is unreachable at that wf (e.g. ri > 0 with wf = 0) are NaN.
    """
    if len(wf_grid) == 0 or len(ri_grid) == 0:
        raise ValueError("grids must be nonempty")
    if any(not (0 <= r < 1) for r in ri_grid):
        raise ValueError("ri_grid values must lie in [0, 1)")
    mean = stimuli.mean_stimulus if prior_mean is None else prior_mean
    out = np.full((len(wf_grid), len(ri_grid)), np.nan)
    for i, wf in enumerate(wf_grid):
        noise = NoiseModel.weber(wf)
        for j, ri in enumerate(ri_grid):
            if wf == 0:
                if ri == 0:
                    # Prior width is unidentified at wf=0; rmse is motor-only
                    # and independent of it.
                    _, _, out[i, j] = predict_errors(
                        noise, GaussianBelief(mean, 1.0), stimuli, motor
                    )
                continue
            try:
                sp = sigma_p_from_ri(ri, noise, stimuli, prior_mean=mean)
            except BracketError:
                continue
            _, _, out[i, j] = predict_errors(
                noise, GaussianBelief(mean, sp), stimuli, motor
            )
        if not np.all(np.isnan(out[i])):
            lo = np.nanmin(out[i])
            if lo > 0:
                out[i] /= lo
            else:
                # a zero-minimum slice (no noise at all) still attains 1
                defined = ~np.isnan(out[i])
                out[i][defined] = np.where(out[i][defined] == lo, 1.0, np.inf)
    return out
