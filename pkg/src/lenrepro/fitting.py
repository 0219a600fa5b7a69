"""Grid-search recovery of a shared prior width and per-condition Weber
fractions from observed (bias, cv) pairs or regression indices.

The search is an exhaustive least-squares scan: for each candidate prior
width, each condition picks the Weber fraction minimizing its own squared
residual; the prior width minimizing the summed residual wins, ties going
to the smaller width.  Fully deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np
from scipy.special import gammaln, ndtr

from .model import (
    GaussianBelief,
    MotorCombination,
    MotorNoiseSpec,
    NoiseModel,
    StimulusSet,
    predict_errors,
    predict_per_stimulus,
    predict_regression_index,
)


class Objective(Enum):
    BIAS_CV = "biascv"
    RI = "ri"


def grid_values(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid, robust to floating-point step error."""
    if step <= 0:
        raise ValueError("grid step must be > 0")
    n = int(math.floor((hi - lo) / step + 0.5)) + 1
    if n < 1:
        raise ValueError(f"empty grid ({lo}, {hi}, {step})")
    # round so accumulated step error cannot spill past hi (0.05*12 > 0.6)
    return np.round(lo + step * np.arange(n), 12)


@dataclass(frozen=True)
class FitConfig:
    """Grid ranges are (min, max, step) inclusive.

    ``trials_per_stimulus``, when set, switches the model table from the
    asymptotic closed forms to the expected value of the empirical
    estimators at that group size (folded-normal mean for the per-stimulus
    bias, small-sample-deflated population sd for the CV).  Use it when the
    observations come from few repetitions per stimulus; with 6 reps the
    raw estimators are biased enough to derail the fit.
    """

    sigma_p_grid: tuple = (0.1, 5.0, 0.05)
    wf_grid: tuple = (0.0, 0.6, 0.005)
    motor: MotorNoiseSpec = MotorNoiseSpec(1.2, MotorCombination.LINEAR_CV)
    objective: Objective = Objective.BIAS_CV
    trials_per_stimulus: int | None = None


@dataclass(frozen=True)
class ObservedErrors:
    """Observed per-condition summaries; leave unused fields as None."""

    bias: float | None = None
    cv: float | None = None
    ri: float | None = None


@dataclass(frozen=True)
class FitResult:
    shared_sigma_p: float
    per_condition_wf: Mapping
    residual: float
    per_condition_residual: Mapping
    per_condition_predicted: Mapping  # label -> (bias, cv, ri)
    residual_landscape: tuple         # of (sigma_p, total_residual)


@dataclass(frozen=True)
class GoodnessReport:
    per_condition_residual: Mapping
    total_residual: float
    equal_wf_sigma_p: float
    equal_wf: float
    equal_wf_residual: float


def _sd_deflation(n: int) -> float:
    """E[population sd] / true sd for n normal samples."""
    return math.sqrt(2.0 / n) * math.exp(gammaln(n / 2) - gammaln((n - 1) / 2))


def _folded_mean(b: float, s: float) -> float:
    """E|X| for X ~ N(b, s): what |group mean - stimulus| estimates."""
    if s == 0:
        return abs(b)
    return s * math.sqrt(2.0 / math.pi) * math.exp(-b * b / (2 * s * s)) + b * (
        1.0 - 2.0 * ndtr(-b / s)
    )


def expected_pipeline_errors(
    noise: NoiseModel,
    prior: GaussianBelief,
    stimuli: StimulusSet,
    motor: MotorNoiseSpec,
    trials_per_stimulus: int,
):
    """Expected (bias, cv) of the empirical estimators at finite group size.

    The per-stimulus bias estimator is the absolute value of a noisy group
    mean, so its expectation is a folded-normal mean; the CV estimator is a
    population sd, deflated by the normal small-sample factor.  The folding
    sd always carries the full response variability (sensory + motor in
    quadrature) because motor noise is in the responses regardless of how
    the CV combination is configured.
    """
    n = trials_per_stimulus
    if n < 2:
        raise ValueError("trials_per_stimulus must be >= 2")
    s_bar = stimuli.mean_stimulus
    per = predict_per_stimulus(noise, prior, stimuli, motor)
    s = np.array([p[0] for p in per])
    means = np.array([p[1] for p in per])
    sds = np.array([p[2] for p in per])
    if motor.combination is MotorCombination.LINEAR_CV:
        full_sd = np.sqrt(sds**2 + motor.sd_cm**2)
    else:
        full_sd = sds
    bias = float(
        np.mean(
            [
                _folded_mean(m - x, f / math.sqrt(n))
                for x, m, f in zip(s, means, full_sd)
            ]
        )
        / s_bar
    )
    defl = _sd_deflation(n)
    cv = float(np.mean(sds) * defl / s_bar)
    if motor.combination is MotorCombination.LINEAR_CV:
        cv += motor.sd_cm / s_bar
    return bias, cv


def _model_table(sigma_p: float, wf_values: np.ndarray, stimuli: StimulusSet,
                 cfg: FitConfig):
    """Model (bias, cv, ri) for every Weber fraction at one prior width."""
    prior = GaussianBelief(stimuli.mean_stimulus, sigma_p)
    bias = np.empty(wf_values.size)
    cv = np.empty(wf_values.size)
    ri = np.empty(wf_values.size)
    for i, wf in enumerate(wf_values):
        noise = NoiseModel.weber(float(wf))
        if cfg.trials_per_stimulus is None:
            bias[i], cv[i], _ = predict_errors(noise, prior, stimuli, cfg.motor)
        else:
            bias[i], cv[i] = expected_pipeline_errors(
                noise, prior, stimuli, cfg.motor, cfg.trials_per_stimulus
            )
        ri[i] = predict_regression_index(noise, prior, stimuli)
    return bias, cv, ri


def _condition_residuals(observed: ObservedErrors, bias, cv, ri,
                         objective: Objective) -> np.ndarray:
    if objective is Objective.BIAS_CV:
        if observed.bias is None or observed.cv is None:
            raise ValueError("BIAS_CV objective needs observed bias and cv")
        return (bias - observed.bias) ** 2 + (cv - observed.cv) ** 2
    if observed.ri is None:
        raise ValueError("RI objective needs an observed regression index")
    return (ri - observed.ri) ** 2


def fit_shared_prior(
    observed: Mapping[str, ObservedErrors],
    stimuli: StimulusSet,
    cfg: FitConfig = FitConfig(),
) -> FitResult:
    """Exhaustive grid fit of one shared prior width + per-condition WFs."""
    if not observed:
        raise ValueError("need at least one condition")
    for label, obs in observed.items():
        for v in (obs.bias, obs.cv, obs.ri):
            if v is not None and not math.isfinite(v):
                raise ValueError(f"non-finite observation for condition {label}")
    sigma_ps = grid_values(*cfg.sigma_p_grid)
    wfs = grid_values(*cfg.wf_grid)
    labels = list(observed)

    landscape = []
    best = None
    for sp in sigma_ps:
        bias, cv, ri = _model_table(float(sp), wfs, stimuli, cfg)
        total = 0.0
        picks = {}
        resids = {}
        for label in labels:
            r = _condition_residuals(observed[label], bias, cv, ri, cfg.objective)
            k = int(np.argmin(r))
            picks[label] = float(wfs[k])
            resids[label] = float(r[k])
            total += float(r[k])
        landscape.append((float(sp), total))
        if best is None or total < best[0]:
            best = (total, float(sp), picks, resids)

    total, sp, picks, resids = best
    prior = GaussianBelief(stimuli.mean_stimulus, sp)
    predicted = {}
    for label in labels:
        noise = NoiseModel.weber(picks[label])
        b, c, _ = predict_errors(noise, prior, stimuli, cfg.motor)
        predicted[label] = (b, c, predict_regression_index(noise, prior, stimuli))
    return FitResult(
        shared_sigma_p=sp,
        per_condition_wf=picks,
        residual=total,
        per_condition_residual=resids,
        per_condition_predicted=predicted,
        residual_landscape=tuple(landscape),
    )


def goodness_of_fit(
    result: FitResult,
    observed: Mapping[str, ObservedErrors],
    stimuli: StimulusSet,
    cfg: FitConfig = FitConfig(),
) -> GoodnessReport:
    """Per-condition residuals plus the constrained equal-WF comparison.

    The constrained fit forces a single Weber fraction across conditions;
    its residual can never beat the unconstrained fit (nested models).
    """
    if set(observed) != set(result.per_condition_wf):
        raise ValueError(
            f"condition labels mismatch: {sorted(observed)} vs "
            f"{sorted(result.per_condition_wf)}"
        )
    sigma_ps = grid_values(*cfg.sigma_p_grid)
    wfs = grid_values(*cfg.wf_grid)
    labels = list(observed)

    best = None
    for sp in sigma_ps:
        bias, cv, ri = _model_table(float(sp), wfs, stimuli, cfg)
        total = np.zeros(wfs.size)
        for label in labels:
            total += _condition_residuals(observed[label], bias, cv, ri, cfg.objective)
        k = int(np.argmin(total))
        if best is None or total[k] < best[0]:
            best = (float(total[k]), float(sp), float(wfs[k]))

    eq_resid, eq_sp, eq_wf = best
    return GoodnessReport(
        per_condition_residual=dict(result.per_condition_residual),
        total_residual=result.residual,
        equal_wf_sigma_p=eq_sp,
        equal_wf=eq_wf,
        equal_wf_residual=eq_resid,
    )


def render_fit_report(result: FitResult, goodness: GoodnessReport | None = None) -> str:
    f = "{:.6f}".format
    lines = ["# shared-prior fit", ""]
    lines.append(f"shared_sigma_p_cm: {f(result.shared_sigma_p)}")
    lines.append(f"total_residual: {f(result.residual)}")
    for label in sorted(result.per_condition_wf):
        b, c, ri = result.per_condition_predicted[label]
        lines.append(
            f"{label}: wf={f(result.per_condition_wf[label])} "
            f"residual={f(result.per_condition_residual[label])} "
            f"pred_bias={f(b)} pred_cv={f(c)} pred_ri={f(ri)}"
        )
    if goodness is not None:
        lines.append("")
        lines.append("## equal-wf constrained fit")
        lines.append(f"sigma_p_cm: {f(goodness.equal_wf_sigma_p)}")
        lines.append(f"wf: {f(goodness.equal_wf)}")
        lines.append(f"residual: {f(goodness.equal_wf_residual)}")
    lines.append("")
    return "\n".join(lines)
