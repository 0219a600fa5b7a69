"""Trial record type and its CSV wire format.

The CSV contract is bit-exact: UTF-8, ``.`` decimal separator, LF line
endings, header ``participant_id,condition,trial_index,nominal_length_cm,
actual_length_cm,response_cm``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

TRIAL_CSV_HEADER = (
    "participant_id",
    "condition",
    "trial_index",
    "nominal_length_cm",
    "actual_length_cm",
    "response_cm",
)

FLOAT_FMT = "{:.6f}"


@dataclass(frozen=True)
class TrialRecord:
    """One reproduction trial."""

    participant_id: str
    condition: str
    trial_index: int
    nominal_length: float  # cm
    actual_length: float   # cm, as actually presented
    response: float        # cm

    def __post_init__(self):
        # raw responses are nonnegative, but debiasing may shift a record's
        # response below zero, so only finiteness is enforced here
        if not math.isfinite(self.response):
            raise ValueError(f"response must be finite, got {self.response}")
        if self.actual_length <= 0:
            raise ValueError(
                f"actual_length must be > 0, got {self.actual_length}"
            )


def format_trial_row(rec: TrialRecord) -> str:
    return ",".join(
        (
            rec.participant_id,
            rec.condition,
            str(rec.trial_index),
            FLOAT_FMT.format(rec.nominal_length),
            FLOAT_FMT.format(rec.actual_length),
            FLOAT_FMT.format(rec.response),
        )
    )


def write_trial_csv(records: Iterable[TrialRecord], path: str | Path) -> None:
    """Write records in the bit-exact CSV contract (LF, 6-decimal floats)."""
    lines = [",".join(TRIAL_CSV_HEADER)]
    lines.extend(format_trial_row(r) for r in records)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
