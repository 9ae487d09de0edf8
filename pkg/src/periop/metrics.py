"""Evaluation and accounting metrics for demonstration collections.

Throughput: successful completions per minute, 60 / mean success time, with
trials over the cap (default 180 s) reclassified as failures. The raw success
count is reported alongside since the figure admits both readings.

Normalized cumulative success: the exact mean of the six per-stage cumulative
rates; non-increasing order is expected and merely warned about.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    EmptyInput,
    EmptyStage,
    RateOutOfRange,
    WrongStageCount,
)

STAGE_COUNT = 6
DEFAULT_TIME_CAP_S = 180.0


@dataclass(frozen=True)
class Trial:
    success: bool
    time_s: float

    def __post_init__(self):
        if self.time_s <= 0:
            raise EmptyInput(f"trial time must be > 0, got {self.time_s}")


@dataclass(frozen=True)
class ThroughputReport:
    completions_per_min: float
    successes: int
    failures: int
    reclassified: int          # successes over the cap, counted as failures
    mean_success_s: float | None


def throughput(trials: Sequence[Trial], cap_s: float = DEFAULT_TIME_CAP_S) -> ThroughputReport:
    if not trials:
        raise EmptyInput("no trials")
    reclassified = sum(1 for t in trials if t.success and t.time_s > cap_s)
    ok = [t.time_s for t in trials if t.success and t.time_s <= cap_s]
    failures = len(trials) - len(ok)
    if not ok:
        return ThroughputReport(0.0, 0, failures, reclassified, None)
    mean_s = sum(ok) / len(ok)
    return ThroughputReport(60.0 / mean_s, len(ok), failures, reclassified, mean_s)


def normalized_success(stage_rates: Sequence[float]) -> float:
    """Mean of the six cumulative stage rates, exact."""
    rates = list(stage_rates)
    if len(rates) != STAGE_COUNT:
        raise WrongStageCount(f"expected {STAGE_COUNT} stage rates, got {len(rates)}")
    for r in rates:
        if not 0.0 <= r <= 1.0:
            raise RateOutOfRange(f"stage rate {r} outside [0, 1]")
    if any(b > a for a, b in zip(rates, rates[1:])):
        warnings.warn("stage rates are not non-increasing; cumulative rates "
                      "should satisfy S1 >= S2 >= ... >= S6", stacklevel=2)
    # fsum keeps the mean exactly permutation-invariant
    return math.fsum(rates) / STAGE_COUNT


def format_rate(value: float, sem: float) -> str:
    """Report notation, e.g. 0.513 with SEM 0.032 -> '0.513±0.032'."""
    return f"{value:.3f}±{sem:.3f}"


@dataclass(frozen=True)
class StageStats:
    stage: str
    mean_s: float
    sem_s: float
    n: int
    sem_defined: bool     # False for n = 1 (SEM reported as 0)


def stage_time_stats(per_stage: Mapping[str, Sequence[float]]) -> list[StageStats]:
    """Mean and standard error of the mean per stage; SEM = sample stddev / sqrt(n)."""
    out = []
    for stage, durations in per_stage.items():
        values = list(durations)
        n = len(values)
        if n == 0:
            raise EmptyStage(f"stage {stage!r} has no trials")
        mean = sum(values) / n
        if n == 1:
            out.append(StageStats(stage=stage, mean_s=mean, sem_s=0.0, n=1,
                                  sem_defined=False))
            continue
        var = sum((v - mean) ** 2 for v in values) / (n - 1)
        out.append(StageStats(stage=stage, mean_s=mean,
                              sem_s=math.sqrt(var) / math.sqrt(n), n=n,
                              sem_defined=True))
    return out


@dataclass(frozen=True)
class EvalReport:
    stage_rates: tuple[float, ...]
    normalized: float
    sem: float | None = None
    throughput_per_task: Mapping[str, ThroughputReport] = field(default_factory=dict)
    stage_stats: tuple[StageStats, ...] = ()

    @staticmethod
    def from_rates(stage_rates: Sequence[float], sem: float | None = None,
                   throughput_per_task: Mapping[str, ThroughputReport] | None = None,
                   stage_stats: Sequence[StageStats] = ()) -> "EvalReport":
        return EvalReport(stage_rates=tuple(stage_rates),
                          normalized=normalized_success(stage_rates), sem=sem,
                          throughput_per_task=dict(throughput_per_task or {}),
                          stage_stats=tuple(stage_stats))

    def formatted(self) -> str:
        if self.sem is None:
            return f"{self.normalized:.3f}"
        return format_rate(self.normalized, self.sem)


# -----------------------------------------------------------------------------
# collection accounting
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class EpisodeRecord:
    path: str
    source: str        # "perioperation" | "teleoperation"
    duration_s: float


@dataclass(frozen=True)
class Manifest:
    records: tuple[EpisodeRecord, ...]
    periop_count: int
    teleop_count: int
    periop_minutes: float
    teleop_minutes: float

    @property
    def total_minutes(self) -> float:
        return self.periop_minutes + self.teleop_minutes

    @property
    def total_count(self) -> int:
        return self.periop_count + self.teleop_count


def manifest_from_records(records: Sequence[EpisodeRecord]) -> Manifest:
    periop = [r for r in records if r.source == "perioperation"]
    teleop = [r for r in records if r.source == "teleoperation"]
    return Manifest(records=tuple(records),
                    periop_count=len(periop), teleop_count=len(teleop),
                    periop_minutes=sum(r.duration_s for r in periop) / 60.0,
                    teleop_minutes=sum(r.duration_s for r in teleop) / 60.0)


def mix_manifest(periop: tuple[int, float], teleop: tuple[int, float]) -> Manifest:
    """Accounting fixture: (count, seconds per demo) per source."""
    n1, t1 = periop
    n2, t2 = teleop
    if n1 < 0 or n2 < 0:
        raise EmptyInput("counts must be >= 0")
    records = tuple(
        [EpisodeRecord(path="", source="perioperation", duration_s=t1)] * n1
        + [EpisodeRecord(path="", source="teleoperation", duration_s=t2)] * n2)
    return Manifest(records=records, periop_count=n1, teleop_count=n2,
                    periop_minutes=n1 * t1 / 60.0, teleop_minutes=n2 * t2 / 60.0)


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    """Line-delimited records {path, source, duration_s}."""
    with open(path, "w") as fh:
        for r in manifest.records:
            fh.write(json.dumps({"path": r.path, "source": r.source,
                                 "duration_s": r.duration_s}) + "\n")


def read_manifest(path: str | Path) -> Manifest:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            records.append(EpisodeRecord(path=d["path"], source=d["source"],
                                         duration_s=float(d["duration_s"])))
    return manifest_from_records(records)
