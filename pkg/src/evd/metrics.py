"""Classification metrics, threshold sweeps and reduction-rate computation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricValue:
    value: float
    zero_denominator: bool = False


def precision(counts: ConfusionCounts) -> MetricValue:
    denom = counts.tp + counts.fp
    if denom == 0:
        return MetricValue(0.0, zero_denominator=True)
    return MetricValue(counts.tp / denom)


def recall(counts: ConfusionCounts) -> MetricValue:
    denom = counts.tp + counts.fn
    if denom == 0:
        return MetricValue(0.0, zero_denominator=True)
    return MetricValue(counts.tp / denom)


def f1(p: float, r: float) -> float:
    """Harmonic mean of precision and recall."""
    if p == 0.0 and r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def confusion_from_scores(scored: list[tuple[float, bool]], threshold: float) -> ConfusionCounts:
    """scored: (score, is_vulnerable) pairs; positive means score >= threshold."""
    tp = fp = tn = fn = 0
    for value, vulnerable in scored:
        positive = value >= threshold
        if positive and vulnerable:
            tp += 1
        elif positive:
            fp += 1
        elif vulnerable:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    recall: float
    positive_rate: float

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if not (0.0 <= self.recall <= 1.0 and 0.0 <= self.positive_rate <= 1.0):
            raise ValueError("recall and positive rate must lie in [0, 1]")


def sweep(scored: list[tuple[float, bool]], thresholds: list[float]) -> list[SweepPoint]:
    """Recall and positive rate at each threshold; thresholds must ascend."""
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise MetricsError("thresholds must be sorted ascending")
    points = []
    total = len(scored)
    n_vuln = sum(1 for _, v in scored if v)
    for t in thresholds:
        positives = sum(1 for s, _ in scored if s >= t)
        tp = sum(1 for s, v in scored if v and s >= t)
        points.append(
            SweepPoint(
                threshold=t,
                recall=tp / n_vuln if n_vuln else 0.0,
                positive_rate=positives / total if total else 0.0,
            )
        )
    return points


def threshold_for_positive_rate(
    scored: list[tuple[float, bool]], target_rate: float
) -> float:
    """Smallest calibration-set score whose positive rate does not exceed the
    target; used to pin the serving default to e.g. a 1% positive rate."""
    if not scored:
        raise MetricsError("cannot calibrate a threshold on an empty score set")
    values = sorted((s for s, _ in scored), reverse=True)
    allowed = int(target_rate * len(values))
    if allowed >= len(values):
        return 0.0
    return min(values[allowed] + 1e-12, 1.0)


@dataclass(frozen=True)
class ScenarioCounts:
    valid_scenarios: int
    vulnerable_scenarios: int

    def __post_init__(self):
        if not 0 <= self.vulnerable_scenarios <= self.valid_scenarios:
            raise ValueError("vulnerable count must lie in [0, valid count]")

    @property
    def rate(self) -> float:
        if self.valid_scenarios == 0:
            return 0.0
        return self.vulnerable_scenarios / self.valid_scenarios


def reduction_rate(before: ScenarioCounts, after: ScenarioCounts) -> float:
    """1 - (after rate / before rate), on unrounded ratios."""
    if before.valid_scenarios <= 0 or after.valid_scenarios <= 0:
        raise MetricsError("both arms need at least one valid scenario")
    if before.vulnerable_scenarios == 0:
        raise MetricsError("reduction rate undefined: no vulnerabilities before filtering")
    return 1.0 - after.rate / before.rate


@dataclass
class EvalReport:
    """Serializable report: headline metrics, sweep curve, per-CWE breakdown."""

    config: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    sweep_points: list[dict] = field(default_factory=list)
    per_cwe: dict = field(default_factory=dict)
    scenario_rows: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path: str | Path):
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def evaluate_scored(scored: list[tuple[float, bool]], threshold: float) -> EvalReport:
    counts = confusion_from_scores(scored, threshold)
    p = precision(counts)
    r = recall(counts)
    return EvalReport(
        config={"threshold": threshold},
        counts={"tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.fn},
        precision=p.value,
        recall=r.value,
        f1=f1(p.value, r.value),
    )
