"""Quality under inference-time thresholds.

A latency threshold tags each round's results valid (latency <= threshold)
or invalid; invalid results are scored as errors by the quality metric.
Evaluating every recorded round yields a per-round quality series whose
minimum is the worst-case tail quality at that threshold.

Metrics return percent in [0, 100]. Batch units propagate their single
round latency flag to every member instance, while members keep individual
correctness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from tailq.errors import ConfigError, TraceError
from tailq.trace import InstanceMeta, TimingStore, pooled_latencies


@dataclass(frozen=True)
class ThresholdSpec:
    """Absolute deadline in ms, or a percentile of pooled latencies
    (resolved by nearest rank)."""

    kind: str  # "absolute_ms" | "percentile"
    value: float

    def __post_init__(self) -> None:
        if self.kind not in ("absolute_ms", "percentile"):
            raise ConfigError(f"unknown threshold kind {self.kind!r}")
        if self.kind == "absolute_ms" and not self.value > 0:
            raise ConfigError("absolute threshold must be > 0")
        if self.kind == "percentile" and not 0 < self.value <= 100:
            raise ConfigError("percentile must be in (0, 100]")

    @classmethod
    def parse(cls, text: str) -> "ThresholdSpec":
        """Accepts "@99" (percentile), "472.41ms" / "472.41" (absolute ms),
        or "inf"."""
        t = text.strip()
        try:
            if t.startswith("@"):
                return cls("percentile", float(t[1:]))
            if t.lower() in ("inf", "+inf", "infinity"):
                return cls("absolute_ms", math.inf)
            if t.endswith("ms"):
                return cls("absolute_ms", float(t[:-2]))
            return cls("absolute_ms", float(t))
        except ValueError:
            raise ConfigError(f"cannot parse threshold {text!r}") from None

    def label(self) -> str:
        if self.kind == "percentile":
            return f"p{self.value:g}"
        if math.isinf(self.value):
            return "inf"
        return f"{self.value:g}ms"


@dataclass(frozen=True)
class QualityMetric:
    """Maps per-instance (contribution, validity) sets to percent quality.

    The callable receives the instances and a same-length validity flag
    list; invalid instances must be scored as errors so that an all-valid
    set reproduces the unconstrained metric.
    """

    name: str
    fn: Callable[[Sequence[InstanceMeta], Sequence[bool]], float]

    def __call__(self, instances: Sequence[InstanceMeta], flags: Sequence[bool]) -> float:
        return self.fn(instances, flags)


def _accuracy(instances: Sequence[InstanceMeta], flags: Sequence[bool]) -> float:
    total = sum(m.contribution for m, ok in zip(instances, flags) if ok)
    return 100.0 * total / len(instances)


def _macro_f1(instances: Sequence[InstanceMeta], flags: Sequence[bool]) -> float:
    # Macro average over per-instance truth classes plus, when any result
    # timed out, the reserved invalid class those results are assigned to
    # (its own F1 is 0, and the affected truth classes lose both precision
    # and recall).
    total = sum(m.contribution for m, ok in zip(instances, flags) if ok)
    classes = len(instances) + (1 if not all(flags) else 0)
    return 100.0 * total / classes


ACCURACY = QualityMetric("accuracy", _accuracy)
MACRO_F1 = QualityMetric("macro_f1", _macro_f1)

_METRICS = {"accuracy": ACCURACY, "macro_f1": MACRO_F1}


def get_metric(name: str) -> QualityMetric:
    try:
        return _METRICS[name]
    except KeyError:
        raise ConfigError(f"unknown metric {name!r}; expected one of {sorted(_METRICS)}") from None


@dataclass(frozen=True)
class TailQualityResult:
    threshold_ms: float
    per_round_quality: list[float]
    worst_case: float
    best_case: float
    origin_quality: float
    metric: str

    def to_dict(self) -> dict:
        return {
            "threshold_ms": self.threshold_ms,
            "metric": self.metric,
            "per_round_quality": self.per_round_quality,
            "worst_case": self.worst_case,
            "best_case": self.best_case,
            "origin_quality": self.origin_quality,
        }


def resolve_threshold(spec: ThresholdSpec, store: TimingStore) -> float:
    """Absolute thresholds pass through; percentile p resolves to the pooled
    latency at nearest rank ceil(p/100 * N), 1-based."""
    if spec.kind == "absolute_ms":
        return spec.value
    pooled = pooled_latencies(store)
    rank = math.ceil(spec.value / 100.0 * len(pooled))
    return pooled[max(rank, 1) - 1]


def tag_validity(store: TimingStore, round_index: int, theta_ms: float) -> list[bool]:
    """Per-instance validity flags for one round: latency <= theta. Batch
    units propagate one flag to all member instances."""
    row = store.round_latencies(round_index)
    flags: list[bool] = []
    for unit, lat in zip(store.units, row):
        flags.extend([lat <= theta_ms] * len(unit.members))
    return flags


def evaluate_round(
    instances: Sequence[InstanceMeta],
    flags: Sequence[bool],
    metric: QualityMetric,
) -> float:
    """Quality percent of one round's tagged results."""
    if not instances:
        raise TraceError("cannot evaluate an empty instance set")
    if len(flags) != len(instances):
        raise TraceError("validity flags must cover all instances")
    return metric(instances, flags)


def tail_quality(store: TimingStore, spec: ThresholdSpec, metric: QualityMetric) -> TailQualityResult:
    """Per-round qualities at the resolved threshold plus worst/best case
    and the unconstrained (origin) quality."""
    if store.rounds < 1:
        raise TraceError("store has no recorded rounds")
    theta = resolve_threshold(spec, store)
    instances = store.instances
    per_round = [
        evaluate_round(instances, tag_validity(store, j, theta), metric)
        for j in range(store.rounds)
    ]
    origin = evaluate_round(instances, [True] * len(instances), metric)
    return TailQualityResult(
        threshold_ms=theta,
        per_round_quality=per_round,
        worst_case=min(per_round),
        best_case=max(per_round),
        origin_quality=origin,
        metric=metric.name,
    )


@dataclass(frozen=True)
class SweepPoint:
    theta_ms: float
    worst: float
    best: float
    origin: float


def quality_threshold_sweep(
    store: TimingStore,
    metric: QualityMetric,
    grid: Sequence[float],
) -> list[SweepPoint]:
    """tail_quality at each threshold of an ascending grid; emits the data
    behind quality-vs-threshold curves."""
    if len(grid) == 0:
        raise ConfigError("threshold grid must be nonempty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError("threshold grid must be ascending")
    points = []
    for theta in grid:
        r = tail_quality(store, ThresholdSpec("absolute_ms", float(theta)), metric)
        points.append(SweepPoint(float(theta), r.worst_case, r.best_case, r.origin_quality))
    return points


def delta(train_worst: float, test_worst: float) -> float:
    """Worst-case difference, training minus testing; near zero or negative
    means the training phase predicted the deployed worst case soundly."""
    return train_worst - test_worst
