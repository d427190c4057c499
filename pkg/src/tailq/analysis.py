"""Post-run reporting: generalization of fitted densities to fresh rounds,
latency-vs-size regression, pairwise JSD structure, and inference budget
relative to a fixed-count baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from tailq.divergence import jsd_between, rjsd_between
from tailq.errors import TraceError
from tailq.estimator import EstimationResult
from tailq.kde import DensityModel, fit_kde
from tailq.trace import TimingStore

# Inference count MLPerf Inference prescribes for pinning down 99th
# percentile tail latency; the reference point for budget ratios.
DEFAULT_BASELINE_INFERENCES = 262_742


@dataclass(frozen=True)
class GeneralizationReport:
    """How well training-phase fits carry over to fresh timing rounds.

    per_unit_rjsd_train holds each unit's final in-window max rJSD (None if
    the unit never reached a refit); per_unit_rjsd_test holds rJSD between
    the training fit and a fit on the test samples alone.
    """

    per_unit_rjsd_train: dict[str, float | None]
    per_unit_rjsd_test: dict[str, float]
    mean_train: float | None
    mean_test: float

    def to_dict(self) -> dict:
        return {
            "mean_train": self.mean_train,
            "mean_test": self.mean_test,
            "per_unit_rjsd_train": self.per_unit_rjsd_train,
            "per_unit_rjsd_test": self.per_unit_rjsd_test,
        }


@dataclass(frozen=True)
class BudgetReport:
    total_inferences: int
    baseline: int
    ratio: float

    def to_dict(self) -> dict:
        return {
            "total_inferences": self.total_inferences,
            "baseline": self.baseline,
            "ratio": self.ratio,
        }


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared}


def generalization_report(train: EstimationResult, test_store: TimingStore) -> GeneralizationReport:
    """Refit each unit on the test samples only and compare against the
    training-phase final model."""
    test_uids = [u.uid for u in test_store.units]
    if set(test_uids) != set(train.final_models):
        missing = sorted(set(train.final_models) - set(test_uids))
        extra = sorted(set(test_uids) - set(train.final_models))
        raise TraceError(f"unit mismatch between phases: missing={missing} extra={extra}")
    if test_store.rounds < 1:
        raise TraceError("test store has no rounds")

    rjsd_train: dict[str, float | None] = {}
    rjsd_test: dict[str, float] = {}
    for uid, model in train.final_models.items():
        hist = train.fit_history.get(uid, [])
        rjsd_train[uid] = hist[-1] if hist else None
        test_fit = fit_kde(test_store.unit_latencies(uid), grid_points=model.grid_points)
        rjsd_test[uid] = rjsd_between(model, test_fit)

    train_vals = [v for v in rjsd_train.values() if v is not None]
    return GeneralizationReport(
        per_unit_rjsd_train=rjsd_train,
        per_unit_rjsd_test=rjsd_test,
        mean_train=float(np.mean(train_vals)) if train_vals else None,
        mean_test=float(np.mean(list(rjsd_test.values()))),
    )


def size_latency_regression(store: TimingStore) -> RegressionFit:
    """Ordinary least squares of per-unit mean latency on unit size."""
    if store.rounds < 1:
        raise TraceError("store has no rounds")
    x = np.array([u.size for u in store.units], dtype=np.float64)
    if np.unique(x).size < 2:
        raise TraceError("regression needs at least 2 distinct unit sizes")
    y = np.array(
        [float(np.mean(store.unit_latencies(u.uid))) for u in store.units], dtype=np.float64
    )
    xm = x.mean()
    ym = y.mean()
    sxx = float(((x - xm) ** 2).sum())
    sxy = float(((x - xm) * (y - ym)).sum())
    slope = sxy / sxx
    intercept = ym - slope * xm
    residuals = y - (slope * x + intercept)
    ss_res = float((residuals**2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionFit(slope=slope, intercept=intercept, r_squared=r2)


@dataclass(frozen=True)
class PairwiseJsdMatrix:
    ids: list[str]  # size-ascending
    sizes: list[float]
    values: np.ndarray  # symmetric, zero diagonal

    def to_csv(self) -> str:
        lines = ["id," + ",".join(self.ids)]
        for i, uid in enumerate(self.ids):
            lines.append(uid + "," + ",".join(repr(v) for v in self.values[i].tolist()))
        return "\n".join(lines) + "\n"


def pairwise_jsd_matrix(
    models: Mapping[str, DensityModel],
    sizes: Mapping[str, float],
    top_k: int | None = None,
) -> PairwiseJsdMatrix:
    """Symmetric JSD matrix over per-unit models, rows/columns sorted by
    unit size ascending (id as tie-break). top_k keeps only the largest-K
    units by size."""
    if len(models) < 2:
        raise TraceError("pairwise matrix needs at least 2 models")
    missing = sorted(set(models) - set(sizes))
    if missing:
        raise TraceError(f"missing sizes for units: {missing}")
    ids = sorted(models, key=lambda u: (sizes[u], u))
    if top_k is not None:
        if top_k < 2:
            raise TraceError("top_k must be >= 2")
        ids = ids[-top_k:]
    n = len(ids)
    values = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            v = jsd_between(models[ids[i]], models[ids[j]])
            values[i, j] = v
            values[j, i] = v
    return PairwiseJsdMatrix(ids=ids, sizes=[sizes[u] for u in ids], values=values)


def budget_report(
    result: EstimationResult, baseline: int = DEFAULT_BASELINE_INFERENCES
) -> BudgetReport:
    """Total inference count against the fixed-count baseline."""
    if baseline <= 0:
        raise TraceError("baseline must be > 0")
    return BudgetReport(
        total_inferences=result.total_inferences,
        baseline=baseline,
        ratio=result.total_inferences / baseline,
    )


def mean_or_nan(values: list[float]) -> float:
    return float(np.mean(values)) if values else math.nan
