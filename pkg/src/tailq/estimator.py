"""Adaptive estimation of per-unit latency densities.

The loop: run `initial_rounds` timed rounds over every unit and fit a first
density per unit; then keep timing one round per iteration (all units, so
the latency matrix stays rectangular), refitting each unconverged unit on
its full history every `refit_step` rounds. A unit converges once its
sliding window holds `window` prior fits and the newest fit is within
`tolerance` rJSD of each of them. Converged units keep being timed but are
never refit. Stops when every unit has converged or at `max_rounds`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from tailq.divergence import rjsd_between
from tailq.errors import ConfigError
from tailq.kde import DEFAULT_GRID_POINTS, DensityModel, fit_kde
from tailq.runner import WorkloadDriver
from tailq.trace import TimedUnit, TimingStore, append_round


@dataclass(frozen=True)
class EstimatorConfig:
    initial_rounds: int = 30
    refit_step: int = 5
    window: int = 5
    tolerance: float = 0.2
    max_rounds: int = 1000
    grid_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self) -> None:
        if self.initial_rounds < 2:
            raise ConfigError("initial_rounds must be >= 2")
        if self.refit_step < 1:
            raise ConfigError("refit_step must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if not 0.0 < self.tolerance <= 1.0:
            raise ConfigError("tolerance must be in (0, 1]")
        if self.max_rounds <= self.initial_rounds:
            raise ConfigError("max_rounds must exceed initial_rounds")
        if self.grid_points < 8:
            raise ConfigError("grid_points must be >= 8")

    def to_dict(self) -> dict:
        return {
            "initial_rounds": self.initial_rounds,
            "refit_step": self.refit_step,
            "window": self.window,
            "tolerance": self.tolerance,
            "max_rounds": self.max_rounds,
            "grid_points": self.grid_points,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        return cls(**d)


@dataclass
class FitWindow:
    """Sliding window of the most recent fits for one unit (newest last,
    at most `capacity` + 1 kept: the priors plus the latest candidate)."""

    capacity: int
    fits: list[DensityModel] = field(default_factory=list)
    converged: bool = False

    def push(self, model: DensityModel) -> None:
        self.fits.append(model)
        del self.fits[: -(self.capacity + 1)]

    def prior_rjsds(self, candidate: DensityModel) -> list[float]:
        """rJSD of the candidate against each of the most recent fits."""
        return [rjsd_between(candidate, f) for f in self.fits[-self.capacity :]]


def check_convergence(win: FitWindow, candidate: DensityModel, tolerance: float) -> bool:
    """True iff the window already holds a full set of prior fits and the
    candidate is within tolerance rJSD of every one of them."""
    if len(win.fits) < win.capacity:
        return False
    return max(win.prior_rjsds(candidate)) <= tolerance


@dataclass
class EstimationResult:
    final_models: dict[str, DensityModel]
    total_rounds: int
    total_inferences: int
    converged_all: bool
    fit_history: dict[str, list[float]]
    """Per unit: max rJSD against the window at each refit event (the
    initial fit has no priors and contributes no entry)."""


def estimate(
    driver: WorkloadDriver,
    cfg: EstimatorConfig,
    units: Sequence[TimedUnit] | None = None,
) -> tuple[EstimationResult, TimingStore]:
    """Run the adaptive loop; returns the final per-unit models and the
    complete (rectangular) TimingStore of every recorded round.

    If max_rounds is hit first, the result carries converged_all=False and
    the latest models.
    """
    if units is not None and [u.uid for u in units] != [u.uid for u in driver.units]:
        raise ConfigError("unit list does not match the driver's units")
    units = driver.units
    uids = [u.uid for u in units]
    store = driver.new_store()

    for _ in range(cfg.initial_rounds):
        append_round(store, dict(zip(uids, driver.run_round())))

    windows: dict[str, FitWindow] = {}
    models: dict[str, DensityModel] = {}
    history: dict[str, list[float]] = {uid: [] for uid in uids}
    for uid in uids:
        m = fit_kde(store.unit_latencies(uid), grid_points=cfg.grid_points)
        windows[uid] = FitWindow(capacity=cfg.window)
        windows[uid].push(m)
        models[uid] = m

    iteration = 0
    while store.rounds < cfg.max_rounds and not all(w.converged for w in windows.values()):
        iteration += 1
        append_round(store, dict(zip(uids, driver.run_round())))
        if iteration % cfg.refit_step != 0:
            continue
        for uid in uids:
            win = windows[uid]
            if win.converged:
                continue
            candidate = fit_kde(store.unit_latencies(uid), grid_points=cfg.grid_points)
            distances = win.prior_rjsds(candidate)
            history[uid].append(max(distances))
            if len(win.fits) >= cfg.window and max(distances) <= cfg.tolerance:
                win.converged = True
            win.push(candidate)
            models[uid] = candidate

    result = EstimationResult(
        final_models=models,
        total_rounds=store.rounds,
        total_inferences=store.rounds * len(units),
        converged_all=all(w.converged for w in windows.values()),
        fit_history=history,
    )
    return result, store


def fit_progress_rows(result: EstimationResult, unit_order: Sequence[str]) -> list[tuple[str, int, float]]:
    """Flatten fit_history into (unit_id, fit_index, max_rjsd) rows ordered
    by refit event then unit; fit_index counts from 2 (the first refit)."""
    rows: list[tuple[str, int, float]] = []
    depth = max((len(result.fit_history.get(u, [])) for u in unit_order), default=0)
    for k in range(depth):
        for uid in unit_order:
            hist = result.fit_history.get(uid, [])
            if k < len(hist):
                rows.append((uid, k + 2, hist[k]))
    return rows
