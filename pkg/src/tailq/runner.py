"""Workload drivers that produce one latency per timed unit per round.

Three kinds:

* replay     -- reads successive rounds from an existing TimingStore.
* subprocess -- times a child process over a line protocol (see below).
* synthetic  -- draws from a seeded distribution family.

Subprocess protocol (UTF-8 lines over the child's stdin/stdout):

    harness -> child:  HELLO tailq/1
    child -> harness:  READY
    per inference:     INFER <unit_id>   ...   DONE <unit_id>
    child may reply    ERR <message>     which aborts the round.

Elapsed monotonic time between writing INFER and reading the reply is the
recorded latency; it includes IPC overhead, so absolute numbers cover the
full request round-trip.

Rounds execute units serially in a fixed order; drivers are not shared
across threads.
"""

from __future__ import annotations

import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from tailq.errors import DriverError
from tailq.trace import InstanceMeta, RunContext, TimedUnit, TimingStore

PROTOCOL_HELLO = "HELLO tailq/1"
PROTOCOL_READY = "READY"

SYNTHETIC_FAMILIES = ("lognormal", "gamma", "gaussian_mixture", "pareto", "linear_size")


@dataclass(frozen=True)
class SyntheticSpec:
    """Seeded generator spec. Same (family, params, seed) reproduces the
    exact sample stream. Draws <= 0 are resampled so latencies stay positive
    without relabeling the distribution family.

    Families and parameters:
      lognormal        mu, sigma            exp(N(mu, sigma))
      gamma            shape, scale
      gaussian_mixture means, sigmas, weights
      pareto           alpha, scale         scale * (1 + Pareto(alpha))
      linear_size      slope, intercept, noise_sigma
                       latency = slope*size + intercept + N(0, noise_sigma)
    """

    family: str
    params: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in SYNTHETIC_FAMILIES:
            raise DriverError(
                f"unknown synthetic family {self.family!r}; expected one of {SYNTHETIC_FAMILIES}"
            )


class WorkloadDriver:
    """Base driver: yields exactly one latency per unit per round."""

    kind: str = "abstract"

    def __init__(self, units: Sequence[TimedUnit], context: RunContext) -> None:
        self.units = list(units)
        self.context = context

    def run_round(self) -> list[float]:
        raise NotImplementedError

    def warmup(self, k: int) -> None:
        """Run k full timed passes over all units and discard the results."""
        if k < 0:
            raise DriverError("warmup count must be >= 0")
        for _ in range(k):
            self.run_round()

    def new_store(self) -> TimingStore:
        return TimingStore(context=self.context, units=self.units)

    def close(self) -> None:
        pass

    def __enter__(self) -> "WorkloadDriver":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def run_round(driver: WorkloadDriver, units: Sequence[TimedUnit] | None = None) -> list[float]:
    """One full timed pass; returns latencies aligned with driver.units."""
    if units is not None and [u.uid for u in units] != [u.uid for u in driver.units]:
        raise DriverError("unit list does not match the driver's units")
    return driver.run_round()


def warmup(driver: WorkloadDriver, k: int) -> None:
    driver.warmup(k)


class ReplayDriver(WorkloadDriver):
    """Replays rounds of a source TimingStore in order."""

    kind = "replay"

    def __init__(self, source: TimingStore, context: RunContext | None = None) -> None:
        super().__init__(source.units, context or source.context)
        self._source = source
        self._cursor = 0

    def run_round(self) -> list[float]:
        if self._cursor >= self._source.rounds:
            raise DriverError(
                f"replay exhausted after {self._source.rounds} rounds"
            )
        row = self._source.round_latencies(self._cursor)
        self._cursor += 1
        return row


class SyntheticDriver(WorkloadDriver):
    """Draws per-unit latencies from a seeded distribution family."""

    kind = "synthetic"

    def __init__(
        self,
        spec: SyntheticSpec,
        units: Sequence[TimedUnit],
        context: RunContext | None = None,
    ) -> None:
        if context is None:
            context = RunContext(
                tags={"driver": "synthetic", "family": spec.family, "seed": str(spec.seed)}
            )
        super().__init__(units, context)
        self.spec = spec
        self._rng = np.random.default_rng(spec.seed)
        self._sizes = [u.size for u in self.units]

    def _draw_one(self, size: float) -> float:
        p = self.spec.params
        rng = self._rng
        family = self.spec.family
        for _ in range(1000):
            if family == "lognormal":
                v = float(np.exp(rng.normal(p.get("mu", 0.0), p.get("sigma", 1.0))))
            elif family == "gamma":
                v = float(rng.gamma(p.get("shape", 2.0), p.get("scale", 1.0)))
            elif family == "pareto":
                v = float(p.get("scale", 1.0) * (1.0 + rng.pareto(p.get("alpha", 3.0))))
            elif family == "gaussian_mixture":
                means = p.get("means", [1.0])
                sigmas = p.get("sigmas", [0.1])
                weights = np.asarray(p.get("weights", [1.0] * len(means)), dtype=np.float64)
                weights = weights / weights.sum()
                i = int(rng.choice(len(means), p=weights))
                v = float(rng.normal(means[i], sigmas[i]))
            else:  # linear_size
                v = float(
                    p.get("slope", 1.0) * size
                    + p.get("intercept", 0.0)
                    + rng.normal(0.0, p.get("noise_sigma", 0.0))
                )
            if v > 0:
                return v
        raise DriverError(f"synthetic family {family!r} keeps drawing non-positive latencies")

    def run_round(self) -> list[float]:
        return [self._draw_one(s) for s in self._sizes]


class SubprocessDriver(WorkloadDriver):
    """Times a child process per unit over the line protocol.

    The handshake runs at construction; use as a context manager (or call
    close()) so the child is terminated.
    """

    kind = "subprocess"

    def __init__(
        self,
        command: str | Sequence[str],
        units: Sequence[TimedUnit],
        context: RunContext | None = None,
    ) -> None:
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if context is None:
            context = RunContext(tags={"driver": "subprocess", "command": shlex.join(argv)})
        super().__init__(units, context)
        try:
            self._child = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise DriverError(f"failed to start {argv!r}: {e}") from None
        self._handshake()

    def _send(self, line: str) -> None:
        assert self._child.stdin is not None
        try:
            self._child.stdin.write(line + "\n")
            self._child.stdin.flush()
        except (BrokenPipeError, OSError):
            raise DriverError("subprocess died (stdin closed)") from None

    def _recv(self) -> str:
        assert self._child.stdout is not None
        line = self._child.stdout.readline()
        if line == "":
            raise DriverError("subprocess died (stdout closed)")
        return line.rstrip("\n")

    def _handshake(self) -> None:
        self._send(PROTOCOL_HELLO)
        reply = self._recv()
        if reply != PROTOCOL_READY:
            self.close()
            raise DriverError(f"protocol violation: expected READY, got {reply!r}")

    def run_round(self) -> list[float]:
        out: list[float] = []
        for u in self.units:
            t0 = time.perf_counter()
            self._send(f"INFER {u.uid}")
            reply = self._recv()
            elapsed_ms = (time.perf_counter() - t0) * 1000.0
            if reply.startswith("ERR"):
                raise DriverError(f"child aborted round: {reply}")
            if reply != f"DONE {u.uid}":
                raise DriverError(f"protocol violation: expected 'DONE {u.uid}', got {reply!r}")
            # clock-resolution floor keeps the positivity invariant
            out.append(max(elapsed_ms, 1e-6))
        return out

    def close(self) -> None:
        if getattr(self, "_child", None) is None:
            return
        try:
            if self._child.stdin:
                self._child.stdin.close()
            self._child.terminate()
            self._child.wait(timeout=5)
        except Exception:
            self._child.kill()
        self._child = None  # type: ignore[assignment]


def make_units(
    count: int,
    sizes: Sequence[float] | None = None,
    correct: Sequence[bool] | None = None,
) -> list[TimedUnit]:
    """Convenience builder for synthetic workloads: singleton units u0000.."""
    if sizes is None:
        sizes = [1.0] * count
    if correct is None:
        correct = [True] * count
    if not (len(sizes) == len(correct) == count):
        raise DriverError("sizes/correct must match the unit count")
    return [
        TimedUnit(
            uid=f"u{i:04d}",
            members=(InstanceMeta(id=f"u{i:04d}", size=float(sizes[i]), correct=bool(correct[i])),),
        )
        for i in range(count)
    ]
