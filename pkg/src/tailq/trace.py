"""Timed-unit data model and trace file ingestion/persistence.

A trace is JSON Lines. The first line is a header carrying the run context,
e.g. {"context": {"system": "A", "framework": "pytorch"}}. Every following
line is one (instance, round) record:

    {"id": str, "round": int>=0, "latency_ms": float>0, "size": float>=0,
     "correct": bool | "score": float in [0,1], "batch_id": optional str}

Rounds must be contiguous from 0 and rectangular (every unit has a sample
for every round). Instances sharing a batch_id were timed together: they
collapse into one timed unit, must report identical latencies per round,
and keep their correctness payloads individually addressable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from tailq.errors import TraceError

_RECORD_KEYS = {"id", "round", "latency_ms", "size", "correct", "score", "batch_id"}


@dataclass(frozen=True)
class InstanceMeta:
    """One dataset instance: identity, size, and cached prediction payload.

    Exactly one of `correct` (boolean correctness) or `score` (graded
    correctness in [0, 1]) is set. Predictions are assumed deterministic
    across rounds; only timing varies.
    """

    id: str
    size: float
    correct: bool | None = None
    score: float | None = None
    batch_id: str | None = None

    def __post_init__(self) -> None:
        if (self.correct is None) == (self.score is None):
            raise TraceError(f"instance {self.id!r}: exactly one of correct/score required")
        if self.size < 0 or not math.isfinite(self.size):
            raise TraceError(f"instance {self.id!r}: size must be finite and >= 0")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise TraceError(f"instance {self.id!r}: score must be in [0, 1]")

    @property
    def contribution(self) -> float:
        """Per-instance quality contribution: 1/0 for boolean correctness."""
        return float(self.correct) if self.score is None else float(self.score)


@dataclass(frozen=True)
class RunContext:
    """Tags describing the influencing components of a run (system,
    framework, model, batch size, ... as free-form strings)."""

    tags: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for k, v in self.tags.items():
            if not isinstance(k, str) or not k:
                raise TraceError(f"context tag keys must be nonempty strings, got {k!r}")
            if not isinstance(v, str):
                raise TraceError(f"context tag {k!r} must map to a string, got {v!r}")


@dataclass(frozen=True)
class TimedUnit:
    """The entity timed per round: a single instance or a whole batch."""

    uid: str
    members: tuple[InstanceMeta, ...]

    @property
    def size(self) -> float:
        return sum(m.size for m in self.members)

    @property
    def is_batch(self) -> bool:
        return len(self.members) > 1 or self.members[0].batch_id is not None


class TimingStore:
    """Rectangular latency matrix (timed unit x round) plus run context.

    Immutable after construction except `append_round`; safe to share
    read-only across threads, with a single writer appending rounds.
    """

    def __init__(
        self,
        context: RunContext,
        units: Sequence[TimedUnit],
        latencies_ms: Sequence[Sequence[float]] | None = None,
    ) -> None:
        self.context = context
        self.units = list(units)
        seen: set[str] = set()
        for u in self.units:
            if u.uid in seen:
                raise TraceError(f"duplicate unit id {u.uid!r}")
            seen.add(u.uid)
            for m in u.members:
                if m.id != u.uid and m.id in seen:
                    raise TraceError(f"duplicate id {m.id!r}")
                seen.add(m.id)
        if latencies_ms is None:
            self._lat: list[list[float]] = [[] for _ in self.units]
        else:
            if len(latencies_ms) != len(self.units):
                raise TraceError("latency rows must match unit count")
            rows = [list(map(float, row)) for row in latencies_ms]
            lengths = {len(r) for r in rows} or {0}
            if len(lengths) != 1:
                raise TraceError("ragged rounds: all units need the same round count")
            for u, row in zip(self.units, rows):
                for v in row:
                    _check_latency(u.uid, v)
            self._lat = rows
        self._index = {u.uid: i for i, u in enumerate(self.units)}

    @property
    def rounds(self) -> int:
        return len(self._lat[0]) if self._lat else 0

    @property
    def instances(self) -> list[InstanceMeta]:
        """All member instances, flattened in unit order."""
        return [m for u in self.units for m in u.members]

    def unit_latencies(self, uid: str) -> list[float]:
        return list(self._lat[self._index[uid]])

    def round_latencies(self, round_index: int) -> list[float]:
        """Per-unit latencies of one round, in unit order."""
        if not 0 <= round_index < self.rounds:
            raise TraceError(f"round {round_index} out of range (rounds={self.rounds})")
        return [row[round_index] for row in self._lat]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimingStore):
            return NotImplemented
        return (
            self.context == other.context
            and self.units == other.units
            and self._lat == other._lat
        )


def _check_latency(uid: str, v: float, line: int | None = None) -> None:
    where = f"line {line}: " if line is not None else ""
    if not math.isfinite(v):
        raise TraceError(f"{where}unit {uid!r}: latency must be finite, got {v}")
    if v <= 0:
        raise TraceError(f"{where}non-positive latency {v} for unit {uid!r}")


def append_round(store: TimingStore, samples: Mapping[str, float]) -> TimingStore:
    """Append one full round: exactly one latency per unit. Mutates and
    returns the store."""
    missing = [u.uid for u in store.units if u.uid not in samples]
    if missing:
        raise TraceError(f"round is missing units: {missing}")
    unknown = [uid for uid in samples if uid not in store._index]
    if unknown:
        raise TraceError(f"round has unknown unit ids: {unknown}")
    for uid, v in samples.items():
        _check_latency(uid, float(v))
    for uid, v in samples.items():
        store._lat[store._index[uid]].append(float(v))
    return store


def pooled_latencies(store: TimingStore) -> list[float]:
    """All rounds x units samples, ascending."""
    if store.rounds == 0 or not store.units:
        raise TraceError("store has no samples to pool")
    return sorted(v for row in store._lat for v in row)


def _parse_header(line: str) -> RunContext:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise TraceError(f"line 1: malformed header: {e}") from None
    if not isinstance(obj, dict) or set(obj) != {"context"} or not isinstance(obj["context"], dict):
        raise TraceError('line 1: expected header {"context": {...}}')
    return RunContext(tags=dict(obj["context"]))


def _parse_record(line: str, lineno: int) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise TraceError(f"line {lineno}: malformed record: {e}") from None
    if not isinstance(rec, dict):
        raise TraceError(f"line {lineno}: record must be a JSON object")
    unknown = set(rec) - _RECORD_KEYS
    if unknown:
        raise TraceError(f"line {lineno}: unknown keys {sorted(unknown)}")
    for key in ("id", "round", "latency_ms", "size"):
        if key not in rec:
            raise TraceError(f"line {lineno}: missing key {key!r}")
    if not isinstance(rec["id"], str) or not rec["id"]:
        raise TraceError(f"line {lineno}: id must be a nonempty string")
    if not isinstance(rec["round"], int) or isinstance(rec["round"], bool) or rec["round"] < 0:
        raise TraceError(f"line {lineno}: round must be an integer >= 0")
    if ("correct" in rec) == ("score" in rec):
        raise TraceError(f"line {lineno}: exactly one of correct/score required")
    if "correct" in rec and not isinstance(rec["correct"], bool):
        raise TraceError(f"line {lineno}: correct must be a boolean")
    if "batch_id" in rec and rec["batch_id"] is not None and not isinstance(rec["batch_id"], str):
        raise TraceError(f"line {lineno}: batch_id must be a string")
    if not isinstance(rec["latency_ms"], (int, float)) or isinstance(rec["latency_ms"], bool):
        raise TraceError(f"line {lineno}: latency_ms must be a number")
    if not isinstance(rec["size"], (int, float)) or isinstance(rec["size"], bool):
        raise TraceError(f"line {lineno}: size must be a number")
    if rec["size"] < 0:
        raise TraceError(f"line {lineno}: size must be >= 0")
    if "score" in rec:
        if not isinstance(rec["score"], (int, float)) or isinstance(rec["score"], bool):
            raise TraceError(f"line {lineno}: score must be a number")
        if not 0.0 <= rec["score"] <= 1.0:
            raise TraceError(f"line {lineno}: score must be in [0, 1]")
    return rec


def load_trace(path: str | Path) -> TimingStore:
    """Parse and validate a trace file into a TimingStore.

    Batch groups are collapsed into single timed units. Raises TraceError
    with the offending line number for malformed input.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise TraceError(f"{path}: empty trace file")
    context = _parse_header(lines[0])

    metas: dict[str, InstanceMeta] = {}
    meta_line: dict[str, int] = {}
    samples: dict[str, dict[int, float]] = {}
    order: list[str] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        rec = _parse_record(raw, lineno)
        iid = rec["id"]
        meta = InstanceMeta(
            id=iid,
            size=float(rec["size"]),
            correct=rec.get("correct"),
            score=float(rec["score"]) if "score" in rec else None,
            batch_id=rec.get("batch_id"),
        )
        if iid not in metas:
            metas[iid] = meta
            meta_line[iid] = lineno
            samples[iid] = {}
            order.append(iid)
        elif metas[iid] != meta:
            raise TraceError(
                f"line {lineno}: instance {iid!r} metadata conflicts with line {meta_line[iid]}"
            )
        rnd = rec["round"]
        if rnd in samples[iid]:
            raise TraceError(f"line {lineno}: duplicate id {iid!r} for round {rnd}")
        v = float(rec["latency_ms"])
        _check_latency(iid, v, lineno)
        samples[iid][rnd] = v

    if not order:
        raise TraceError(f"{path}: trace has no records")

    round_counts = {iid: len(s) for iid, s in samples.items()}
    rounds = max(round_counts.values())
    for iid in order:
        got = sorted(samples[iid])
        if round_counts[iid] != rounds or got != list(range(rounds)):
            raise TraceError(
                f"ragged rounds: unit {iid!r} has rounds {got}, expected 0..{rounds - 1}"
            )

    # group batch members, preserving first-appearance order
    units: list[TimedUnit] = []
    lat_rows: list[list[float]] = []
    grouped: dict[str, list[str]] = {}
    group_order: list[str] = []
    for iid in order:
        bid = metas[iid].batch_id
        key = bid if bid is not None else iid
        if key not in grouped:
            grouped[key] = []
            group_order.append(key)
        grouped[key].append(iid)
    for key in group_order:
        member_ids = grouped[key]
        members = tuple(metas[i] for i in member_ids)
        bids = {m.batch_id for m in members}
        if len(bids) > 1 or (bids == {None} and len(members) > 1):
            raise TraceError(f"unit {key!r}: inconsistent batch grouping")
        row = [samples[member_ids[0]][j] for j in range(rounds)]
        for other in member_ids[1:]:
            for j in range(rounds):
                if samples[other][j] != row[j]:
                    raise TraceError(
                        f"batch {key!r}: members {member_ids[0]!r} and {other!r} "
                        f"disagree on round {j} latency (timed together implies equal)"
                    )
        units.append(TimedUnit(uid=key, members=members))
        lat_rows.append(row)

    return TimingStore(context=context, units=units, latencies_ms=lat_rows)


def save_trace(store: TimingStore, path: str | Path) -> None:
    """Write the store back out in the trace format (round-trips exactly)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps({"context": dict(store.context.tags)}) + "\n")
        for u in store.units:
            row = store.unit_latencies(u.uid)
            for m in u.members:
                payload: dict = {"id": m.id, "size": m.size}
                if m.score is not None:
                    payload["score"] = m.score
                else:
                    payload["correct"] = m.correct
                if m.batch_id is not None:
                    payload["batch_id"] = m.batch_id
                for j, v in enumerate(row):
                    rec = {"id": m.id, "round": j, "latency_ms": v}
                    rec.update({k: v2 for k, v2 in payload.items() if k != "id"})
                    f.write(json.dumps(rec) + "\n")
