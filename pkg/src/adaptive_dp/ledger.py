"""Append-only JSONL spend ledger and the status/check computations behind the CLI.

One record per line::

    {"index": 1, "kind": "dp", "epsilon": 0.1, "delta": 0.0, "timestamp": "..."}

Unknown fields are ignored. ``kind`` is case-sensitive. Indices must be
strictly increasing, starting from 1. The file is guarded by an advisory
``flock`` while it is read or appended; concurrent writers that bypass the
lock are not supported.
"""

from __future__ import annotations

import contextlib
import fcntl
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from .core import (
    CompositionState,
    FilterConfig,
    PrivacyError,
    PrivacySpend,
    SpendKind,
    append_spend,
    validate_spend,
)
from .filters import FilterDecision, filter_admits, remaining_v
from .odometers import OdometerSpec, OdometerValue, gated_value


class LedgerError(PrivacyError):
    pass


@dataclass(frozen=True)
class SpendRecord:
    index: int
    kind: str
    epsilon: float
    delta: float
    timestamp: str | None = None

    def to_spend(self) -> PrivacySpend:
        try:
            kind = SpendKind(self.kind)
        except ValueError:
            raise PrivacyError(f"unknown kind {self.kind!r} (expected 'dp' or 'zcdp')") from None
        return validate_spend(PrivacySpend(kind, float(self.epsilon), float(self.delta)))

    def to_json(self) -> str:
        rec = {"index": self.index, "kind": self.kind, "epsilon": self.epsilon, "delta": self.delta}
        if self.timestamp is not None:
            rec["timestamp"] = self.timestamp
        return json.dumps(rec)


@dataclass(frozen=True)
class LedgerStatus:
    n: int
    v: float
    delta_sum: float
    filter_remaining_v: float
    odometer_values: Mapping[str, OdometerValue] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "v": self.v,
            "delta_sum": self.delta_sum,
            "filter_remaining_v": self.filter_remaining_v,
            "odometer_values": {k: o.value for k, o in self.odometer_values.items()},
        }


@contextlib.contextmanager
def locked(path: Path, mode: str) -> Iterator:
    with open(path, mode, encoding="utf-8") as fh:
        fcntl.flock(fh, fcntl.LOCK_SH if mode == "r" else fcntl.LOCK_EX)
        try:
            yield fh
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def _parse_line(line: str, lineno: int) -> SpendRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LedgerError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise LedgerError(f"line {lineno}: expected a JSON object")
    try:
        index = raw["index"]
        kind = raw["kind"]
        epsilon = raw["epsilon"]
        delta = raw.get("delta", 0.0)
    except KeyError as exc:
        raise LedgerError(f"line {lineno}: missing field {exc.args[0]!r}") from None
    if isinstance(index, bool) or not isinstance(index, int):
        raise LedgerError(f"line {lineno}: index must be an integer")
    for name, value in (("epsilon", epsilon), ("delta", delta)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise LedgerError(f"line {lineno}: {name} must be a number")
    if not isinstance(kind, str):
        raise LedgerError(f"line {lineno}: kind must be a string")
    ts = raw.get("timestamp")
    return SpendRecord(index, kind, float(epsilon), float(delta), None if ts is None else str(ts))


def _parse_stream(lines) -> list[SpendRecord]:
    records: list[SpendRecord] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        rec = _parse_line(line, lineno)
        if not records and rec.index != 1:
            raise LedgerError(f"line {lineno}: first record must have index 1, got {rec.index}")
        if records and rec.index <= records[-1].index:
            raise LedgerError(
                f"line {lineno}: index {rec.index} does not increase (previous {records[-1].index})"
            )
        try:
            rec.to_spend()
        except PrivacyError as exc:
            raise LedgerError(f"record {rec.index}: {exc}") from None
        records.append(rec)
    return records


def read_records(path: str | os.PathLike) -> list[SpendRecord]:
    """Parse and validate every record; a missing file is an empty ledger."""
    path = Path(path)
    if not path.exists():
        return []
    with locked(path, "r") as fh:
        return _parse_stream(fh)


def fold(records: Sequence[SpendRecord]) -> CompositionState:
    state = CompositionState()
    for rec in records:
        state = append_spend(state, rec.to_spend())
    return state


def ingest(path: str | os.PathLike) -> CompositionState:
    return fold(read_records(path))


def write_records(path: str | os.PathLike, spends: Sequence[PrivacySpend]) -> list[SpendRecord]:
    """Serialize a spend history as a fresh ledger."""
    records = [
        SpendRecord(i, s.kind.value, s.epsilon, s.delta) for i, s in enumerate(spends, start=1)
    ]
    with locked(Path(path), "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    return records


def append_record(
    path: str | os.PathLike, spend: PrivacySpend, timestamp: str | None = None
) -> SpendRecord:
    validate_spend(spend)
    with locked(Path(path), "a+") as fh:
        fh.seek(0)
        records = _parse_stream(fh)
        index = records[-1].index + 1 if records else 1
        rec = SpendRecord(index, spend.kind.value, spend.epsilon, spend.delta, timestamp)
        fh.write(rec.to_json() + "\n")
    return rec


def spend_if_admitted(
    path: str | os.PathLike, candidate: PrivacySpend, cfg: FilterConfig, timestamp: str | None = None
) -> tuple[FilterDecision, SpendRecord | None]:
    """Filter check and append under one exclusive lock."""
    validate_spend(candidate)
    with locked(Path(path), "a+") as fh:
        fh.seek(0)
        records = _parse_stream(fh)
        decision = filter_admits(fold(records), candidate, cfg)
        if not decision.admitted:
            return decision, None
        index = records[-1].index + 1 if records else 1
        rec = SpendRecord(index, candidate.kind.value, candidate.epsilon, candidate.delta, timestamp)
        fh.write(rec.to_json() + "\n")
    return decision, rec


def check(state: CompositionState, candidate: PrivacySpend, cfg: FilterConfig) -> FilterDecision:
    return filter_admits(state, candidate, cfg)


def status(
    records: Sequence[SpendRecord], cfg: FilterConfig, odometers: Sequence[OdometerSpec] = ()
) -> LedgerStatus:
    state = fold(records)
    deltas = [r.delta for r in records]
    values = {}
    for spec in odometers:
        values[spec.family.value] = gated_value(spec, state.v, state.n, deltas)
    return LedgerStatus(
        n=state.n,
        v=state.v,
        delta_sum=state.delta_sum,
        filter_remaining_v=remaining_v(state, cfg) if state.delta_sum <= cfg.delta_dprime else 0.0,
        odometer_values=values,
    )
