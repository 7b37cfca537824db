"""Decision records: build, persist, read back, and aggregate.

One episode produces one DecisionRecord; records go to a text file or any
writable stream (the two sinks the experiment loop supports) as
tab-separated lines. Floats are rendered with exactly six decimals
(round-half-even) so identical runs produce byte-identical logs.

Line grammar (UTF-8, LF, one record per line)::

    session_id  test_num  outcome  group_member_names  impact_speed  tick  subject_role  scenario_name

with outcome either ``group:<id>`` or ``timeout`` and group_member_names
empty for timeouts.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .model import Scenario, Simulation, WrongPhaseError, group_member_names

_FIELD_COUNT = 8


class UnknownTestNumError(KeyError):
    """A record references a scenario that was not provided."""


class RecordWriteError(OSError):
    def __init__(self, written: int, cause: OSError):
        self.written = written
        super().__init__(f"IO_ERROR after {written} record(s): {cause}")


@dataclass(frozen=True)
class Outcome:
    kind: str  # "group" | "timeout"
    group_id: int | None = None

    @classmethod
    def group(cls, group_id: int) -> Outcome:
        return cls("group", group_id)

    @classmethod
    def timeout(cls) -> Outcome:
        return cls("timeout")

    def label(self) -> str:
        if self.kind == "group":
            return f"group:{self.group_id}"
        return "timeout"

    @classmethod
    def from_label(cls, label: str) -> Outcome:
        if label == "timeout":
            return cls.timeout()
        kind, sep, gid = label.partition(":")
        if kind == "group" and sep and gid.lstrip("-").isdigit():
            return cls.group(int(gid))
        raise ValueError(f"bad outcome label {label!r}")


@dataclass(frozen=True)
class DecisionRecord:
    session_id: str
    test_num: int
    outcome: Outcome
    group_member_names: str
    impact_speed: float
    tick: int
    subject_role: str  # "human" | "agent"
    scenario_name: str

    def to_line(self) -> str:
        return "\t".join(
            (
                self.session_id,
                str(self.test_num),
                self.outcome.label(),
                self.group_member_names,
                f"{self.impact_speed:.6f}",
                str(self.tick),
                self.subject_role,
                self.scenario_name,
            )
        )

    @classmethod
    def from_line(cls, line: str) -> DecisionRecord:
        parts = line.split("\t")
        if len(parts) != _FIELD_COUNT:
            raise ValueError(f"expected {_FIELD_COUNT} tab-separated fields, got {len(parts)}")
        outcome = Outcome.from_label(parts[2])
        if outcome.kind == "group" and not parts[3]:
            raise ValueError("group outcome with empty group_member_names")
        return cls(
            session_id=parts[0],
            test_num=int(parts[1]),
            outcome=outcome,
            group_member_names=parts[3],
            impact_speed=float(parts[4]),
            tick=int(parts[5]),
            subject_role=parts[6],
            scenario_name=parts[7],
        )


def make_decision_record(episode, *, session_id: str, subject_role: str) -> DecisionRecord:
    """Build the record for a collided episode.

    impact_speed is quantized to the six decimals the log renders, so a
    record read back from its own log compares equal. For timeouts the
    impact speed is the car's speed at the final tick and the member-names
    string is empty.
    """
    if getattr(episode.phase, "value", None) != "collided" or episode.outcome is None:
        raise WrongPhaseError("decision records require a collided episode")
    outcome: Outcome = episode.outcome
    names = ""
    if outcome.kind == "group":
        names = group_member_names(episode.scenario, outcome.group_id)
    return DecisionRecord(
        session_id=session_id,
        test_num=episode.scenario.test_num,
        outcome=outcome,
        group_member_names=names,
        impact_speed=round(episode.vehicle.speed, 6),
        tick=episode.tick,
        subject_role=subject_role,
        scenario_name=episode.scenario.name,
    )


class RecordSink:
    """Serialized single-writer sink over a file path or an open text stream.

    Appends are one write call per line under a lock, so concurrent
    sessions interleave whole lines, never fragments.
    """

    def __init__(self, target: str | Path | IO[str]):
        self._lock = threading.Lock()
        if isinstance(target, (str, Path)):
            self._stream: IO[str] = open(target, "a", encoding="utf-8", newline="\n")
            self._owned = True
        else:
            self._stream = target
            self._owned = False

    def write(self, record: DecisionRecord) -> None:
        with self._lock:
            self._stream.write(record.to_line() + "\n")
            self.flush()

    def flush(self) -> None:
        flush = getattr(self._stream, "flush", None)
        if flush is not None:
            flush()

    def close(self) -> None:
        if self._owned:
            self._stream.close()

    def __enter__(self) -> RecordSink:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_records(records: Iterable[DecisionRecord], sink: str | Path | IO[str]) -> int:
    """Write records as log lines; returns the count written.

    Raises RecordWriteError carrying the partial count if the sink fails
    midway.
    """
    records = list(records)
    written = 0
    try:
        out = RecordSink(sink)
    except OSError as exc:
        raise RecordWriteError(0, exc) from exc
    try:
        for record in records:
            out.write(record)
            written += 1
    except OSError as exc:
        raise RecordWriteError(written, exc) from exc
    finally:
        out.close()
    return written


@dataclass(frozen=True)
class RecordLineError:
    line: int  # 1-based
    message: str


def read_records(source: str | Path | IO[str]) -> tuple[list[DecisionRecord], list[RecordLineError]]:
    """Inverse of write_records. Malformed lines become errors with their
    line number; well-formed lines are still returned."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    records: list[DecisionRecord] = []
    errors: list[RecordLineError] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line:
            continue
        try:
            records.append(DecisionRecord.from_line(line))
        except ValueError as exc:
            errors.append(RecordLineError(lineno, str(exc)))
    return records, errors


@dataclass(frozen=True)
class AggregateStats:
    total: int
    by_outcome: dict[str, int]
    spared_larger_group_rate: float | None
    by_trait: dict[str, int]


def aggregate_stats(
    records: Iterable[DecisionRecord], scenarios: Simulation | Iterable[Scenario]
) -> AggregateStats:
    """Descriptive counts over a record set.

    spared_larger_group_rate is the fraction of group-outcome records, in
    scenarios whose victim groups differ in size, where the hit group is
    strictly smaller than the largest other group (hitting few = sparing
    many). Absent (None) when no record qualifies for the denominator.
    """
    if isinstance(scenarios, Simulation):
        scenario_list: Iterable[Scenario] = scenarios.scenarios
    else:
        scenario_list = scenarios
    by_test_num = {s.test_num: s for s in scenario_list}

    total = 0
    by_outcome: dict[str, int] = {}
    by_trait: dict[str, int] = {}
    eligible = 0
    spared = 0
    for record in records:
        total += 1
        label = record.outcome.label()
        by_outcome[label] = by_outcome.get(label, 0) + 1
        scenario = by_test_num.get(record.test_num)
        if scenario is None:
            raise UnknownTestNumError(record.test_num)
        if record.outcome.kind != "group":
            continue
        gid = record.outcome.group_id
        for member in scenario.group_members(gid):
            assert member.attributes is not None
            for trait in member.attributes.traits:
                by_trait[trait] = by_trait.get(trait, 0) + 1
        sizes = {g: scenario.group_size(g) for g in scenario.groups}
        if len(set(sizes.values())) < 2:
            continue
        others = [size for g, size in sizes.items() if g != gid]
        eligible += 1
        if sizes.get(gid, 0) < max(others):
            spared += 1
    rate = (spared / eligible) if eligible else None
    return AggregateStats(
        total=total,
        by_outcome=by_outcome,
        spared_larger_group_rate=rate,
        by_trait=by_trait,
    )


@dataclass(frozen=True)
class ActionTrace:
    """Run-length-encoded control sequence for one episode."""

    session_id: str
    test_num: int
    controls: tuple[tuple[str, int], ...]

    @classmethod
    def from_controls(cls, session_id: str, test_num: int, names: Iterable[str]) -> ActionTrace:
        runs: list[tuple[str, int]] = []
        for name in names:
            if runs and runs[-1][0] == name:
                runs[-1] = (name, runs[-1][1] + 1)
            else:
                runs.append((name, 1))
        return cls(session_id, test_num, tuple(runs))

    def expand(self) -> list[str]:
        out: list[str] = []
        for name, count in self.controls:
            out.extend([name] * count)
        return out

    @property
    def tick_count(self) -> int:
        return sum(count for _, count in self.controls)


@dataclass(frozen=True)
class TraceBundle:
    """A trace file: session header plus one trace per episode, in order."""

    session_id: str
    file_sha256: str
    mode: dict
    params: dict
    subject_role: str
    traces: tuple[ActionTrace, ...]


def save_traces(path: str | Path, bundle: TraceBundle) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {
            "type": "trace_header",
            "session_id": bundle.session_id,
            "file_sha256": bundle.file_sha256,
            "mode": bundle.mode,
            "params": bundle.params,
            "subject_role": bundle.subject_role,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for trace in bundle.traces:
            row = {
                "type": "episode",
                "test_num": trace.test_num,
                "controls": [[name, count] for name, count in trace.controls],
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_traces(path: str | Path) -> TraceBundle:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().split("\n") if line.strip()]
    if not lines:
        raise ValueError("empty trace file")
    header = json.loads(lines[0])
    if header.get("type") != "trace_header":
        raise ValueError("first line is not a trace_header")
    traces = []
    for line in lines[1:]:
        row = json.loads(line)
        if row.get("type") != "episode":
            raise ValueError("trace rows must have type=episode")
        traces.append(
            ActionTrace(
                session_id=header["session_id"],
                test_num=int(row["test_num"]),
                controls=tuple((str(n), int(c)) for n, c in row["controls"]),
            )
        )
    return TraceBundle(
        session_id=header["session_id"],
        file_sha256=header["file_sha256"],
        mode=header["mode"],
        params=header["params"],
        subject_role=header["subject_role"],
        traces=tuple(traces),
    )
