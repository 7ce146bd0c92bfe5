"""Append-only simulation trace and its JSON-lines encoding.

Every record is one line. The first line is a header carrying the schema
version and the run configuration; the rest are event records in dispatch
order::

    {"kind":"header","schema":1,...}
    {"t":0,"ev":3,"pid":0,"kind":"spawn",...}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

SCHEMA_VERSION = 1

KINDS = frozenset(
    {
        "start",
        "stop",
        "spawn",
        "app_loc",
        "gvh_publish",
        "msg_send",
        "msg_deliver",
        "msg_drop",
        "motion_tick",
        "crash",
        "violation",
        "done",
    }
)

WORLD = "world"


class MalformedTrace(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    time: int
    ev: int
    pid: int | str
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"t": self.time, "ev": self.ev, "pid": self.pid, "kind": self.kind}
        d.update(self.payload)
        return d

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TraceRecord":
        try:
            payload = {k: v for k, v in d.items() if k not in ("t", "ev", "pid", "kind")}
            rec = cls(int(d["t"]), int(d["ev"]), d["pid"], d["kind"], payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTrace(f"bad record {d!r}: {exc}") from None
        if rec.kind not in KINDS:
            raise MalformedTrace(f"unknown record kind {rec.kind!r}")
        return rec


Sink = Callable[[TraceRecord], None]


@dataclass
class Trace:
    header: dict[str, Any] = field(default_factory=dict)
    records: list[TraceRecord] = field(default_factory=list)
    sinks: list[Sink] = field(default_factory=list, repr=False)

    def append(self, rec: TraceRecord) -> None:
        self.records.append(rec)
        for sink in self.sinks:
            sink(rec)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def of_kind(self, *kinds: str) -> list[TraceRecord]:
        return [r for r in self.records if r.kind in kinds]

    @property
    def end_time(self) -> int:
        return self.records[-1].time if self.records else 0

    def lines(self) -> Iterator[str]:
        head = {"kind": "header", "schema": SCHEMA_VERSION}
        head.update(self.header)
        yield json.dumps(head, separators=(",", ":"), sort_keys=False)
        for rec in self.records:
            yield rec.to_line()

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line)
                fh.write("\n")


def parse_lines(lines: Iterable[str]) -> Trace:
    trace = Trace()
    it = iter(lines)
    first = True
    for lineno, line in enumerate(it, 1):
        line = line.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedTrace(f"line {lineno}: {exc}") from None
        if first:
            first = False
            if d.get("kind") != "header":
                raise MalformedTrace("first line must be a header record")
            if d.get("schema") != SCHEMA_VERSION:
                raise MalformedTrace(f"unsupported schema {d.get('schema')!r}")
            trace.header = {k: v for k, v in d.items() if k not in ("kind", "schema")}
            continue
        trace.records.append(TraceRecord.from_dict(d))
    if first:
        raise MalformedTrace("empty trace")
    return trace


def read_trace(path: str | Path) -> Trace:
    with Path(path).open(encoding="utf-8") as fh:
        return parse_lines(fh)


def loads(text: str) -> Trace:
    return parse_lines(text.splitlines())
