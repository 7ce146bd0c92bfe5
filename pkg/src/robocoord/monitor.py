"""Runtime invariant monitor and offline trace checkers.

The monitor never looks inside the simulator. It rebuilds the state it needs
(poses, zone holdings, ICP locations, gvh writers) from trace records alone
and evaluates its predicates at the end of every event. Running it online
(as a trace sink) or offline over a saved trace therefore yields the same
violations.

A violation is reported when its predicate becomes false; it is not repeated
while the same witnesses stay in violation.
"""

from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable

from .geometry import Layout, Point, default_layout, in_region, polyline_length, region_from_dict
from .trace import MalformedTrace, Trace, TraceRecord

PROPERTIES = (
    "traffic_safety",
    "mutex_safety",
    "icp_key",
    "request_shape",
    "gvh_single_writer",
    "avoid_safety",
)


@dataclass(frozen=True)
class Violation:
    property: str
    time: int
    witnesses: tuple
    detail: str

    def to_dict(self) -> dict[str, Any]:
        return {"property": self.property, "time": self.time, "witnesses": _jsonable(self.witnesses), "detail": self.detail}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Violation":
        return cls(d["property"], int(d["time"]), _tupled(d["witnesses"]), d["detail"])


def _jsonable(x: Any) -> Any:
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    return x


def _tupled(x: Any) -> Any:
    if isinstance(x, list):
        return tuple(_tupled(v) for v in x)
    return x


def _split_slot(slot: str) -> tuple[str, str]:
    inst, _, name = slot.rpartition(".")
    return inst, name


class Monitor:
    """Incremental checker fed one trace record at a time."""

    def __init__(self, layout: Layout | None = None):
        self.layout = layout or default_layout()
        self.violations: list[Violation] = []
        self.pos: dict[int, Point] = {}
        self.present: set[int] = set()
        self.routes: dict[int, tuple[str, ...]] = {}
        self.mux_inst: dict[int, str] = {}
        self.loc: dict[int, str] = {}
        self.myseq: dict[int, tuple[str, ...]] = {}
        self.crit_sets: dict[str, dict[int, frozenset[str]]] = defaultdict(dict)
        self.requests: dict[tuple[str, int], tuple[str, ...] | None] = {}
        self.writers: dict[tuple[int, str], str] = {}
        self.avoid: dict[int, Any] = {}
        self._active: set[tuple] = set()
        self._moved = False
        self._mux_dirty: set[str] = set()
        self._icp_dirty: set[int] = set()
        self._avoid_dirty: set[int] = set()
        self._pending: list[Violation] = []
        self._group_ev: int | None = None
        self._time = 0

    # -- feeding ------------------------------------------------------------

    def feed(self, rec: TraceRecord) -> None:
        kind = rec.kind
        if kind == "violation":
            return
        self._time = rec.time
        p = rec.payload
        pid = rec.pid
        if kind == "motion_tick":
            for q, x, y in p["poses"]:
                self.pos[q] = (x, y)
                self._avoid_dirty.add(q)
            self._moved = True
        elif kind == "gvh_publish":
            self._on_publish(rec)
        elif kind == "app_loc":
            self.loc[pid] = p["loc"]
            self.myseq[pid] = tuple(p["myseq"])
            self._icp_dirty.add(pid)
        elif kind == "spawn":
            if "pose" in p:
                self.pos[pid] = (p["pose"][0], p["pose"][1])
                self.present.add(pid)
                self._moved = True
            if "route" in p:
                self.routes[pid] = tuple(p["route"])
                self.loc[pid] = "S0"
                self.myseq[pid] = tuple(p["route"])
                self.mux_inst[pid] = "mux/" + p.get("xid", "x0")
        elif kind == "done":
            self.present.discard(pid)
            self._moved = True

    def _on_publish(self, rec: TraceRecord) -> None:
        p = rec.payload
        pid = rec.pid
        slot = p["slot"]
        key = (pid, slot)
        writer = p["writer"]
        first = self.writers.setdefault(key, writer)
        if first != writer:
            self._report(
                "gvh_single_writer", (pid, slot, first, writer), f"slot {slot} of {pid} written by {writer}, owner {first}"
            )
        inst, name = _split_slot(slot)
        if inst.startswith("mux/"):
            if name == "crit_set":
                self.crit_sets[inst][pid] = frozenset(p["value"] or ())
                self._mux_dirty.add(inst)
                self._icp_dirty.add(pid)
            elif name == "request":
                v = p["value"]
                self.requests[(inst, pid)] = tuple(v) if v is not None else None
                self._icp_dirty.add(pid)
        elif slot == "motion.avoid":
            v = p["value"]
            self.avoid[pid] = region_from_dict(v) if v is not None else None
            self._avoid_dirty.add(pid)

    def _report(self, prop: str, witnesses: tuple, detail: str) -> None:
        key = (prop, witnesses)
        if key in self._active:
            return
        self._active.add(key)
        self._pending.append(Violation(prop, self._time, witnesses, detail))

    def _still(self, prop: str, current: set[tuple]) -> None:
        """Forget ended episodes of ``prop`` so a later recurrence is reported again."""
        self._active = {k for k in self._active if k[0] != prop or k[1] in current}

    # -- evaluation ---------------------------------------------------------

    def end_event(self) -> list[Violation]:
        if self._moved:
            self._moved = False
            self._check_traffic()
        if self._mux_dirty:
            for inst in sorted(self._mux_dirty):
                self._check_mutex(inst)
            self._mux_dirty.clear()
        if self._icp_dirty:
            for pid in sorted(self._icp_dirty):
                self._check_icp(pid)
            self._icp_dirty.clear()
        if self._avoid_dirty:
            for pid in sorted(self._avoid_dirty):
                self._check_avoid(pid)
            self._avoid_dirty.clear()
        out, self._pending = self._pending, []
        self.violations.extend(out)
        return out

    def _check_traffic(self) -> None:
        occupants: dict[str, list[int]] = defaultdict(list)
        for pid in sorted(self.present):
            z = self.layout.zone_of(self.pos[pid])
            if z is not None and z.kind == "critical":
                occupants[z.name].append(pid)
        current = set()
        for zone, pids in sorted(occupants.items()):
            if len(pids) > 1:
                w = (zone, tuple(pids))
                current.add(w)
                self._report("traffic_safety", w, f"vehicles {pids} share critical zone {zone}")
        self._still("traffic_safety", current)

    def _check_mutex(self, inst: str) -> None:
        sets = self.crit_sets[inst]
        pids = sorted(q for q, s in sets.items() if s)
        current = set()
        for i, a in enumerate(pids):
            for b in pids[i + 1 :]:
                common = sets[a] & sets[b]
                if common:
                    w = (inst, a, b)
                    current.add(w)
                    self._report("mutex_safety", w, f"{a} and {b} both hold {sorted(common)} in {inst}")
        stale = {k[1] for k in self._active if k[0] == "mutex_safety" and k[1][0] != inst}
        self._still("mutex_safety", current | stale)

    def _check_icp(self, pid: int) -> None:
        route = self.routes.get(pid)
        if route is None:
            return
        inst = self.mux_inst[pid]
        loc = self.loc.get(pid)
        interior = set(route[1:-1])
        if loc == "move_wait":
            remaining = [z for z in self.myseq[pid] if z in interior]
            held = self.crit_sets[inst].get(pid, frozenset())
            missing = sorted(set(remaining) - held)
            if missing:
                self._report("icp_key", (pid, tuple(missing)), f"{pid} moving without {missing}")
            else:
                self._still_pid("icp_key", pid)
        else:
            self._still_pid("icp_key", pid)
        if loc == "mutex_wait":
            want = tuple(sorted(route[1:-1]))
            got = self.requests.get((inst, pid))
            got = tuple(sorted(got)) if got is not None else None
            if got != want:
                self._report("request_shape", (pid, got), f"{pid} waits on {got}, route needs {list(want)}")
            else:
                self._still_pid("request_shape", pid)
        else:
            self._still_pid("request_shape", pid)

    def _still_pid(self, prop: str, pid: int) -> None:
        self._active = {k for k in self._active if not (k[0] == prop and k[1][0] == pid)}

    def _check_avoid(self, pid: int) -> None:
        region = self.avoid.get(pid)
        p = self.pos.get(pid)
        if region is not None and p is not None and region.contains(p):
            self._report("avoid_safety", (pid,), f"robot {pid} at {p} inside its avoid region")
        else:
            self._still_pid("avoid_safety", pid)

    # -- online use ---------------------------------------------------------

    def attach(self, engine: Any, halt_on_violation: bool = False) -> None:
        engine.trace.sinks.append(self.feed)

        def after(_ev: Any) -> None:
            for v in self.end_event():
                engine.emit("violation", "world", **v.to_dict())
                if halt_on_violation:
                    engine.halt(f"violation:{v.property}")

        engine.post_event.append(after)


def layout_from_header(header: dict[str, Any]) -> Layout:
    geom = (header.get("scenario") or {}).get("geometry")
    return Layout.from_dict(geom) if geom else default_layout()


def replay(trace: Trace, layout: Layout | None = None) -> list[Violation]:
    """Run the monitor over a finished trace."""
    mon = Monitor(layout or layout_from_header(trace.header))
    group: int | None = None
    for rec in trace.records:
        if rec.ev != group:
            if group is not None and group >= 0:
                mon.end_event()
            group = rec.ev
        mon.feed(rec)
    if group is not None and group >= 0:
        mon.end_event()
    return mon.violations


def recorded_violations(trace: Trace, properties: Iterable[str] = PROPERTIES) -> list[Violation]:
    props = set(properties)
    return [
        Violation.from_dict({**r.payload, "time": r.time})
        for r in trace.records
        if r.kind == "violation" and r.payload.get("property") in props
    ]


# -- offline geocast checks ------------------------------------------------


class _Positions:
    def __init__(self, trace: Trace):
        self.times: dict[Any, list[int]] = defaultdict(list)
        self.points: dict[Any, list[Point]] = defaultdict(list)
        self.spawned: dict[Any, int] = {}
        for r in trace.records:
            if r.kind == "spawn":
                self.spawned[r.pid] = r.time
                if "pose" in r.payload:
                    self._add(r.pid, r.time, tuple(r.payload["pose"]))
            elif r.kind == "motion_tick":
                for q, x, y in r.payload["poses"]:
                    self._add(q, r.time, (x, y))

    def _add(self, pid: Any, t: int, p: Point) -> None:
        self.times[pid].append(t)
        self.points[pid].append(p)

    def during(self, pid: Any, t0: int, t1: int) -> list[Point | None]:
        ts = self.times.get(pid)
        if not ts:
            return [None]
        i = bisect.bisect_right(ts, t0) - 1
        j = bisect.bisect_right(ts, t1)
        pts = self.points[pid]
        out: list[Point | None] = [pts[i] if i >= 0 else None]
        out.extend(pts[max(i + 1, 0) : j])
        return out

    def at(self, pid: Any, t: int) -> Point | None:
        ts = self.times.get(pid)
        if not ts:
            return None
        i = bisect.bisect_right(ts, t) - 1
        return self.points[pid][i] if i >= 0 else None


def _net_header(trace: Trace) -> dict[str, Any]:
    head = trace.header
    return head.get("net") or (head.get("scenario") or {}).get("net") or {}


def _max_delay(net: dict[str, Any]) -> int:
    kind = net.get("delay_distribution", "exponential")
    mean = int(net.get("mean_delay", 100))
    if kind == "constant":
        return mean
    if kind == "uniform":
        return int(net["delay_bounds"][1])
    return 10 * mean


def check_geocast_trace(trace: Trace) -> list[Violation]:
    """Exclusion, inclusion and latency of every geocast in a finished trace.

    Inclusion is only asserted when the run was loss-free, crash-free and
    every attempt's delay is bounded by half the geocast window.
    """
    pos = _Positions(trace)
    casts = []
    deliveries: dict[int, dict[Any, int]] = defaultdict(dict)
    crashed = False
    for r in trace.records:
        if r.kind == "msg_send" and r.payload.get("dst") == "*":
            p = r.payload
            for k in ("msg", "region", "d"):
                if k not in p:
                    raise MalformedTrace(f"geocast record at t={r.time} lacks {k!r}")
            casts.append((p["msg"], r.pid, r.time, region_from_dict(p["region"]), int(p["d"])))
        elif r.kind == "msg_deliver":
            deliveries[r.payload["msg"]].setdefault(r.pid, r.time)
        elif r.kind == "crash":
            crashed = True
    net = _net_header(trace)
    loss = float(net.get("loss_rate", 0.0))
    out: list[Violation] = []
    for msg, src, t0, region, d in casts:
        t1 = t0 + d
        got = deliveries.get(msg, {})
        inclusion_applies = loss == 0.0 and not crashed and _max_delay(net) <= d / 2
        for pid, spawned_at in sorted(pos.spawned.items(), key=lambda kv: str(kv[0])):
            if pid == src or spawned_at > t0:
                continue
            seen = [in_region(region, p) for p in pos.during(pid, t0, t1)]
            when = got.get(pid)
            if when is not None and when > t1:
                out.append(Violation("geocast_latency", when, (msg, pid), f"msg {msg} reached {pid} at {when} > {t1}"))
            if not any(seen) and when is not None:
                out.append(Violation("geocast_exclusion", when, (msg, pid), f"msg {msg} delivered to {pid}, outside {region}"))
            if inclusion_applies and all(seen) and (when is None or when > t1):
                out.append(Violation("geocast_inclusion", t1, (msg, pid), f"msg {msg} not delivered to {pid} by {t1}"))
    return out


# -- offline registration checks -----------------------------------------


def registration_results(trace: Trace) -> list[tuple[int, str, int, frozenset[int]]]:
    """Finalised ``(pid, xid, ts, rList)`` tuples in trace order."""
    out = []
    pending: dict[tuple[int, str], list[int]] = {}
    for r in trace.records:
        if r.kind != "gvh_publish" or not r.payload["slot"].startswith("reg/"):
            continue
        inst, name = _split_slot(r.payload["slot"])
        xid = inst[len("reg/") :]
        if name == "rList":
            if r.payload["value"] is not None:
                pending[(r.pid, xid)] = r.payload["value"]
            else:
                pending.pop((r.pid, xid), None)
        elif name == "ts" and r.payload["value"] is not None:
            members = pending.pop((r.pid, xid), None)
            if members is None:
                raise MalformedTrace(f"ts published without rList by {r.pid} at {r.time}")
            out.append((r.pid, xid, int(r.payload["value"]), frozenset(members)))
    return out


def registration_invocations(trace: Trace) -> dict[tuple[int, str], list[int]]:
    """Times each process (re)started registration, per instance."""
    starts: dict[tuple[int, str], list[int]] = defaultdict(list)
    last: dict[tuple[int, str], str] = {}
    for r in trace.records:
        if r.kind != "gvh_publish" or not r.payload["slot"].startswith("reg/"):
            continue
        inst, name = _split_slot(r.payload["slot"])
        if name != "phase":
            continue
        key = (r.pid, inst[len("reg/") :])
        phase = r.payload["value"]
        if phase == "announcing" or (phase == "echoing" and last.get(key) == "done"):
            starts[key].append(r.time)
        last[key] = phase
    return starts


def check_registration_trace(trace: Trace, d: int, d1: int) -> list[Violation]:
    results = registration_results(trace)
    starts = registration_invocations(trace)
    out: list[Violation] = []
    for i, (p, xid, ts, members) in enumerate(results):
        for q, xq, tq, mq in results[i + 1 :]:
            if q != p and xq == xid and abs(tq - ts) <= d and mq != members:
                out.append(
                    Violation(
                        "registration_agreement",
                        max(ts, tq),
                        (xid, p, q),
                        f"{p}@{ts} has {sorted(members)} but {q}@{tq} has {sorted(mq)}",
                    )
                )
        for m in sorted(members):
            if not any(ts - d1 <= t <= ts for t in starts.get((m, xid), ())):
                out.append(
                    Violation("registration_soundness", ts, (xid, p, m), f"{m} in rList of {p}@{ts} without registering")
                )
    return out


# -- progress ------------------------------------------------------------


@dataclass
class ProgressReport:
    traversal: dict[int, int] = field(default_factory=dict)
    lower_bound: dict[int, float] = field(default_factory=dict)
    mutex_wait: dict[int, list[int]] = field(default_factory=dict)
    non_departed: list[int] = field(default_factory=list)
    stuck: list[int] = field(default_factory=list)
    assumptions_held: bool = True

    @property
    def max_traversal(self) -> int | None:
        return max(self.traversal.values()) if self.traversal else None

    @property
    def max_mutex_wait(self) -> int | None:
        waits = [w for ws in self.mutex_wait.values() for w in ws]
        return max(waits) if waits else None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["traversal"] = {str(k): v for k, v in self.traversal.items()}
        d["lower_bound"] = {str(k): v for k, v in self.lower_bound.items()}
        d["mutex_wait"] = {str(k): v for k, v in self.mutex_wait.items()}
        d["max_traversal"] = self.max_traversal
        d["max_mutex_wait"] = self.max_mutex_wait
        return d


def progress_report(trace: Trace, layout: Layout | None = None, v_max: float | None = None) -> ProgressReport:
    layout = layout or layout_from_header(trace.header)
    if v_max is None:
        v_max = float(((trace.header.get("scenario") or {}).get("kinematics") or {}).get("v_max", 0.3))
    rep = ProgressReport()
    spawn: dict[int, int] = {}
    requested: dict[int, int] = {}
    crashed = False
    for r in trace.records:
        if r.kind == "spawn" and "route" in r.payload:
            pid = r.pid
            spawn[pid] = int(r.payload["start_at"])
            route = r.payload["route"]
            pts = [tuple(r.payload["pose"])] + [layout.zones[z].center for z in route[1:]]
            rep.lower_bound[pid] = polyline_length(pts) / v_max * 1000.0
        elif r.kind == "gvh_publish" and r.payload["slot"].startswith("mux/"):
            name = _split_slot(r.payload["slot"])[1]
            if name == "request" and r.payload["value"] is not None:
                requested[r.pid] = r.time
            elif name == "crit" and r.payload["value"] is True and r.pid in requested:
                rep.mutex_wait.setdefault(r.pid, []).append(r.time - requested.pop(r.pid))
        elif r.kind == "done":
            if r.pid not in spawn:
                raise MalformedTrace(f"done record for unknown vehicle {r.pid}")
            rep.traversal[r.pid] = r.time - spawn[r.pid]
        elif r.kind == "app_loc" and r.payload["loc"] == "stuck":
            rep.stuck.append(r.pid)
        elif r.kind == "crash":
            crashed = True
    rep.non_departed = sorted(p for p in spawn if p not in rep.traversal)
    loss = float(_net_header(trace).get("loss_rate", 0.0))
    rep.assumptions_held = loss == 0.0 and not crashed
    return rep
