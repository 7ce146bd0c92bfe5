"""Randomised harnesses for the primitives outside the intersection scenario.

Each harness builds its own engine and network, draws every random choice
from named engine streams, and returns a small result record. The same seed
always reproduces the same run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .engine import Engine, EventKind
from .geometry import Disc, Point
from .monitor import Monitor, Violation, check_geocast_trace
from .net import NetConfig, Network
from .node import Node, wire_geocast_flags
from .physics import Kinematics, World
from .primitives.election import Election
from .primitives.mutex import Mutex
from .trace import Trace

ZONES8 = tuple("ABCDEFGH")


def _violations(trace: Trace) -> list[Violation]:
    return [Violation.from_dict({**r.payload, "time": r.time}) for r in trace.records if r.kind == "violation"]


# -- mutex stress -----------------------------------------------------------


@dataclass
class StressResult:
    seed: int
    n: int
    net: NetConfig
    trace: Trace
    violations: list[Violation]
    grants: int
    releases: int
    requests: int
    unfinished: list[int]

    @property
    def events(self) -> list[tuple[int, str, int, tuple[str, ...]]]:
        """``(time, "grant"|"release", pid, zones)`` in trace order."""
        out = []
        for r in self.trace.records:
            if r.kind == "gvh_publish" and r.payload["slot"].endswith(".crit_set"):
                out.append((r.time, r.pid, tuple(r.payload["value"])))
        seq = []
        held: dict[int, set[str]] = {}
        for t, pid, zs in out:
            before = held.get(pid, set())
            now = set(zs)
            if now - before:
                seq.append((t, "grant", pid, tuple(sorted(now - before))))
            if before - now:
                seq.append((t, "release", pid, tuple(sorted(before - now))))
            held[pid] = now
        return seq


class _StressProc:
    """Think, request a random zone set, hold it for a while, release, repeat."""

    def __init__(self, node: Node, mux: Mutex, plist: tuple[int, ...], rounds: int, rng: Any, zones: tuple[str, ...],
                 max_zones: int, hold: tuple[int, int], think: tuple[int, int]):
        self.node = node
        self.mux = mux
        self.plist = plist
        self.rounds = rounds
        self.rng = rng
        self.zones = zones
        self.max_zones = max_zones
        self.hold = hold
        self.think = think
        self.state = "think"
        self.until = int(rng.integers(think[0], think[1] + 1))
        self.requests = 0

    def step(self, now: int) -> bool:
        if self.state == "think" and now >= self.until:
            k = int(self.rng.integers(1, min(self.max_zones, len(self.zones)) + 1))
            zs = sorted(self.rng.choice(len(self.zones), size=k, replace=False).tolist())
            self.requests += 1
            self.node.run(self.mux, self.mux.do_mutex([self.zones[i] for i in zs], self.plist))
            self.state = "wait"
        elif self.state == "wait" and self.mux.crit:
            self.state = "hold"
            self.until = now + int(self.rng.integers(self.hold[0], self.hold[1] + 1))
        elif self.state == "hold" and now >= self.until:
            self.node.run(self.mux, self.mux.release(sorted(self.mux.crit_set)))
            self.rounds -= 1
            if self.rounds == 0:
                self.state = "done"
                return True
            self.state = "think"
            self.until = now + int(self.rng.integers(self.think[0], self.think[1] + 1))
        return False


def random_net(eng: Engine, max_loss: float) -> NetConfig:
    rng = eng.rng.get("workload.net")
    mean = int(rng.integers(5, 201))
    loss = float(rng.uniform(0.0, max_loss))
    if rng.random() < 0.5:
        return NetConfig(mean_delay=mean, loss_rate=loss)
    return NetConfig(mean_delay=mean, delay_distribution="uniform", delay_bounds=(0, 2 * mean), loss_rate=loss)


def mutex_stress(
    seed: int,
    n: int | None = None,
    *,
    net: NetConfig | None = None,
    max_loss: float = 0.3,
    rounds: int = 2,
    zones: tuple[str, ...] = ZONES8,
    max_zones: int = 3,
    mutex_cls: type[Mutex] = Mutex,
    max_time: int = 3_600_000,
) -> StressResult:
    """Random zone-set requests from ``n`` processes (2..20 when not given)."""
    eng = Engine(seed, step_period=20)
    rng = eng.rng.get("workload")
    if n is None:
        n = int(rng.integers(2, 21))
    if net is None:
        net = random_net(eng, max_loss)
    eng.trace.header.update({"workload": "mutex_stress", "seed": seed, "n": n, "net": net.to_dict()})
    network = Network(eng, net)
    mon = Monitor()
    mon.attach(eng)
    plist = tuple(range(n))
    procs = []
    for pid in plist:
        node = Node(pid, eng, network, send_deadline=max_time)
        mux = node.add(mutex_cls(pid, "s", node.gvh))
        procs.append(_StressProc(node, mux, plist, rounds, rng, zones, max_zones, (20, 300), (0, 300)))
    for pid, proc in enumerate(procs):
        eng.spawn_process(pid, proc.step)
    trace = eng.run("all_done", max_time=max_time)
    res = StressResult(seed, n, net, trace, _violations(trace), 0, 0, sum(p.requests for p in procs),
                       [p.node.pid for p in procs if p.state != "done"])
    ev = res.events
    res.grants = sum(1 for e in ev if e[1] == "grant")
    res.releases = sum(1 for e in ev if e[1] == "release")
    return res


# -- geocast ----------------------------------------------------------------


@dataclass
class GeocastResult:
    seed: int
    net: NetConfig
    trace: Trace
    violations: list[Violation]
    region: Disc
    window: int
    inside: list[int] = field(default_factory=list)
    delivered: dict[int, set[int]] = field(default_factory=dict)
    flags: list[int] = field(default_factory=list)


def geocast_run(
    seed: int,
    *,
    n: int = 12,
    loss_rate: float | None = None,
    bounded: bool = False,
    moving: bool = False,
    casts: int = 3,
    arena: float = 5.0,
) -> GeocastResult:
    """One sender geocasts a few messages to randomly placed receivers.

    ``bounded`` draws uniform delays no larger than half the window, which is
    the condition under which inclusion is guaranteed on a loss-free network.
    """
    eng = Engine(seed)
    rng = eng.rng.get("workload")
    window = int(rng.integers(200, 2001))
    if loss_rate is None:
        loss_rate = float(rng.uniform(0.0, 0.5))
    if bounded:
        net = NetConfig(mean_delay=window // 4, delay_distribution="uniform", delay_bounds=(0, window // 2),
                        loss_rate=loss_rate)
    else:
        net = NetConfig(mean_delay=int(rng.integers(10, 400)), loss_rate=loss_rate)
    eng.trace.header.update({"workload": "geocast", "seed": seed, "net": net.to_dict()})
    world = World(eng, Kinematics(v_max=0.5))
    network = Network(eng, net, world.position_of)
    center = (float(rng.uniform(-arena / 2, arena / 2)), float(rng.uniform(-arena / 2, arena / 2)))
    region = Disc(center, float(rng.uniform(0.5, arena)))
    nodes: dict[int, Node] = {}
    for pid in range(n):
        pos: Point = (float(rng.uniform(-arena, arena)), float(rng.uniform(-arena, arena)))
        world.add_body(pid, pos)
        nodes[pid] = Node(pid, eng, network)
        eng.spawn_process(pid, lambda now: True, pose=[pos[0], pos[1]])
    wire_geocast_flags(network, nodes)
    if moving:
        for pid in range(1, n):
            target = (float(rng.uniform(-arena, arena)), float(rng.uniform(-arena, arena)))
            eng.at(0, EventKind.APP, pid, world.do_move, pid, target)
    sender = nodes[0]
    for k in range(casts):
        t = int(rng.integers(0, 2 * window))
        eng.at(t, EventKind.APP, 0, network.geocast_send, 0, {"type": "DATA", "k": k}, region, window)
    trace = eng.run("quiescence", max_time=120_000)
    inside = [pid for pid in range(1, n) if region.contains(world.position_of(pid))] if not moving else []
    delivered: dict[int, set[int]] = {}
    for r in trace.of_kind("msg_deliver"):
        delivered.setdefault(r.payload["msg"], set()).add(r.pid)
    flags = [
        r.payload["value"] for r in trace.of_kind("gvh_publish") if r.pid == sender.pid and r.payload["slot"] == "geocast.Gcastflag"
    ]
    return GeocastResult(seed, net, trace, check_geocast_trace(trace), region, window, inside, delivered, flags)


# -- election ---------------------------------------------------------------


@dataclass
class ElectionResult:
    seed: int
    algorithm: str
    plist: tuple[int, ...]
    crashed: list[int]
    leaders: dict[int, Any]
    trace: Trace
    end_time: int

    @property
    def agreed(self) -> bool:
        live = [self.leaders[p] for p in self.plist if p not in self.crashed]
        return len(set(map(str, live))) == 1 and live[0] not in (None, "fail")


def election_run(
    seed: int,
    *,
    n: int = 5,
    algorithm: str = "bully",
    crash: list[tuple[int, int]] = (),  # type: ignore[assignment]
    net: NetConfig | None = None,
    stagger: int = 0,
) -> ElectionResult:
    eng = Engine(seed)
    net = net or NetConfig(mean_delay=100)
    net.crash_schedule = list(crash)
    eng.trace.header.update({"workload": "election", "seed": seed, "algorithm": algorithm, "net": net.to_dict()})
    network = Network(eng, net)
    plist = tuple(range(n))
    for pid in plist:
        network.attach(pid, lambda m: None)
    # crashes first so a crash at t=0 precedes the victim's first step
    network.install_crash_schedule()
    rng = eng.rng.get("workload")
    elections: dict[int, Election] = {}
    for pid in plist:
        node = Node(pid, eng, network, send_deadline=60_000)
        el = node.add(
            Election(pid, "e", node.gvh, algorithm, ballot=lambda: eng.rng.integers("election.ballot", 0, 2**31 - 1))
        )
        elections[pid] = el
        start = int(rng.integers(0, stagger + 1))

        def start_election(now: int, node: Node = node, el: Election = el) -> bool:
            if el.phase == "idle":
                node.run(el, el.do_election(plist, now))
            return True

        eng.spawn_process(pid, start_election, start)
    trace = eng.run("quiescence", max_time=200_000)
    # the end time is the last decision, not the last stale timer
    decided = [r.time for r in trace.of_kind("gvh_publish") if r.payload["value"] is not None]
    return ElectionResult(
        seed,
        algorithm,
        plist,
        [p for p, _ in crash],
        {p: e.leader for p, e in elections.items()},
        trace,
        max(decided) if decided else 0,
    )
