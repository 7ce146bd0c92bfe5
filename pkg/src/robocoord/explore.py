"""Exhaustive interleaving search over small mutex instances.

The search drives the real :class:`Mutex` state machines, with no engine
and no clock. From every state any process may take its next scripted step
(request, release) and any in-flight message may be delivered. Messages are
never lost, and every delivery order is tried. Each reachable state is
checked for overlapping holdings, and every complete run contributes its
sequence of grant/release events.

:func:`simulated_ordering` runs the same instance on the simulator so the two
sets of orderings can be compared.
"""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass, field
from typing import Iterable

from .engine import Engine
from .net import NetConfig, Network
from .node import Node
from .primitives.base import Send
from .primitives.mutex import Mutex
from .trace import Trace

Label = tuple[str, int]  # ("grant" | "release", pid)
Ordering = tuple[Label, ...]


@dataclass(frozen=True)
class Instance:
    """Each process requests ``requests[pid]`` once per round, then releases it."""

    requests: tuple[tuple[str, ...], ...]
    rounds: int = 1

    @property
    def n(self) -> int:
        return len(self.requests)

    @property
    def zones(self) -> tuple[str, ...]:
        return tuple(sorted({z for r in self.requests for z in r}))


def small_instances() -> list[Instance]:
    """Every 2-3 process instance over 1-2 zones, up to renaming of processes."""
    sets = [("A",), ("B",), ("A", "B")]
    out = []
    seen = set()
    for n in (2, 3):
        for combo in _product(sets, n):
            key = tuple(sorted(combo))
            if key in seen or not {"A"} <= {z for r in combo for z in r}:
                continue
            seen.add(key)
            out.append(Instance(key))
    return out


def _product(items: list, n: int) -> Iterable[tuple]:
    if n == 0:
        yield ()
        return
    for rest in _product(items, n - 1):
        for it in items:
            yield rest + (it,)


@dataclass
class _State:
    muxes: list[Mutex]
    phase: list[str]
    rounds: list[int]
    inflight: list[tuple[int, int, str]]

    def clone(self) -> "_State":
        muxes = []
        for m in self.muxes:
            c = copy.copy(m)
            c.oks = set(m.oks)
            c.crit_set = set(m.crit_set)
            c.deferred = list(m.deferred)
            muxes.append(c)
        return _State(muxes, list(self.phase), list(self.rounds), list(self.inflight))

    def key(self) -> tuple:
        return (
            tuple(m.snapshot() for m in self.muxes),
            tuple(self.phase),
            tuple(self.rounds),
            tuple(sorted(self.inflight)),
        )


@dataclass
class ExploreResult:
    instance: Instance
    states: int
    violations: list[tuple]
    orderings: frozenset[Ordering]
    truncated: int = 0
    deadlocks: int = 0

    @property
    def complete(self) -> bool:
        return self.truncated == 0


@dataclass
class _Search:
    instance: Instance
    mutex_cls: type[Mutex]
    max_depth: int
    memo: dict[tuple, frozenset[Ordering]] = field(default_factory=dict)
    violations: list[tuple] = field(default_factory=list)
    truncated: int = 0
    deadlocks: int = 0

    def initial(self) -> _State:
        n = self.instance.n
        return _State(
            [self.mutex_cls(p, "e") for p in range(n)], ["idle"] * n, [self.instance.rounds] * n, []
        )

    def successors(self, s: _State) -> list[tuple[Label | None, _State]]:
        out = []
        plist = tuple(range(self.instance.n))
        for p in range(self.instance.n):
            if s.phase[p] == "idle" and s.rounds[p] > 0:
                t = s.clone()
                t.phase[p] = "wait"
                self._emit(t, p, t.muxes[p].do_mutex(self.instance.requests[p], plist))
                out.append((self._granted(s, t, p), t))
            elif s.phase[p] == "hold":
                t = s.clone()
                self._emit(t, p, t.muxes[p].release(sorted(t.muxes[p].crit_set)))
                t.rounds[p] -= 1
                t.phase[p] = "idle" if t.rounds[p] > 0 else "done"
                out.append((("release", p), t))
        for i, msg in enumerate(sorted(set(s.inflight))):
            t = s.clone()
            t.inflight.remove(msg)
            src, dst, raw = msg
            self._emit(t, dst, t.muxes[dst].on_message(json.loads(raw), src))
            out.append((self._granted(s, t, dst), t))
        return out

    @staticmethod
    def _emit(t: _State, src: int, effects: list) -> None:
        for eff in effects:
            assert isinstance(eff, Send)
            t.inflight.append((src, eff.dst, json.dumps(eff.payload, sort_keys=True)))

    @staticmethod
    def _granted(before: _State, after: _State, p: int) -> Label | None:
        if after.phase[p] == "wait" and after.muxes[p].crit and not before.muxes[p].crit:
            after.phase[p] = "hold"
            return ("grant", p)
        return None

    def check(self, s: _State) -> None:
        for a in range(self.instance.n):
            for b in range(a + 1, self.instance.n):
                common = s.muxes[a].crit_set & s.muxes[b].crit_set
                if common:
                    self.violations.append((a, b, tuple(sorted(common))))

    def orderings(self, s: _State, depth: int) -> frozenset[Ordering]:
        k = s.key()
        hit = self.memo.get(k)
        if hit is not None:
            return hit
        self.check(s)
        if depth >= self.max_depth:
            self.truncated += 1
            return frozenset()
        succ = self.successors(s)
        if not succ:
            if any(ph != "done" for ph in s.phase):
                self.deadlocks += 1
                result: frozenset[Ordering] = frozenset()
            else:
                result = frozenset({()})
        else:
            acc: set[Ordering] = set()
            for label, t in succ:
                for rest in self.orderings(t, depth + 1):
                    acc.add(((label,) + rest) if label is not None else rest)
            result = frozenset(acc)
        self.memo[k] = result
        return result


def explore(instance: Instance, mutex_cls: type[Mutex] = Mutex, max_depth: int = 200) -> ExploreResult:
    search = _Search(instance, mutex_cls, max_depth)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * max_depth + 1000))
    try:
        orderings = search.orderings(search.initial(), 0)
    finally:
        sys.setrecursionlimit(limit)
    return ExploreResult(instance, len(search.memo), search.violations, orderings, search.truncated, search.deadlocks)


# -- the same instance on the simulator --------------------------------------


def ordering_from_trace(trace: Trace) -> Ordering:
    held: dict[int, bool] = {}
    out: list[Label] = []
    for r in trace.records:
        if r.kind == "gvh_publish" and r.payload["slot"].endswith(".crit"):
            now = bool(r.payload["value"])
            if now and not held.get(r.pid, False):
                out.append(("grant", r.pid))
            elif not now and held.get(r.pid, False):
                out.append(("release", r.pid))
            held[r.pid] = now
    return tuple(out)


def simulated_ordering(instance: Instance, seed: int, mutex_cls: type[Mutex] = Mutex, mean_delay: int = 100) -> Ordering:
    eng = Engine(seed, step_period=10)
    net = Network(eng, NetConfig(mean_delay=mean_delay))
    rng = eng.rng.get("workload")
    plist = tuple(range(instance.n))
    for p in plist:
        node = Node(p, eng, net)
        mux = node.add(mutex_cls(p, "e", node.gvh))
        state = {"phase": "idle", "rounds": instance.rounds, "until": int(rng.integers(0, 10 * mean_delay))}

        def step(now: int, node: Node = node, mux: Mutex = mux, p: int = p, st: dict = state) -> bool:
            if st["phase"] == "idle" and now >= st["until"]:
                st["phase"] = "wait"
                node.run(mux, mux.do_mutex(instance.requests[p], plist))
            if st["phase"] == "wait" and mux.crit:
                st["phase"] = "hold"
                st["until"] = now + int(rng.integers(0, 6 * mean_delay))
            elif st["phase"] == "hold" and now >= st["until"]:
                node.run(mux, mux.release(sorted(mux.crit_set)))
                st["rounds"] -= 1
                if st["rounds"] == 0:
                    return True
                st["phase"] = "idle"
                st["until"] = now + int(rng.integers(0, 4 * mean_delay))
            return False

        eng.spawn_process(p, step)
    trace = eng.run("all_done", max_time=600_000)
    return ordering_from_trace(trace)
