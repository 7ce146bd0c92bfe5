"""Deterministic discrete-event core.

Virtual time is an integer number of milliseconds. Events are ordered by
``(fire_at, seq)`` where ``seq`` is the insertion counter, so simultaneous
events replay in the order they were scheduled.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

from .trace import WORLD, Trace, TraceRecord

DEFAULT_STEP_PERIOD = 100


class SchedulingInPast(ValueError):
    pass


class DuplicatePid(ValueError):
    pass


class UnknownPid(KeyError):
    pass


class InvalidDistributionParam(ValueError):
    pass


class EventKind(str, Enum):
    MESSAGE = "MessageDelivery"
    TIMER = "TimerFire"
    MOTION = "MotionTick"
    APP = "AppStep"
    CRASH = "Crash"


@dataclass(eq=False)
class Event:
    fire_at: int
    seq: int
    kind: EventKind
    target: int | str
    fn: Callable[..., Any] | None = None
    args: tuple = ()
    cancelled: bool = False

    def __lt__(self, other: "Event") -> bool:
        return (self.fire_at, self.seq) < (other.fire_at, other.seq)


def _stream_key(stream_id: str) -> int:
    # builtin hash() is salted per interpreter, so derive keys from a digest
    return int.from_bytes(hashlib.sha256(stream_id.encode()).digest()[:8], "little")


class RngStreams:
    """Independent named random streams derived from one master seed."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._streams: dict[str, np.random.Generator] = {}

    def get(self, stream_id: str) -> np.random.Generator:
        gen = self._streams.get(stream_id)
        if gen is None:
            ss = np.random.SeedSequence(self.master_seed, spawn_key=(_stream_key(stream_id),))
            gen = self._streams[stream_id] = np.random.Generator(np.random.PCG64(ss))
        return gen

    def draw(self, stream_id: str, distribution: str, param: float | None = None) -> float:
        gen = self.get(stream_id)
        if distribution == "uniform01":
            return float(gen.random())
        if distribution == "exponential":
            if param is None or not param > 0:
                raise InvalidDistributionParam(f"exponential mean must be > 0, got {param!r}")
            return float(gen.exponential(param))
        if distribution == "bernoulli":
            if param is None or not 0.0 <= param <= 1.0:
                raise InvalidDistributionParam(f"bernoulli p must lie in [0, 1], got {param!r}")
            # one draw per call even at the degenerate ends keeps stream positions aligned
            u = gen.random()
            return 1 if u < param else 0
        raise InvalidDistributionParam(f"unknown distribution {distribution!r}")

    def integers(self, stream_id: str, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]`` inclusive."""
        return int(self.get(stream_id).integers(lo, hi + 1))


StepFn = Callable[[int], bool]


@dataclass
class ProcessEntry:
    pid: int
    step: StepFn
    start_at: int
    step_period: int
    terminal: bool = False
    crashed: bool = False


class Engine:
    """Single-threaded event loop with a virtual millisecond clock.

    Processes are cooperative step functions ``step(now) -> terminal``; the
    engine invokes each one every ``step_period`` ms until it reports a
    terminal state or crashes.
    """

    def __init__(self, seed: int = 0, step_period: int = DEFAULT_STEP_PERIOD, header: dict | None = None):
        self._now = 0
        self._seq = 0
        self._queue: list[Event] = []
        self._live = 0
        self.rng = RngStreams(seed)
        self.step_period = int(step_period)
        self.processes: dict[int, ProcessEntry] = {}
        self.trace = Trace(header=dict(header or {}))
        self.post_event: list[Callable[[Event], None]] = []
        self.halted: str | None = None
        self._current_ev = -1

    # -- clock & scheduling -------------------------------------------------

    def now(self) -> int:
        return self._now

    def schedule(self, event: Event) -> int:
        if event.fire_at < self._now:
            raise SchedulingInPast(f"fire_at={event.fire_at} < now={self._now}")
        self._seq += 1
        event.seq = self._seq
        heapq.heappush(self._queue, event)
        self._live += 1
        return event.seq

    def at(self, fire_at: int, kind: EventKind, target: int | str, fn: Callable[..., Any], *args: Any) -> Event:
        ev = Event(int(fire_at), 0, kind, target, fn, args)
        self.schedule(ev)
        return ev

    def after(self, delay: int, kind: EventKind, target: int | str, fn: Callable[..., Any], *args: Any) -> Event:
        return self.at(self._now + int(delay), kind, target, fn, *args)

    def cancel(self, event: Event) -> None:
        if not event.cancelled:
            event.cancelled = True
            self._live -= 1

    def pending(self) -> int:
        return self._live

    # -- randomness ---------------------------------------------------------

    def draw(self, stream_id: str, distribution: str, param: float | None = None) -> float:
        return self.rng.draw(stream_id, distribution, param)

    # -- tracing ------------------------------------------------------------

    def emit(self, kind: str, pid: int | str, **payload: Any) -> TraceRecord:
        rec = TraceRecord(self._now, self._current_ev, pid, kind, payload)
        self.trace.append(rec)
        return rec

    @property
    def current_event(self) -> int:
        return self._current_ev

    # -- processes ----------------------------------------------------------

    def spawn_process(
        self,
        pid: int,
        behavior: StepFn,
        start_at: int = 0,
        step_period: int | None = None,
        **spawn_info: Any,
    ) -> None:
        if pid in self.processes:
            raise DuplicatePid(pid)
        entry = ProcessEntry(pid, behavior, int(start_at), int(step_period or self.step_period))
        self.processes[pid] = entry
        self.emit("spawn", pid, start_at=entry.start_at, **spawn_info)
        self.at(entry.start_at, EventKind.APP, pid, self._app_step, entry)

    def _app_step(self, entry: ProcessEntry) -> None:
        if entry.crashed or entry.terminal:
            return
        if entry.step(self._now):
            entry.terminal = True
            return
        self.after(entry.step_period, EventKind.APP, entry.pid, self._app_step, entry)

    def is_crashed(self, pid: int) -> bool:
        entry = self.processes.get(pid)
        return entry is not None and entry.crashed

    def mark_crashed(self, pid: int) -> None:
        entry = self.processes.get(pid)
        if entry is None:
            raise UnknownPid(pid)
        if not entry.crashed:
            entry.crashed = True
            self.emit("crash", pid)

    def all_terminal(self) -> bool:
        return all(p.terminal or p.crashed for p in self.processes.values())

    def halt(self, reason: str) -> None:
        if self.halted is None:
            self.halted = reason

    # -- main loop ----------------------------------------------------------

    def run(self, stop: int | str = "all_done", max_time: int | None = None) -> Trace:
        """Dispatch events until the stop condition.

        ``stop`` is an integer time bound, ``"quiescence"`` (queue empty) or
        ``"all_done"`` (every process terminal or crashed). ``max_time``
        caps the latter two.
        """
        until: int | None
        if isinstance(stop, int) and not isinstance(stop, bool):
            until = stop
        elif stop in ("quiescence", "all_done"):
            until = max_time
        else:
            raise ValueError(f"bad stop condition {stop!r}")

        self._current_ev = -1
        self.emit("start", WORLD, stop=str(stop))
        queue = self._queue
        while queue and self.halted is None:
            ev = queue[0]
            if ev.cancelled:
                heapq.heappop(queue)
                continue
            if until is not None and ev.fire_at > until:
                break
            heapq.heappop(queue)
            self._live -= 1
            self._now = ev.fire_at
            self._current_ev = ev.seq
            ev.fn(*ev.args)
            for hook in self.post_event:
                hook(ev)
            if stop == "all_done" and self.processes and self.all_terminal():
                break
        self._current_ev = -1
        if until is not None and self.halted is None and self._now < until and isinstance(stop, int):
            self._now = until
        self.emit("stop", WORLD, halted=self.halted)
        return self.trace
