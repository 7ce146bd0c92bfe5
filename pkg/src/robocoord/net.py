"""Simulated wireless network: unicast, reliable unicast and geocast.

Every transmission attempt is an independent trial: it is lost with
probability ``loss_rate`` and otherwise arrives after a sampled delay.
Reliable sends and geocasts retransmit every ``retx_period`` ms to each
target that has not acknowledged yet, until the deadline. Acks travel over
the same lossy channel.

Geocast deliveries are filtered at the receiver: a copy is dropped when the
receiver is outside the region at arrival time or when it arrives after the
geocast window ``[t0, t0 + d]`` has closed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .engine import Engine, EventKind, UnknownPid
from .geometry import EVERYWHERE, Point, Region, in_region

DELAY_KINDS = ("constant", "uniform", "exponential")


class SenderCrashed(RuntimeError):
    pass


class ConfigError(ValueError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name
        self.msg = msg


@dataclass
class NetConfig:
    mean_delay: int = 100
    delay_distribution: str = "exponential"
    delay_bounds: tuple[int, int] | None = None
    loss_rate: float = 0.0
    crash_schedule: list[tuple[int, int]] = field(default_factory=list)

    def validate(self, prefix: str = "net") -> None:
        if not isinstance(self.mean_delay, int) or self.mean_delay < 0:
            raise ConfigError(f"{prefix}.mean_delay", f"must be a non-negative integer, got {self.mean_delay!r}")
        if self.delay_distribution not in DELAY_KINDS:
            raise ConfigError(f"{prefix}.delay_distribution", f"must be one of {DELAY_KINDS}")
        if self.delay_distribution == "uniform":
            if self.delay_bounds is None:
                raise ConfigError(f"{prefix}.delay_bounds", "uniform delays need [lo, hi]")
            lo, hi = self.delay_bounds
            if not 0 <= lo <= hi:
                raise ConfigError(f"{prefix}.delay_bounds", f"need 0 <= lo <= hi, got {self.delay_bounds}")
        if self.delay_distribution == "exponential" and self.mean_delay == 0:
            raise ConfigError(f"{prefix}.mean_delay", "exponential delays need a positive mean")
        if not 0.0 <= float(self.loss_rate) <= 1.0:
            raise ConfigError(f"{prefix}.loss_rate", f"must lie in [0, 1], got {self.loss_rate!r}")
        for i, entry in enumerate(self.crash_schedule):
            if len(entry) != 2 or entry[1] < 0:
                raise ConfigError(f"{prefix}.crash_schedule[{i}]", f"need [pid, time >= 0], got {entry!r}")

    @property
    def retx_period(self) -> int:
        return max(1, self.mean_delay // 2)

    @property
    def max_delay(self) -> int:
        if self.delay_distribution == "constant":
            return self.mean_delay
        if self.delay_distribution == "uniform":
            assert self.delay_bounds is not None
            return self.delay_bounds[1]
        return 10 * self.mean_delay

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "mean_delay": self.mean_delay,
            "delay_distribution": self.delay_distribution,
            "loss_rate": self.loss_rate,
            "crash_schedule": [list(e) for e in self.crash_schedule],
        }
        if self.delay_bounds is not None:
            d["delay_bounds"] = list(self.delay_bounds)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NetConfig":
        bounds = d.get("delay_bounds")
        return cls(
            mean_delay=d.get("mean_delay", 100),
            delay_distribution=d.get("delay_distribution", "exponential"),
            delay_bounds=tuple(bounds) if bounds is not None else None,
            loss_rate=d.get("loss_rate", 0.0),
            crash_schedule=[tuple(e) for e in d.get("crash_schedule", [])],
        )


@dataclass
class Message:
    msg_id: int
    src: int
    origin_pos: Point | None
    payload: dict[str, Any]
    sent_at: int
    dst: int | None = None
    region: Region | None = None
    deadline: int | None = None

    @property
    def is_geocast(self) -> bool:
        return self.region is not None


def deliverable(msg: Message, receiver_pos: Point | None) -> bool:
    """Receiver-side geocast filter: is the receiver inside the target region?"""
    assert msg.region is not None, "deliverable() applies to geocast messages"
    return in_region(msg.region, receiver_pos)


@dataclass(eq=False)
class _Family:
    msg: Message
    targets: set[int]
    reliable: bool
    acked: set[int] = field(default_factory=set)
    delivered: set[int] = field(default_factory=set)
    attempts: int = 0
    done: bool = False


Handler = Callable[[Message], None]


class Network:
    def __init__(self, engine: Engine, config: NetConfig, position_of: Callable[[int], Point | None] | None = None):
        config.validate()
        self.engine = engine
        self.config = config
        self.position_of = position_of or (lambda pid: None)
        self.handlers: dict[int, Handler] = {}
        self.crash_hooks: list[Callable[[int], None]] = []
        self.on_geocast_complete: Callable[[int, int], None] | None = None
        self._next_id = 0
        self._loss = float(config.loss_rate)
        self.crashed: set[int] = set()

    def attach(self, pid: int, handler: Handler) -> None:
        self.handlers[pid] = handler

    def install_crash_schedule(self) -> None:
        for pid, at in self.config.crash_schedule:
            self.crash(int(pid), int(at))

    # -- sampling -----------------------------------------------------------

    def sample_delay(self) -> int:
        cfg = self.config
        if cfg.delay_distribution == "constant":
            return cfg.mean_delay
        if cfg.delay_distribution == "uniform":
            lo, hi = cfg.delay_bounds  # type: ignore[misc]
            return self.engine.rng.integers("net.delay", lo, hi)
        x = self.engine.draw("net.delay", "exponential", cfg.mean_delay)
        return round(min(x, 10.0 * cfg.mean_delay))

    def _lost(self) -> bool:
        return self.engine.draw("net.loss", "bernoulli", self._loss) == 1

    # -- sending ------------------------------------------------------------

    def _new_message(self, src: int, payload: dict[str, Any], **kw: Any) -> Message:
        if self.is_crashed(src):
            raise SenderCrashed(src)
        self._next_id += 1
        return Message(self._next_id, src, self.position_of(src), payload, self.engine.now(), **kw)

    def unicast(self, src: int, dst: int, payload: dict[str, Any]) -> int:
        """Single best-effort attempt."""
        msg = self._new_message(src, payload, dst=dst)
        fam = _Family(msg, {dst}, reliable=False)
        self._attempt(fam, dst, first=True)
        return msg.msg_id

    def send_reliable(self, src: int, dst: int, payload: dict[str, Any], deadline: int | None = None) -> int:
        """Unicast retransmitted until acknowledged or ``deadline`` passes."""
        msg = self._new_message(src, payload, dst=dst, deadline=deadline)
        fam = _Family(msg, {dst}, reliable=True)
        self._attempt(fam, dst, first=True)
        self._arm_retx(fam)
        return msg.msg_id

    def geocast_send(self, src: int, payload: dict[str, Any], region: Region, d: int) -> int:
        msg = self._new_message(src, payload, region=region)
        msg.deadline = msg.sent_at + int(d)
        targets = {p for p in self.handlers if p != src and not self.is_crashed(p)}
        fam = _Family(msg, targets, reliable=True)
        origin = list(msg.origin_pos) if msg.origin_pos is not None else None
        self.engine.emit(
            "msg_send",
            src,
            msg=msg.msg_id,
            dst="*",
            mode="geocast",
            region=region.to_dict(),
            d=int(d),
            origin=origin,
            payload=payload,
        )
        for dst in sorted(targets):
            self._attempt(fam, dst)
        self.engine.at(msg.deadline, EventKind.TIMER, src, self._geocast_deadline, fam)
        if targets:
            self._arm_retx(fam)
        return msg.msg_id

    def broadcast(self, src: int, payload: dict[str, Any], d: int) -> int:
        return self.geocast_send(src, payload, EVERYWHERE, d)

    def _attempt(self, fam: _Family, dst: int, first: bool = False) -> None:
        msg = fam.msg
        fam.attempts += 1
        if first:
            self.engine.emit("msg_send", msg.src, msg=msg.msg_id, dst=dst, att=fam.attempts, payload=msg.payload)
        else:
            self.engine.emit("msg_send", msg.src, msg=msg.msg_id, dst=dst, att=fam.attempts)
        if self._lost():
            self.engine.emit("msg_drop", dst, msg=msg.msg_id, reason="loss")
            return
        self.engine.after(self.sample_delay(), EventKind.MESSAGE, dst, self._arrive, fam, dst)

    def _arm_retx(self, fam: _Family) -> None:
        self.engine.after(self.config.retx_period, EventKind.TIMER, fam.msg.src, self._retx, fam)

    def _retx(self, fam: _Family) -> None:
        msg = fam.msg
        if fam.done or self.is_crashed(msg.src):
            return
        now = self.engine.now()
        if msg.deadline is not None and now > msg.deadline:
            return
        pending = sorted(fam.targets - fam.acked)
        if not pending:
            return
        for dst in pending:
            self._attempt(fam, dst)
        self._arm_retx(fam)

    # -- receiving ----------------------------------------------------------

    def _arrive(self, fam: _Family, dst: int) -> None:
        msg = fam.msg
        eng = self.engine
        if self.is_crashed(dst):
            eng.emit("msg_drop", dst, msg=msg.msg_id, reason="crash")
            return
        if msg.is_geocast:
            if not deliverable(msg, self.position_of(dst)):
                eng.emit("msg_drop", dst, msg=msg.msg_id, reason="region")
                return
            if eng.now() > msg.deadline:  # type: ignore[operator]
                eng.emit("msg_drop", dst, msg=msg.msg_id, reason="expired")
                return
        if dst in fam.delivered:
            eng.emit("msg_drop", dst, msg=msg.msg_id, reason="duplicate")
        else:
            fam.delivered.add(dst)
            eng.emit("msg_deliver", dst, msg=msg.msg_id, src=msg.src, type=msg.payload.get("type"))
            handler = self.handlers.get(dst)
            if handler is not None:
                handler(msg)
        if fam.reliable:
            self._send_ack(fam, dst)

    def _send_ack(self, fam: _Family, dst: int) -> None:
        eng = self.engine
        if self.is_crashed(dst):
            return
        if self._lost():
            return
        eng.after(self.sample_delay(), EventKind.MESSAGE, fam.msg.src, self._ack_arrive, fam, dst)

    def _ack_arrive(self, fam: _Family, dst: int) -> None:
        if self.is_crashed(fam.msg.src) or fam.done:
            return
        fam.acked.add(dst)
        if fam.acked >= fam.targets:
            self._complete(fam)

    def _geocast_deadline(self, fam: _Family) -> None:
        if not self.is_crashed(fam.msg.src):
            self._complete(fam)

    def _complete(self, fam: _Family) -> None:
        if fam.done:
            return
        fam.done = True
        if fam.msg.is_geocast and self.on_geocast_complete is not None:
            self.on_geocast_complete(fam.msg.src, fam.msg.msg_id)

    # -- failures -----------------------------------------------------------

    def crash(self, pid: int, at: int) -> None:
        if pid not in self.engine.processes and pid not in self.handlers:
            raise UnknownPid(pid)
        self.engine.at(int(at), EventKind.CRASH, pid, self._do_crash, pid)

    def is_crashed(self, pid: int) -> bool:
        return pid in self.crashed

    def _do_crash(self, pid: int) -> None:
        self.crashed.add(pid)
        if pid in self.engine.processes:
            self.engine.mark_crashed(pid)
        else:
            self.engine.emit("crash", pid)
        for hook in self.crash_hooks:
            hook(pid)
