"""Multi-resource mutual exclusion (Ricart-Agrawala over zone sets).

A request carries its whole zone set and one priority stamp
``(lamport_clock, pid)``. A peer answers OK unless it holds one of the
requested zones or has its own overlapping request with a smaller stamp; in
those cases the request is deferred and answered once the conflict is gone.
The requester gets every requested zone at once when all of ``plist`` has
answered, and may release them one at a time.
"""

from __future__ import annotations

from typing import Any, Iterable

from ..gvh import Gvh
from .base import Effect, Send, Timer


class RequestPending(RuntimeError):
    pass


class NotHeld(ValueError):
    pass


Stamp = tuple[int, int]


class Mutex:
    kind = "mux"

    def __init__(self, pid: int, xid: str, gvh: Gvh | None = None, timeout: int | None = None):
        self.pid = pid
        self.xid = xid
        self.inst = f"mux/{xid}"
        self.gvh = gvh
        self.timeout = timeout
        self.clock = 0
        self.plist: tuple[int, ...] = ()
        self.pending: tuple[frozenset[str], Stamp] | None = None
        self.oks: set[int] = set()
        self.crit_set: set[str] = set()
        self.crit = False
        self.failed = False
        self.deferred: list[tuple[int, frozenset[str], Stamp]] = []
        if gvh is not None:
            for name, tag in (("crit", "bool"), ("failed", "bool"), ("crit_set", "zone-list"), ("request", "zone-list")):
                gvh.register_slot(self.inst, (self.inst, name), tag)

    def _publish(self, name: str, value: Any) -> None:
        if self.gvh is not None:
            self.gvh.publish(self.inst, (self.inst, name), value)

    # -- local interface ----------------------------------------------------

    def do_mutex(self, zones: Iterable[str], plist: Iterable[int]) -> list[Effect]:
        if self.pending is not None:
            raise RequestPending(f"process {self.pid} already has a pending request")
        zs = frozenset(zones)
        plist = tuple(sorted(set(plist)))
        if not zs:
            raise ValueError("empty zone request")
        if self.pid not in plist:
            raise ValueError(f"process {self.pid} not in plist {plist}")
        self.plist = plist
        self.clock += 1
        stamp = (self.clock, self.pid)
        self.pending = (zs, stamp)
        self.oks = {self.pid}
        if self.failed:
            self.failed = False
            self._publish("failed", False)
        self._publish("request", sorted(zs))
        payload = {"type": "REQUEST", "xid": self.xid, "zones": sorted(zs), "stamp": list(stamp)}
        effects: list[Effect] = [Send(q, payload) for q in plist if q != self.pid]
        if self.timeout is not None:
            effects.append(Timer(self.timeout, ("timeout", stamp)))
        self._maybe_grant()
        return effects

    def release(self, zones: Iterable[str]) -> list[Effect]:
        zs = set(zones)
        if not zs <= self.crit_set:
            raise NotHeld(f"process {self.pid} does not hold {sorted(zs - self.crit_set)}")
        self.crit_set -= zs
        self._publish("crit_set", sorted(self.crit_set))
        if not self.crit_set and self.crit:
            self.crit = False
            self._publish("crit", False)
        return self._flush_deferred()

    # -- protocol -----------------------------------------------------------

    def should_defer(self, zones: frozenset[str], stamp: Stamp) -> bool:
        if zones & self.crit_set:
            return True
        if self.pending is not None:
            mine, my_stamp = self.pending
            if mine & zones and my_stamp < stamp:
                return True
        return False

    def on_request(self, src: int, zones: frozenset[str], stamp: Stamp) -> list[Effect]:
        self.clock = max(self.clock, stamp[0]) + 1
        if self.should_defer(zones, stamp):
            self.deferred.append((src, zones, stamp))
            return []
        return [self._ok(src, stamp)]

    def on_message(self, payload: dict[str, Any], src: int, now: int = 0) -> list[Effect]:
        kind = payload["type"]
        stamp = (int(payload["stamp"][0]), int(payload["stamp"][1]))
        if kind == "REQUEST":
            return self.on_request(src, frozenset(payload["zones"]), stamp)
        if kind == "OK":
            if self.pending is not None and self.pending[1] == stamp:
                self.oks.add(src)
                self._maybe_grant()
            return []
        raise ValueError(f"mutex cannot handle {kind!r}")

    def on_timer(self, token: tuple, now: int = 0) -> list[Effect]:
        if token[0] == "timeout" and self.pending is not None and self.pending[1] == token[1]:
            self.pending = None
            self.failed = True
            self._publish("failed", True)
            return self._flush_deferred()
        return []

    def _ok(self, dst: int, stamp: Stamp) -> Send:
        return Send(dst, {"type": "OK", "xid": self.xid, "stamp": list(stamp)})

    def _maybe_grant(self) -> None:
        if self.pending is None or not self.oks.issuperset(self.plist):
            return
        zones, _ = self.pending
        self.pending = None
        self.crit_set |= zones
        self._publish("crit_set", sorted(self.crit_set))
        self.crit = True
        self._publish("crit", True)

    def _flush_deferred(self) -> list[Effect]:
        out: list[Effect] = []
        keep = []
        for src, zones, stamp in self.deferred:
            if self.should_defer(zones, stamp):
                keep.append((src, zones, stamp))
            else:
                out.append(self._ok(src, stamp))
        self.deferred = keep
        return out

    def snapshot(self) -> tuple:
        """Hashable view of the protocol state (for state-space exploration)."""
        pending = None if self.pending is None else (tuple(sorted(self.pending[0])), self.pending[1])
        return (
            self.clock,
            pending,
            tuple(sorted(self.oks)),
            tuple(sorted(self.crit_set)),
            self.crit,
            tuple((s, tuple(sorted(z)), st) for s, z, st in self.deferred),
        )
