"""Registration: nearby processes agree on the participant list ``rList``.

Two geocast rounds. During the announce round every registering process
geocasts ``JOIN`` and collects the JOINs it hears (including ones heard up to
one announce period before it started). In the echo round each process
geocasts its candidate set; the final ``rList`` is the union of its own
candidates and all echoed sets, stamped with the finalisation time ``ts``.

``unregister`` geocasts ``LEAVE``; registered peers drop to ``rList = null``
and rerun the echo round among the remaining members.
"""

from __future__ import annotations

from typing import Any

from ..geometry import Region
from ..gvh import Gvh
from .base import Effect, Geocast, Timer


class AlreadyRegistering(RuntimeError):
    pass


class NotRegistered(RuntimeError):
    pass


class Registration:
    kind = "reg"

    def __init__(self, pid: int, xid: str, gvh: Gvh | None, region: Region, t_announce: int, t_echo: int):
        self.pid = pid
        self.xid = xid
        self.inst = f"reg/{xid}"
        self.gvh = gvh
        self.region = region
        self.t_announce = t_announce
        self.t_echo = t_echo
        self.phase = "idle"
        self.round = 0
        self.heard: dict[int, int] = {}
        self.candidates: set[int] = set()
        self.echoed: set[int] = set()
        self.left: set[int] = set()
        self.rlist: list[int] | None = None
        self.ts: int | None = None
        if gvh is not None:
            for name, tag in (("rList", "pid-list"), ("ts", "timestamp"), ("phase", "label")):
                gvh.register_slot(self.inst, (self.inst, name), tag)

    def _publish(self, name: str, value: Any) -> None:
        if self.gvh is not None:
            self.gvh.publish(self.inst, (self.inst, name), value)

    def _set_phase(self, phase: str) -> None:
        self.phase = phase
        self._publish("phase", phase)

    def _set_result(self, rlist: list[int] | None, ts: int | None) -> None:
        self.rlist, self.ts = rlist, ts
        self._publish("rList", rlist)
        self._publish("ts", ts)

    def do_register(self, now: int) -> list[Effect]:
        if self.phase != "idle":
            raise AlreadyRegistering(f"process {self.pid} is {self.phase}")
        self.round += 1
        self._set_phase("announcing")
        horizon = now - self.t_announce
        self.candidates = {self.pid} | {p for p, t in self.heard.items() if t >= horizon}
        self.echoed = set()
        self.left.discard(self.pid)
        return [
            Geocast({"type": "JOIN", "xid": self.xid, "pid": self.pid}, self.region, self.t_announce),
            Timer(self.t_announce, ("echo", self.round)),
        ]

    def unregister(self, now: int) -> list[Effect]:
        """Leave; allowed mid-round too (a peer's LEAVE may have restarted the echo)."""
        if self.phase == "idle":
            raise NotRegistered(f"process {self.pid} is {self.phase}")
        self.round += 1
        self._set_phase("idle")
        self._set_result(None, None)
        self.heard.clear()
        return [Geocast({"type": "LEAVE", "xid": self.xid, "pid": self.pid}, self.region, self.t_echo)]

    def _echo(self) -> list[Effect]:
        payload = {"type": "ECHO", "xid": self.xid, "pid": self.pid, "pids": sorted(self.candidates)}
        return [Geocast(payload, self.region, self.t_echo), Timer(self.t_echo, ("final", self.round))]

    def on_message(self, payload: dict[str, Any], src: int, now: int) -> list[Effect]:
        kind = payload["type"]
        p = int(payload["pid"])
        active = self.phase in ("announcing", "echoing")
        if kind == "JOIN":
            self.heard[p] = now
            self.left.discard(p)
            if active:
                self.candidates.add(p)
        elif kind == "ECHO":
            if active:
                self.echoed.update(int(q) for q in payload["pids"])
        elif kind == "LEAVE":
            self.heard.pop(p, None)
            if self.phase == "done" and self.rlist is not None and p in self.rlist:
                self.left.add(p)
                self.round += 1
                self.candidates = (set(self.rlist) - self.left) | {self.pid}
                self.echoed = set()
                self._set_result(None, None)
                self._set_phase("echoing")
                return self._echo()
            if active:
                self.left.add(p)
                self.candidates.discard(p)
        else:
            raise ValueError(f"registration cannot handle {kind!r}")
        return []

    def on_timer(self, token: tuple, now: int) -> list[Effect]:
        step, rnd = token
        if rnd != self.round:
            return []
        if step == "echo" and self.phase == "announcing":
            self._set_phase("echoing")
            return self._echo()
        if step == "final" and self.phase == "echoing":
            members = sorted((self.candidates | self.echoed) - self.left)
            self._set_result(members, now)
            self._set_phase("done")
        return []
