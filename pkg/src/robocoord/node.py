"""A simulated process: its gvh, its primitive instances and their I/O plumbing."""

from __future__ import annotations

from typing import Any

from .engine import Engine, EventKind
from .gvh import Gvh
from .net import Message, Network
from .primitives.base import Effect, Geocast, Send, Timer

# message type -> primitive kind that consumes it
ROUTES = {
    "REQUEST": "mux",
    "OK": "mux",
    "JOIN": "reg",
    "ECHO": "reg",
    "LEAVE": "reg",
    "ELECT": "elect",
    "ANSWER": "elect",
    "COORD": "elect",
}

GEOCAST_FLAG = ("geocast", "Gcastflag")


class Node:
    def __init__(self, pid: int, engine: Engine, net: Network, send_deadline: int | None = None):
        self.pid = pid
        self.engine = engine
        self.net = net
        self.gvh = Gvh(pid, engine.emit)
        self.gvh.register_slot("geocast", GEOCAST_FLAG, "int")
        self.send_deadline = send_deadline
        self.prims: dict[tuple[str, str], Any] = {}
        net.attach(pid, self.on_message)

    def add(self, prim: Any) -> Any:
        self.prims[(prim.kind, prim.xid)] = prim
        return prim

    @property
    def crashed(self) -> bool:
        return self.net.is_crashed(self.pid)

    def run(self, prim: Any, effects: list[Effect]) -> None:
        if self.crashed:
            return
        now = self.engine.now()
        for eff in effects:
            if isinstance(eff, Send):
                deadline = now + self.send_deadline if self.send_deadline is not None else None
                self.net.send_reliable(self.pid, eff.dst, eff.payload, deadline)
            elif isinstance(eff, Geocast):
                self.net.geocast_send(self.pid, eff.payload, eff.region, eff.window)
            elif isinstance(eff, Timer):
                self.engine.after(eff.delay, EventKind.TIMER, self.pid, self._fire, prim, eff.token)
            else:
                raise TypeError(f"unknown effect {eff!r}")

    def _fire(self, prim: Any, token: tuple) -> None:
        if not self.crashed:
            self.run(prim, prim.on_timer(token, self.engine.now()))

    def on_message(self, msg: Message) -> None:
        kind = ROUTES.get(msg.payload.get("type", ""))
        prim = self.prims.get((kind, msg.payload.get("xid"))) if kind else None
        if prim is None:
            return
        self.run(prim, prim.on_message(msg.payload, msg.src, self.engine.now()))

    def geocast_complete(self, msg_id: int) -> None:
        self.gvh.publish("geocast", GEOCAST_FLAG, msg_id)


def wire_geocast_flags(net: Network, nodes: dict[int, Node]) -> None:
    def done(src: int, msg_id: int) -> None:
        node = nodes.get(src)
        if node is not None:
            node.geocast_complete(msg_id)

    net.on_geocast_complete = done
