"""Intersection coordination protocol: per-vehicle state machine.

A vehicle registers with the other vehicles at the intersection, requests
every interior zone of its route from the registered group at once, then
drives zone to zone, releasing each zone once it stands in the next one.

``icp_step`` is the pure transition function; :class:`Vehicle` runs it every
app step and carries out the primitive calls it returns.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Sequence

from .engine import Engine
from .geometry import Disc, Layout
from .net import Network
from .node import Node
from .physics import K_FLAG, World
from .primitives.base import TimingParams
from .primitives.mutex import Mutex
from .primitives.registration import Registration

LOCS = ("S0", "reg_wait", "mutex_wait", "move_wait", "S1", "done", "stuck")
TERMINAL = ("done", "stuck")


class TooShort(ValueError):
    pass


def mid(seq: Sequence[str]) -> list[str]:
    """Drop the first and last element (the zones a route must lock)."""
    if len(seq) < 2:
        raise TooShort(f"need at least two zones, got {list(seq)}")
    return list(seq[1:-1])


@dataclass(frozen=True)
class IcpState:
    pid: int
    xid: str
    route: tuple[str, ...]
    loc: str = "S0"
    myseq: tuple[str, ...] = ()
    plist: tuple[int, ...] = ()
    pre: str | None = None

    @classmethod
    def initial(cls, pid: int, xid: str, route: Sequence[str]) -> "IcpState":
        return cls(pid, xid, tuple(route), "S0", tuple(route))


@dataclass(frozen=True)
class IcpView:
    """What the vehicle reads from its gvh (and position sensor) at a step."""

    rlist: list[int] | None = None
    crit: bool = False
    mux_failed: bool = False
    motionflag: str | None = None
    zone: str | None = None


Effect = tuple  # ("register",) | ("mutex", zones, plist) | ("move", zone) | ("release", zone) | ("unregister",) | ("stop",)


def icp_step(state: IcpState, view: IcpView, now: int) -> tuple[IcpState, list[Effect]]:
    loc = state.loc
    if loc == "S0":
        return replace(state, loc="reg_wait"), [("register",)]

    if loc == "reg_wait":
        if view.rlist is None:
            return state, []
        plist = tuple(view.rlist)
        return replace(state, loc="mutex_wait", plist=plist), [("mutex", mid(state.myseq), plist)]

    if loc == "mutex_wait":
        if view.mux_failed:
            return replace(state, loc="stuck"), []
        if not view.crit:
            return state, []
        return replace(state, loc="move_wait", pre=state.myseq[0]), [("move", state.myseq[1])]

    if loc == "move_wait":
        if view.motionflag == "fail":
            return replace(state, loc="stuck"), []
        if view.motionflag != "done" or view.zone != state.myseq[1]:
            return state, []
        interior = state.route[1:-1]
        effects: list[Effect] = []
        if state.pre in interior:
            effects.append(("release", state.pre))
        myseq = state.myseq[1:]
        pre = myseq[0]
        if len(myseq) == 2:
            myseq = myseq[1:]
            effects.append(("move", myseq[0]))
            return replace(state, loc="S1", myseq=myseq, pre=pre), effects
        effects.append(("move", myseq[1]))
        return replace(state, myseq=myseq, pre=pre), effects

    if loc == "S1":
        if view.motionflag == "fail":
            return replace(state, loc="stuck"), []
        if view.motionflag != "done" or view.zone != state.myseq[0]:
            return state, []
        return replace(state, loc="done", pre=None), [("release", state.pre), ("unregister",), ("stop",)]

    return state, []


class Vehicle:
    """One robot running the protocol inside the simulator."""

    def __init__(
        self,
        pid: int,
        arrival: str,
        departure: str,
        engine: Engine,
        net: Network,
        world: World,
        layout: Layout,
        timing: TimingParams,
        xid: str = "x0",
        mutex_cls: type[Mutex] = Mutex,
    ):
        self.pid = pid
        self.engine = engine
        self.world = world
        self.layout = layout
        self.node = Node(pid, engine, net, send_deadline=timing.d2)
        gvh = self.node.gvh
        region = Disc(layout.center, layout.registration_radius)
        self.reg = self.node.add(Registration(pid, xid, gvh, region, timing.t_announce, timing.t_echo))
        self.mux = self.node.add(mutex_cls(pid, xid, gvh, timeout=timing.d2))
        route = layout.path(arrival, departure)
        self.state = IcpState.initial(pid, xid, route)
        self.start = layout.zones[arrival].center
        world.add_body(pid, self.start, gvh)

    def spawn_info(self) -> dict[str, Any]:
        return {"pose": [self.start[0], self.start[1]], "route": list(self.state.route), "xid": self.state.xid}

    def view(self) -> IcpView:
        gvh = self.node.gvh
        pos = self.world.position_of(self.pid)
        return IcpView(
            rlist=gvh.value((self.reg.inst, "rList")),
            crit=bool(gvh.value((self.mux.inst, "crit"))),
            mux_failed=bool(gvh.value((self.mux.inst, "failed"))),
            motionflag=gvh.value(K_FLAG),
            zone=self.layout.zone_name_of(pos) if pos is not None else None,
        )

    def step(self, now: int) -> bool:
        old = self.state
        new, effects = icp_step(old, self.view(), now)
        self.state = new
        if new.loc != old.loc or new.myseq != old.myseq:
            self.engine.emit("app_loc", self.pid, loc=new.loc, myseq=list(new.myseq))
        for eff in effects:
            self._apply(eff, now)
        if new.loc in TERMINAL:
            if new.loc == "done":
                self.world.remove(self.pid)
                self.engine.emit("done", self.pid)
            return True
        return False

    def _apply(self, eff: Effect, now: int) -> None:
        op = eff[0]
        node = self.node
        if op == "register":
            node.run(self.reg, self.reg.do_register(now))
        elif op == "mutex":
            node.run(self.mux, self.mux.do_mutex(eff[1], eff[2]))
        elif op == "move":
            self.world.do_move(self.pid, self.layout.zones[eff[1]].center)
        elif op == "release":
            node.run(self.mux, self.mux.release([eff[1]]))
        elif op == "unregister":
            node.run(self.reg, self.reg.unregister(now))
        elif op == "stop":
            self.world.stop(self.pid)
        else:
            raise ValueError(f"unknown ICP effect {eff!r}")
