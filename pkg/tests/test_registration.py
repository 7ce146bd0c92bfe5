from __future__ import annotations

import pytest

from robocoord.engine import Engine, EventKind
from robocoord.geometry import Disc
from robocoord.monitor import check_registration_trace, registration_results
from robocoord.net import NetConfig, Network
from robocoord.node import Node
from robocoord.primitives.base import TimingParams
from robocoord.primitives.registration import NotRegistered, Registration

T = TimingParams.for_delay(100)


def group(pids, starts, *, leave=None, loss=0.0, seed=0, until=20_000):
    """Processes at the origin; ``starts[p]`` is when p registers, ``leave[p]`` when it unregisters."""
    eng = Engine(seed)
    net = Network(eng, NetConfig(mean_delay=100, loss_rate=loss), lambda pid: (0.0, 0.0))
    regs = {}
    for p in pids:
        node = Node(p, eng, net)
        reg = node.add(Registration(p, "x", node.gvh, Disc((0.0, 0.0), 6.0), T.t_announce, T.t_echo))
        regs[p] = reg
        if p in starts:
            eng.at(starts[p], EventKind.APP, p, lambda node=node, reg=reg: node.run(reg, reg.do_register(eng.now())))
        if leave and p in leave:
            eng.at(leave[p], EventKind.APP, p, lambda node=node, reg=reg: node.run(reg, reg.unregister(eng.now())))
    trace = eng.run(until)
    return regs, trace


def test_singleton():
    regs, _ = group([0], {0: 0})
    assert regs[0].rlist == [0]
    assert regs[0].ts == T.t_announce + T.t_echo


def test_four_close_starters_agree():
    regs, trace = group([0, 1, 2, 3], {0: 0, 1: 30, 2: 120, 3: 200})
    lists = {p: r.rlist for p, r in regs.items()}
    assert lists == {p: [0, 1, 2, 3] for p in range(4)}
    stamps = [r.ts for r in regs.values()]
    assert max(stamps) - min(stamps) <= T.d
    assert check_registration_trace(trace, T.d, T.d1) == []


def test_non_registrant_is_never_listed():
    regs, trace = group([0, 1, 9], {0: 0, 1: 50})
    assert regs[0].rlist == [0, 1] and regs[1].rlist == [0, 1]
    assert regs[9].rlist is None
    assert all(9 not in members for *_, members in registration_results(trace))


def test_leave_shrinks_group_with_null_interim():
    regs, trace = group([0, 1], {0: 0, 1: 0}, leave={1: 3000})
    assert regs[0].rlist == [0]
    assert regs[1].rlist is None and regs[1].phase == "idle"
    values = [r.payload["value"] for r in trace.of_kind("gvh_publish") if r.pid == 0 and r.payload["slot"] == "reg/x.rList"]
    assert values == [[0, 1], None, [0]]


def test_unregister_before_register():
    reg = Registration(0, "x", None, Disc((0.0, 0.0), 1.0), 100, 100)
    with pytest.raises(NotRegistered):
        reg.unregister(0)


@pytest.mark.parametrize("seed", range(10))
def test_agreement_under_staggered_starts(seed):
    import numpy as np

    starts = {p: int(s) for p, s in enumerate(np.random.default_rng(seed).integers(0, T.d, 4))}
    regs, trace = group(range(4), starts, seed=seed)
    assert len({tuple(r.rlist) for r in regs.values()}) == 1
    assert check_registration_trace(trace, T.d, T.d1) == []
