from __future__ import annotations

import pytest

from robocoord.engine import Engine, EventKind
from robocoord.gvh import Gvh
from robocoord.net import NetConfig, Network
from robocoord.node import Node
from robocoord.primitives.election import Election, NotInPlist
from robocoord.workloads import election_run


def bully(pids, crash=()):
    eng = Engine(0)
    net = Network(eng, NetConfig(mean_delay=100))
    for p in pids:
        net.attach(p, lambda m: None)
    for p, at in crash:
        net.crash(p, at)
    els = {}
    for p in pids:
        node = Node(p, eng, net, send_deadline=60_000)
        el = node.add(Election(p, "e", node.gvh))
        els[p] = el
        eng.spawn_process(p, lambda now: True)
        eng.at(0, EventKind.APP, p, lambda node=node, el=el: node.run(el, el.do_election(pids, eng.now())))
    eng.run("quiescence")
    return els


def test_bully_highest_pid_wins():
    els = bully([1, 5, 9])
    assert {p: e.leader for p, e in els.items()} == {1: 9, 5: 9, 9: 9}


def test_bully_skips_crashed_top():
    els = bully([1, 5, 9], crash=[(9, 0)])
    assert els[1].leader == 5 and els[5].leader == 5


def test_singleton_immediate():
    g = Gvh(3)
    el = Election(3, "e", g)
    assert el.do_election([3], 0) == []
    assert g.value((el.inst, "Leader")) == 3


def test_not_in_plist():
    with pytest.raises(NotInPlist):
        Election(3, "e").do_election([1, 2], 0)


def test_equal_ballots_larger_pid_wins():
    els = {p: Election(p, "e", algorithm="random_ballot", ballot=lambda: 7) for p in (2, 4, 6)}
    msgs = []
    for p, el in els.items():
        msgs += [(p, m) for m in el.do_election([2, 4, 6], 0)]
    for src, m in msgs:
        if hasattr(m, "dst"):
            els[m.dst].on_message(m.payload, src, 0)
    assert {p: e.leader for p, e in els.items()} == {2: 6, 4: 6, 6: 6}


def test_deadline_fails_when_peer_never_votes():
    el = Election(0, "e", Gvh(0), algorithm="random_ballot", d2=1000)
    el.do_election([0, 1], 0)
    el.on_timer(("deadline", 0), 1000)
    assert el.leader == "fail"
    assert el.gvh.value((el.inst, "Leader")) == "fail"


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        Election(0, "e", algorithm="raft")


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("algorithm", ["bully", "random_ballot"])
def test_harness_agrees_without_faults(seed, algorithm):
    res = election_run(seed, n=5, algorithm=algorithm, stagger=300)
    assert res.agreed
    if algorithm == "bully":
        assert set(res.leaders.values()) == {4}


@pytest.mark.parametrize("seed", range(5))
def test_bully_agrees_after_early_crash(seed):
    res = election_run(seed, n=5, algorithm="bully", crash=[(4, 0)])
    assert res.agreed
    assert {res.leaders[p] for p in range(4)} == {3}
