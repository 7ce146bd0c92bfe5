from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robocoord.engine import Engine, EventKind, UnknownPid
from robocoord.geometry import EVERYWHERE, Disc
from robocoord.net import ConfigError, Message, NetConfig, Network, SenderCrashed, deliverable
from robocoord.node import Node, wire_geocast_flags


def _net(cfg: NetConfig, positions=None, seed=0):
    eng = Engine(seed)
    positions = positions or {}
    net = Network(eng, cfg, positions.get)
    got: dict[int, list] = {}
    for pid in positions or (0, 1):
        got[pid] = []
        net.attach(pid, lambda m, pid=pid: got[pid].append((eng.now(), m.payload)))
    return eng, net, got


def test_constant_delay_unicast():
    eng, net, got = _net(NetConfig(mean_delay=100, delay_distribution="constant"))
    net.unicast(0, 1, {"type": "PING"})
    eng.run("quiescence")
    assert got[1] == [(100, {"type": "PING"})]


def test_total_loss_drops_and_logs():
    eng, net, got = _net(NetConfig(loss_rate=1.0))
    net.unicast(0, 1, {"type": "PING"})
    trace = eng.run("quiescence")
    assert got[1] == []
    drops = trace.of_kind("msg_drop")
    assert [(d.pid, d.payload["reason"]) for d in drops] == [(1, "loss")]


def test_crashed_receiver_suppresses_delivery():
    eng, net, got = _net(NetConfig(mean_delay=100, delay_distribution="constant"))
    net.crash(1, 50)
    net.unicast(0, 1, {"type": "PING"})
    trace = eng.run("quiescence")
    assert got[1] == []
    assert trace.of_kind("msg_drop")[0].payload["reason"] == "crash"


def test_crashed_sender_cannot_send():
    eng = Engine()
    net = Network(eng, NetConfig())
    net.attach(0, lambda m: None)
    eng.spawn_process(0, lambda now: False)
    net.crash(0, 0)
    eng.run(10)
    with pytest.raises(SenderCrashed):
        net.unicast(0, 1, {"type": "X"})


def test_crash_unknown_pid():
    eng, net, _ = _net(NetConfig())
    with pytest.raises(UnknownPid):
        net.crash(42, 0)


def test_reliable_send_survives_heavy_loss():
    eng, net, got = _net(NetConfig(mean_delay=20, loss_rate=0.6), seed=4)
    net.send_reliable(0, 1, {"type": "PING"}, deadline=60_000)
    eng.run("quiescence")
    assert len(got[1]) == 1


def test_deliverable_disc_edges():
    disc = Disc((0.0, 0.0), 5.0)
    m = Message(1, 0, (0.0, 0.0), {}, 0, region=disc)
    assert deliverable(m, (4.9, 0.0))
    assert not deliverable(m, (5.1, 0.0))
    b = Message(2, 0, None, {}, 0, region=EVERYWHERE)
    assert deliverable(b, (1e6, -1e6))
    assert deliverable(b, None)


def test_geocast_outside_never_delivers_inside_always_does():
    pos = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (9.0, 0.0)}
    eng, net, got = _net(NetConfig(mean_delay=50, delay_distribution="uniform", delay_bounds=(0, 100)), pos)
    net.geocast_send(0, {"type": "G"}, Disc((0.0, 0.0), 3.0), 400)
    trace = eng.run("quiescence")
    assert [p for _, p in got[1]] == [{"type": "G"}]
    assert got[1][0][0] <= 400
    assert got[2] == []
    reasons = {d.payload["reason"] for d in trace.of_kind("msg_drop") if d.pid == 2}
    assert reasons == {"region"}


def test_broadcast_reaches_everyone():
    pos = {0: (0.0, 0.0), 1: (100.0, 0.0), 2: (-50.0, 3.0)}
    eng, net, got = _net(NetConfig(mean_delay=10), pos)
    net.broadcast(0, {"type": "B"}, 500)
    eng.run("quiescence")
    assert len(got[1]) == 1 and len(got[2]) == 1
    assert got[0] == []


def test_sender_crash_mid_geocast_keeps_deliveries_and_no_flag():
    eng = Engine(1)
    pos = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (2.0, 0.0)}
    net = Network(eng, NetConfig(mean_delay=100, delay_distribution="constant"), pos.get)
    nodes = {p: Node(p, eng, net) for p in pos}
    wire_geocast_flags(net, nodes)
    for p in pos:
        eng.spawn_process(p, lambda now: False)
    eng.at(0, EventKind.APP, 0, net.geocast_send, 0, {"type": "G"}, Disc((0.0, 0.0), 5.0), 1000)
    net.crash(0, 150)
    trace = eng.run(3000)
    assert {r.pid for r in trace.of_kind("msg_deliver")} == {1, 2}
    flags = [r for r in trace.of_kind("gvh_publish") if r.payload["slot"] == "geocast.Gcastflag"]
    assert flags == []
    assert nodes[0].gvh.value(("geocast", "Gcastflag")) is None


def test_geocast_flag_set_on_completion():
    eng = Engine(1)
    pos = {0: (0.0, 0.0), 1: (1.0, 0.0)}
    net = Network(eng, NetConfig(mean_delay=10), pos.get)
    nodes = {p: Node(p, eng, net) for p in pos}
    wire_geocast_flags(net, nodes)
    mid = net.geocast_send(0, {"type": "G"}, Disc((0.0, 0.0), 5.0), 1000)
    eng.run("quiescence")
    assert nodes[0].gvh.value(("geocast", "Gcastflag")) == mid


def test_non_participant_crash_changes_nothing():
    def run(crash: bool):
        eng, net, got = _net(NetConfig(mean_delay=40), {0: (0, 0), 1: (0, 1), 2: (0, 2)}, seed=8)
        if crash:
            net.crash(2, 0)
        net.send_reliable(0, 1, {"type": "PING"}, deadline=10_000)
        eng.run("quiescence")
        return got[1]

    assert run(False) == run(True)


@pytest.mark.parametrize(
    "cfg, field",
    [
        (NetConfig(loss_rate=1.5), "net.loss_rate"),
        (NetConfig(mean_delay=-1), "net.mean_delay"),
        (NetConfig(delay_distribution="pareto"), "net.delay_distribution"),
        (NetConfig(delay_distribution="uniform"), "net.delay_bounds"),
        (NetConfig(delay_distribution="uniform", delay_bounds=(5, 1)), "net.delay_bounds"),
        (NetConfig(crash_schedule=[(1, -5)]), "net.crash_schedule[0]"),
    ],
)
def test_config_errors_name_the_field(cfg, field):
    with pytest.raises(ConfigError) as exc:
        cfg.validate()
    assert exc.value.field == field


def test_config_round_trip():
    cfg = NetConfig(30, "uniform", (0, 60), 0.25, [(1, 500)])
    assert NetConfig.from_dict(cfg.to_dict()) == cfg


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["exponential", "uniform", "constant"]))
def test_delays_bounded(seed, kind):
    cfg = NetConfig(mean_delay=100, delay_distribution=kind, delay_bounds=(0, 200) if kind == "uniform" else None)
    eng = Engine(seed)
    net = Network(eng, cfg)
    for _ in range(50):
        assert 0 <= net.sample_delay() <= cfg.max_delay
