from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robocoord.engine import Engine, EventKind
from robocoord.geometry import Disc, IllegalPair, default_layout, dist, polyline_length
from robocoord.gvh import Gvh
from robocoord.physics import K_FLAG, Kinematics, TargetInsideAvoid, World, detect_collisions, plan_detour, segment_point_distance


def test_zone_of_examples():
    lay = default_layout()
    assert lay.zone_name_of((-0.5, -0.5)) == "A"
    assert lay.zone_name_of((10.0, 10.0)) is None
    # shared edge of A and C goes to the smaller name
    assert lay.zone_name_of((-0.5, 0.0)) == "A"
    assert lay.zone_name_of((0.0, 0.0)) == "A"


def test_default_layout_is_contiguous():
    lay = default_layout()
    for a, d in lay.legal_pairs():
        route = lay.path(a, d)
        for x, y in zip(route, route[1:]):
            rx, ry = lay.zones[x].footprint, lay.zones[y].footprint
            # adjacent footprints share an edge of positive length
            ox = min(rx.x1, ry.x1) - max(rx.x0, ry.x0)
            oy = min(rx.y1, ry.y1) - max(rx.y0, ry.y0)
            assert (ox == 0 and oy > 0) or (oy == 0 and ox > 0), (a, d, x, y)


def test_u_turn_is_illegal():
    lay = default_layout()
    with pytest.raises(IllegalPair):
        lay.path("A0", "B1")
    with pytest.raises(IllegalPair):
        lay.path("A0", "A0")


def test_layout_round_trip():
    lay = default_layout()
    assert type(lay).from_dict(lay.to_dict()) == lay


def test_collisions():
    assert detect_collisions({1: (0.0, 0.0), 2: (0.45, 0.0)}, 0.15) == []
    assert detect_collisions({1: (0.0, 0.0), 2: (0.0, 0.0)}, 0.15) == [(1, 2)]
    three = {1: (0.0, 0.0), 2: (0.1, 0.0), 3: (0.05, 0.05)}
    assert detect_collisions(three, 0.15) == [(1, 2), (1, 3), (2, 3)]


def _world(kin=None, pos=(0.0, 0.0)):
    eng = Engine()
    world = World(eng, kin or Kinematics())
    g = Gvh(1, eng.emit)
    world.add_body(1, pos, g)
    return eng, world, g


def test_zero_distance_move_is_done_next_tick():
    eng, world, g = _world()
    eng.at(0, EventKind.APP, 1, world.do_move, 1, (0.0, 0.0))
    eng.run("quiescence")
    assert g.value(K_FLAG) == "done"
    flags = [(r.time, r.payload["value"]) for r in eng.trace.of_kind("gvh_publish") if r.payload["slot"] == "motion.motionflag"]
    assert flags == [(0, "in_motion"), (50, "done")]


def test_target_inside_avoid_fails_without_moving():
    eng, world, g = _world()
    with pytest.raises(TargetInsideAvoid):
        world.do_move(1, (1.0, 0.0), Disc((1.0, 0.0), 0.5))
    assert g.value(K_FLAG) == "fail"
    assert world.position_of(1) == (0.0, 0.0)


def test_two_metre_move_at_one_metre_per_second():
    eng, world, g = _world(Kinematics(v_max=1.0))
    eng.at(0, EventKind.APP, 1, world.do_move, 1, (2.0, 0.0))
    eng.run("quiescence")
    done_at = [r.time for r in eng.trace.of_kind("gvh_publish") if r.payload["value"] == "done"][0]
    # eps lets the flag flip one tick early at most
    assert abs(done_at - 2000) <= 50


def test_straight_path_is_linear_at_v_max():
    eng, world, _ = _world(Kinematics(v_max=0.5))
    eng.at(0, EventKind.APP, 1, world.do_move, 1, (3.0, 0.0))
    eng.run(1000)
    for rec in eng.trace.of_kind("motion_tick"):
        _, x, y = rec.payload["poses"][0]
        assert x == pytest.approx(0.5 * rec.time / 1000, abs=1e-9)
        assert y == 0.0


def test_dt_zero_leaves_pose():
    eng, world, _ = _world()
    world.do_move(1, (1.0, 0.0))
    world.step_motion(1, 0)
    assert world.position_of(1) == (0.0, 0.0)


def test_detour_keeps_clear_of_avoid():
    kin = Kinematics(v_max=0.5)
    eng, world, g = _world(kin, pos=(-2.0, 0.0))
    avoid = Disc((0.0, 0.0), 0.5)
    eng.at(0, EventKind.APP, 1, world.do_move, 1, (2.0, 0.0), avoid)
    eng.run("quiescence")
    assert g.value(K_FLAG) == "done"
    prev = (-2.0, 0.0)
    for rec in eng.trace.of_kind("motion_tick"):
        _, x, y = rec.payload["poses"][0]
        # the swept segment, not only the sample, stays clear
        assert segment_point_distance(prev, (x, y), avoid.center) >= avoid.radius + kin.robot_radius - 1e-9
        prev = (x, y)


def test_stop_mid_move_reports_fail():
    eng, world, g = _world()
    eng.at(0, EventKind.APP, 1, world.do_move, 1, (5.0, 0.0))
    eng.at(500, EventKind.APP, 1, world.stop, 1)
    eng.run("quiescence")
    assert g.value(K_FLAG) == "fail"
    x, _ = world.position_of(1)
    assert 0.1 < x < 0.2


def test_kinematics_validation():
    from robocoord.net import ConfigError

    with pytest.raises(ConfigError) as exc:
        Kinematics(v_max=0).validate()
    assert exc.value.field == "kinematics.v_max"


@settings(max_examples=60, deadline=None)
@given(
    st.floats(-4, 4),
    st.floats(-4, 4),
    st.floats(-4, 4),
    st.floats(-4, 4),
    st.floats(0.2, 1.5),
)
def test_planned_detour_clears_disc(sx, sy, gx, gy, r):
    start, goal, c = (sx, sy), (gx, gy), (0.0, 0.0)
    if dist(start, c) <= r * 1.01 or dist(goal, c) <= r * 1.01:
        return
    path = plan_detour(start, goal, c, r)
    assert path is not None and path[-1] == goal
    pts = [start] + path
    for a, b in zip(pts, pts[1:]):
        assert segment_point_distance(a, b, c) >= r - 1e-7
    # never absurdly long: the tangent path is within the half-perimeter bound
    assert polyline_length(pts) <= dist(start, goal) + math.pi * r * 1.5 + 1e-6


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 2.0), st.integers(10, 200), st.floats(-5, 5), st.floats(-5, 5))
def test_speed_cap_respected(v, dt, tx, ty):
    eng, world, _ = _world(Kinematics(v_max=v))
    world.do_move(1, (tx, ty))
    before = world.position_of(1)
    world.step_motion(1, dt)
    assert dist(before, world.position_of(1)) <= v * dt / 1000 + 1e-12
