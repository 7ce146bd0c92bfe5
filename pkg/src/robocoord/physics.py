"""2D world: holonomic robots with a speed cap and the motion-control primitive.

Motion control follows ``do_move(target, avoid)``: the robot is driven along
a planned polyline toward ``target`` while staying outside ``avoid``; its
``motionflag`` slot reads ``in_motion`` until the pose is within ``eps`` of the
target (``done``) or the controller gives up (``fail``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .engine import Engine, EventKind
from .geometry import Disc, Everywhere, Point, Region, dist
from .gvh import Gvh

MOTION = "motion"
K_FLAG = (MOTION, "motionflag")
K_TARGET = (MOTION, "target")
K_AVOID = (MOTION, "avoid")

# keeps the float displacement of a partial step inside the speed cap
_SHRINK = 1.0 - 1e-12


class TargetInsideAvoid(ValueError):
    pass


@dataclass
class Kinematics:
    v_max: float = 0.3
    robot_radius: float = 0.15
    eps: float = 0.08
    tick_period: int = 50
    stall_timeout: int = 30_000

    def validate(self, prefix: str = "kinematics") -> None:
        from .net import ConfigError

        for name in ("v_max", "robot_radius", "eps"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{prefix}.{name}", "must be positive")
        for name in ("tick_period", "stall_timeout"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{prefix}.{name}", "must be a positive integer (ms)")

    def to_dict(self) -> dict[str, Any]:
        return {
            "v_max": self.v_max,
            "robot_radius": self.robot_radius,
            "eps": self.eps,
            "tick_period": self.tick_period,
            "stall_timeout": self.stall_timeout,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Kinematics":
        return cls(**{k: d[k] for k in ("v_max", "robot_radius", "eps", "tick_period", "stall_timeout") if k in d})


def normalize_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.fmod(a, 2 * math.pi)
    if a <= -math.pi:
        a += 2 * math.pi
    elif a > math.pi:
        a -= 2 * math.pi
    return a


@dataclass
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("pose coordinates must be finite")
        self.heading = normalize_angle(self.heading)

    @property
    def point(self) -> Point:
        return (self.x, self.y)


def segment_point_distance(a: Point, b: Point, c: Point) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return dist(a, c)
    t = max(0.0, min(1.0, ((c[0] - ax) * dx + (c[1] - ay) * dy) / L2))
    return math.hypot(ax + t * dx - c[0], ay + t * dy - c[1])


def plan_detour(start: Point, goal: Point, center: Point, radius: float) -> list[Point] | None:
    """Polyline from ``start`` to ``goal`` that stays at least ``radius`` from ``center``.

    The path leaves ``start`` along a tangent of the circle, hugs it through
    the corners of a circumscribed polygon, and reaches ``goal`` along the
    other tangent. Returns the waypoints after ``start`` (ending in ``goal``),
    or ``None`` when either endpoint lies inside the circle.
    """
    if segment_point_distance(start, goal, center) >= radius:
        return [goal]
    dp, dg = dist(start, center), dist(goal, center)
    if dp < radius or dg < radius:
        return None
    bp = math.atan2(start[1] - center[1], start[0] - center[0])
    bg = math.atan2(goal[1] - center[1], goal[0] - center[0])
    gp = math.acos(min(1.0, radius / dp))
    gg = math.acos(min(1.0, radius / dg))
    best: list[Point] | None = None
    best_len = math.inf
    for side in (1.0, -1.0):
        a0 = bp + side * gp
        a1 = bg - side * gg
        sweep = (side * (a1 - a0)) % (2 * math.pi)
        pieces = max(1, math.ceil(sweep / (math.pi / 2)))
        half = sweep / (2 * pieces)
        reach = radius / math.cos(half)
        pts: list[Point] = []
        for i in range(pieces):
            mid = a0 + side * (2 * i + 1) * half
            pts.append((center[0] + reach * math.cos(mid), center[1] + reach * math.sin(mid)))
        pts.append(goal)
        length = dist(start, pts[0]) + sum(dist(a, b) for a, b in zip(pts, pts[1:]))
        if length < best_len:
            best, best_len = pts, length
    return best


@dataclass
class Body:
    pid: int
    pose: Pose
    gvh: Gvh | None = None
    target: Point | None = None
    avoid: Region | None = None
    waypoints: list[Point] = field(default_factory=list)
    flag: str = "done"
    last_t: int = 0
    started_at: int = 0
    frozen: bool = False
    present: bool = True

    @property
    def point(self) -> Point:
        return (self.pose.x, self.pose.y)


def detect_collisions(positions: dict[int, Point], robot_radius: float) -> list[tuple[int, int]]:
    """All unordered pairs closer than two robot radii."""
    pids = sorted(positions)
    limit = 2 * robot_radius
    out = []
    for i, a in enumerate(pids):
        pa = positions[a]
        for b in pids[i + 1 :]:
            if dist(pa, positions[b]) < limit:
                out.append((a, b))
    return out


class World:
    """Robot bodies, their motion controllers and the shared motion tick."""

    def __init__(self, engine: Engine, kin: Kinematics | None = None):
        self.engine = engine
        self.kin = kin or Kinematics()
        self.bodies: dict[int, Body] = {}
        self._tick_pending = False
        self.on_tick: list[Callable[[], None]] = []

    def add_body(self, pid: int, pos: Point, gvh: Gvh | None = None, heading: float = 0.0) -> Body:
        body = Body(pid, Pose(pos[0], pos[1], heading), gvh)
        self.bodies[pid] = body
        if gvh is not None:
            gvh.register_slot(MOTION, K_FLAG, "label")
            gvh.register_slot(MOTION, K_TARGET, "point")
            gvh.register_slot(MOTION, K_AVOID, "region")
        return body

    def position_of(self, pid: int) -> Point | None:
        body = self.bodies.get(pid)
        return body.point if body is not None else None

    def present_positions(self) -> dict[int, Point]:
        return {pid: b.point for pid, b in self.bodies.items() if b.present}

    def _publish(self, body: Body, key: tuple[str, str], value: Any) -> None:
        if body.gvh is not None:
            body.gvh.publish(MOTION, key, value)

    def _set_flag(self, body: Body, flag: str) -> None:
        body.flag = flag
        self._publish(body, K_FLAG, flag)

    # -- motion primitive ---------------------------------------------------

    def do_move(self, pid: int, target: Point, avoid: Region | None = None) -> None:
        body = self.bodies[pid]
        if body.frozen:
            raise RuntimeError(f"robot {pid} is frozen")
        target = (float(target[0]), float(target[1]))
        body.target = target
        body.avoid = avoid
        body.last_t = body.started_at = self.engine.now()
        self._publish(body, K_TARGET, [target[0], target[1]])
        self._publish(body, K_AVOID, avoid.to_dict() if avoid is not None else None)
        if avoid is not None and avoid.contains(target):
            body.waypoints = []
            self._set_flag(body, "fail")
            raise TargetInsideAvoid(f"target {target} lies inside the avoid region")
        body.waypoints = self._plan(body, target, avoid)
        self._set_flag(body, "in_motion")
        self._ensure_tick()

    def _plan(self, body: Body, target: Point, avoid: Region | None) -> list[Point]:
        if avoid is None:
            return [target]
        if isinstance(avoid, Everywhere):
            return []
        assert isinstance(avoid, Disc)
        # inflate so the whole body clears the region, with slack for rounding
        r = (avoid.radius + self.kin.robot_radius) * (1 + 1e-9)
        if dist(target, avoid.center) < r:
            return [] if dist(body.point, target) > 0 else [target]
        path = plan_detour(body.point, target, avoid.center, r)
        return path or []

    def stop(self, pid: int) -> None:
        """Cut the motors; an unfinished move is reported as failed."""
        body = self.bodies[pid]
        body.waypoints = []
        if body.flag == "in_motion":
            self._set_flag(body, "fail")
        body.frozen = True

    def freeze(self, pid: int) -> None:
        body = self.bodies.get(pid)
        if body is not None:
            body.frozen = True
            body.waypoints = []
            body.flag = "fail" if body.flag == "in_motion" else body.flag

    def remove(self, pid: int) -> None:
        """Vehicle has left the world; it is no longer an obstacle."""
        body = self.bodies.get(pid)
        if body is not None:
            body.present = False
            body.waypoints = []

    def moving(self) -> list[Body]:
        return [b for b in self.bodies.values() if b.flag == "in_motion" and not b.frozen]

    def _ensure_tick(self) -> None:
        if not self._tick_pending:
            self._tick_pending = True
            self.engine.after(self.kin.tick_period, EventKind.MOTION, "world", self._tick)

    def _tick(self) -> None:
        self._tick_pending = False
        now = self.engine.now()
        moved = []
        for body in sorted(self.moving(), key=lambda b: b.pid):
            self.step_motion(body.pid, now - body.last_t)
            body.last_t = now
            moved.append([body.pid, body.pose.x, body.pose.y])
        if moved:
            self.engine.emit("motion_tick", "world", poses=moved)
        for hook in self.on_tick:
            hook()
        if self.moving():
            self._ensure_tick()

    def step_motion(self, pid: int, dt: int) -> None:
        """Advance one robot by ``dt`` ms along its waypoints, at most ``v_max * dt``."""
        body = self.bodies[pid]
        if body.flag != "in_motion" or dt <= 0:
            return
        budget = self.kin.v_max * dt / 1000.0
        x, y = body.pose.x, body.pose.y
        wps = body.waypoints
        while wps and budget > 0:
            wx, wy = wps[0]
            d = math.hypot(wx - x, wy - y)
            if d <= budget:
                if d > 0:
                    body.pose.heading = math.atan2(wy - y, wx - x)
                x, y = wx, wy
                budget -= d
                wps.pop(0)
            else:
                f = budget / d * _SHRINK
                body.pose.heading = math.atan2(wy - y, wx - x)
                x, y = x + (wx - x) * f, y + (wy - y) * f
                budget = 0.0
        body.pose.x, body.pose.y = x, y
        assert body.target is not None
        if dist(body.point, body.target) <= self.kin.eps:
            body.waypoints = []
            self._set_flag(body, "done")
        elif not wps and self.engine.now() - body.started_at >= self.kin.stall_timeout:
            self._set_flag(body, "fail")
