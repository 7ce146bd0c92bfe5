"""Planar geometry: regions, zone footprints and the intersection layout."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable

Point = tuple[float, float]


def dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class Disc:
    center: Point
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError(f"disc radius must be positive, got {self.radius}")

    def contains(self, p: Point) -> bool:
        return dist(p, self.center) <= self.radius

    def to_dict(self) -> dict[str, Any]:
        return {"shape": "disc", "center": [self.center[0], self.center[1]], "radius": self.radius}


@dataclass(frozen=True)
class Everywhere:
    def contains(self, p: Point | None) -> bool:
        return True

    def to_dict(self) -> dict[str, Any]:
        return {"shape": "everywhere"}


Region = Disc | Everywhere
EVERYWHERE = Everywhere()


def region_from_dict(d: dict[str, Any]) -> Region:
    shape = d.get("shape")
    if shape == "everywhere":
        return EVERYWHERE
    if shape == "disc":
        cx, cy = d["center"]
        return Disc((float(cx), float(cy)), float(d["radius"]))
    raise ValueError(f"unknown region shape {shape!r}")


def in_region(region: Region, p: Point | None) -> bool:
    """Membership test; a process without a position is only in ``everywhere``."""
    if isinstance(region, Everywhere):
        return True
    return p is not None and region.contains(p)


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"rectangle must have positive area: {self}")

    def contains(self, p: Point) -> bool:
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1

    @property
    def center(self) -> Point:
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    def overlaps_interior(self, other: "Rect") -> bool:
        return self.x0 < other.x1 and other.x0 < self.x1 and self.y0 < other.y1 and other.y0 < self.y1

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


ZONE_KINDS = ("arrival", "critical", "departure")


@dataclass(frozen=True)
class Zone:
    name: str
    footprint: Rect
    kind: str

    @property
    def center(self) -> Point:
        return self.footprint.center


class IllegalPair(ValueError):
    pass


@dataclass
class Layout:
    """Zone footprints plus the routing table ``arrival -> departure -> criticals``."""

    zones: dict[str, Zone]
    routes: dict[str, dict[str, list[str]]]
    registration_radius: float = 6.0
    center: Point = (0.0, 0.0)
    _sorted: list[Zone] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._sorted = sorted(self.zones.values(), key=lambda z: z.name)

    def zone_of(self, p: Point) -> Zone | None:
        # closed footprints; shared edges go to the lexicographically smaller name
        for z in self._sorted:
            if z.footprint.contains(p):
                return z
        return None

    def zone_name_of(self, p: Point) -> str | None:
        z = self.zone_of(p)
        return z.name if z is not None else None

    def is_critical(self, name: str) -> bool:
        z = self.zones.get(name)
        return z is not None and z.kind == "critical"

    def path(self, arrival: str, departure: str) -> list[str]:
        row = self.routes.get(arrival)
        if row is None or departure not in row:
            raise IllegalPair(f"no route from {arrival!r} to {departure!r}")
        return [arrival, *row[departure], departure]

    def legal_pairs(self) -> list[tuple[str, str]]:
        return [(a, d) for a, row in self.routes.items() for d in row]

    def validate(self) -> None:
        crit = [z for z in self.zones.values() if z.kind == "critical"]
        for i, a in enumerate(crit):
            for b in crit[i + 1 :]:
                if a.footprint.overlaps_interior(b.footprint):
                    raise ValueError(f"critical zones {a.name} and {b.name} overlap")
        for z in self.zones.values():
            if z.kind not in ZONE_KINDS:
                raise ValueError(f"zone {z.name}: unknown kind {z.kind!r}")
        for arrival, row in self.routes.items():
            if self.zones.get(arrival) is None or self.zones[arrival].kind != "arrival":
                raise ValueError(f"route origin {arrival!r} is not an arrival zone")
            for departure, mids in row.items():
                if self.zones.get(departure) is None or self.zones[departure].kind != "departure":
                    raise ValueError(f"route {arrival}->{departure}: {departure!r} is not a departure zone")
                if not 1 <= len(mids) <= 3 or not all(self.is_critical(m) for m in mids):
                    raise ValueError(f"route {arrival}->{departure}: bad interior {mids!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "zones": {
                n: {"rect": z.footprint.as_list(), "kind": z.kind} for n, z in sorted(self.zones.items())
            },
            "routes": {a: {d: list(m) for d, m in row.items()} for a, row in self.routes.items()},
            "registration_radius": self.registration_radius,
            "center": [self.center[0], self.center[1]],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Layout":
        zones = {
            name: Zone(name, Rect(*map(float, spec["rect"])), spec["kind"]) for name, spec in d["zones"].items()
        }
        routes = {a: {dd: list(m) for dd, m in row.items()} for a, row in d["routes"].items()}
        cx, cy = d.get("center", (0.0, 0.0))
        layout = cls(zones, routes, float(d.get("registration_radius", 6.0)), (float(cx), float(cy)))
        layout.validate()
        return layout


def polyline_length(points: Iterable[Point]) -> float:
    pts = list(points)
    return sum(dist(a, b) for a, b in zip(pts, pts[1:]))


# Critical zones tile a 2 m square at the origin: A south-west, C north-west,
# D north-east, B south-east. Vehicles circulate A -> C -> D -> B -> A, entering
# a quadrant from its lane X0 and leaving through X1 on the quadrant's other
# outer side.
_CRITICAL = {
    "A": (-1.0, -1.0, 0.0, 0.0),
    "C": (-1.0, 0.0, 0.0, 1.0),
    "D": (0.0, 0.0, 1.0, 1.0),
    "B": (0.0, -1.0, 1.0, 0.0),
}
_ARRIVAL = {
    "A0": (-1.0, -3.0, 0.0, -1.0),
    "C0": (-3.0, 0.0, -1.0, 1.0),
    "D0": (0.0, 1.0, 1.0, 3.0),
    "B0": (1.0, -1.0, 3.0, 0.0),
}
_DEPARTURE = {
    "A1": (-3.0, -1.0, -1.0, 0.0),
    "C1": (-1.0, 1.0, 0.0, 3.0),
    "D1": (1.0, 0.0, 3.0, 1.0),
    "B1": (0.0, -3.0, 1.0, -1.0),
}
RING = ("A", "C", "D", "B")


def _ring_routes() -> dict[str, dict[str, list[str]]]:
    routes: dict[str, dict[str, list[str]]] = {}
    for i, start in enumerate(RING):
        row: dict[str, list[str]] = {}
        for n in (1, 2, 3):
            mids = [RING[(i + k) % 4] for k in range(n)]
            row[mids[-1] + "1"] = mids
        routes[start + "0"] = row
    return routes


def default_layout() -> Layout:
    zones: dict[str, Zone] = {}
    for table, kind in ((_CRITICAL, "critical"), (_ARRIVAL, "arrival"), (_DEPARTURE, "departure")):
        for name, r in table.items():
            zones[name] = Zone(name, Rect(*r), kind)
    layout = Layout(zones, _ring_routes())
    layout.validate()
    return layout
