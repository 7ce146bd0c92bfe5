"""Scenario files: everything a run needs except the seed override.

A scenario is a JSON document. Missing sections fall back to defaults;
``timing`` defaults are derived from ``net.mean_delay``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

from .geometry import IllegalPair, Layout, default_layout
from .net import ConfigError, NetConfig
from .physics import Kinematics
from .primitives.base import TimingParams


class ParseError(ConfigError):
    """The file is not a well-formed scenario document."""


class ValidationError(ConfigError):
    """The document parsed but violates a scenario invariant."""


@dataclass(frozen=True)
class VehicleSpec:
    pid: int
    arrival: str
    departure: str
    start_at: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {"pid": self.pid, "arrival": self.arrival, "departure": self.departure, "start_at": self.start_at}


@dataclass
class Scenario:
    name: str
    vehicles: list[VehicleSpec]
    master_seed: int = 0
    step_period_ms: int = 100
    net: NetConfig = field(default_factory=NetConfig)
    timing: TimingParams = field(default_factory=TimingParams)
    geometry: Layout = field(default_factory=default_layout)
    kinematics: Kinematics = field(default_factory=Kinematics)
    halt_on_violation: bool = False
    max_time: int = 600_000

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "master_seed": self.master_seed,
            "step_period_ms": self.step_period_ms,
            "max_time": self.max_time,
            "net": self.net.to_dict(),
            "timing": self.timing.to_dict(),
            "geometry": self.geometry.to_dict(),
            "kinematics": self.kinematics.to_dict(),
            "vehicles": [v.to_dict() for v in self.vehicles],
            "monitor": {"halt_on_violation": self.halt_on_violation},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def validate(self) -> None:
        if not isinstance(self.step_period_ms, int) or self.step_period_ms <= 0:
            raise ValidationError("step_period_ms", f"must be a positive integer, got {self.step_period_ms!r}")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ValidationError("master_seed", f"must be a non-negative integer, got {self.master_seed!r}")
        if not isinstance(self.max_time, int) or self.max_time <= 0:
            raise ValidationError("max_time", f"must be a positive integer, got {self.max_time!r}")
        for section, obj in (("net", self.net), ("timing", self.timing), ("kinematics", self.kinematics)):
            try:
                obj.validate(section)
            except ConfigError as exc:
                raise ValidationError(exc.field, exc.msg) from None
            except TypeError as exc:
                raise ValidationError(section, str(exc)) from None
        if not self.vehicles:
            raise ValidationError("vehicles", "need at least one vehicle")
        seen: set[int] = set()
        for i, v in enumerate(self.vehicles):
            where = f"vehicles[{i}]"
            if not isinstance(v.pid, int) or v.pid < 0:
                raise ValidationError(f"{where}.pid", f"must be a non-negative integer, got {v.pid!r}")
            if v.pid in seen:
                raise ValidationError(f"{where}.pid", f"duplicate pid {v.pid}")
            seen.add(v.pid)
            if not isinstance(v.start_at, int) or v.start_at < 0:
                raise ValidationError(f"{where}.start_at", f"must be a non-negative integer, got {v.start_at!r}")
            if v.arrival not in self.geometry.routes:
                raise ValidationError(f"{where}.arrival", f"{v.arrival!r} is not an arrival zone")
            try:
                self.geometry.path(v.arrival, v.departure)
            except IllegalPair as exc:
                raise ValidationError(f"{where}.departure", str(exc)) from None
        for i, (pid, _at) in enumerate(self.net.crash_schedule):
            if pid not in seen:
                raise ValidationError(f"net.crash_schedule[{i}]", f"unknown pid {pid}")


def _section(d: dict[str, Any], key: str) -> dict[str, Any]:
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ParseError(key, f"expected an object, got {type(v).__name__}")
    return v


def scenario_from_dict(d: Any) -> Scenario:
    if not isinstance(d, dict):
        raise ParseError("<root>", "scenario must be a JSON object")
    try:
        net = NetConfig.from_dict(_section(d, "net"))
    except (TypeError, ValueError) as exc:
        raise ParseError("net", str(exc)) from None
    try:
        net.validate()
    except ConfigError as exc:
        raise ValidationError(exc.field, exc.msg) from None
    except TypeError as exc:
        raise ValidationError("net", str(exc)) from None
    try:
        timing = TimingParams.from_dict(_section(d, "timing"), net.mean_delay)
    except TypeError as exc:
        raise ParseError("timing", str(exc)) from None
    try:
        kin = Kinematics.from_dict(_section(d, "kinematics"))
    except TypeError as exc:
        raise ParseError("kinematics", str(exc)) from None
    geom = d.get("geometry")
    try:
        layout = Layout.from_dict(geom) if geom is not None else default_layout()
    except (KeyError, TypeError) as exc:
        raise ParseError("geometry", f"malformed geometry: {exc}") from None
    except ValueError as exc:
        raise ValidationError("geometry", str(exc)) from None
    raw_vehicles = d.get("vehicles")
    if not isinstance(raw_vehicles, list):
        raise ParseError("vehicles", "expected a list of vehicles")
    vehicles = []
    for i, v in enumerate(raw_vehicles):
        try:
            vehicles.append(VehicleSpec(v["pid"], v["arrival"], v["departure"], v.get("start_at", 0)))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"vehicles[{i}]", f"need pid, arrival, departure: {exc}") from None
    mon = _section(d, "monitor")
    halt = mon.get("halt_on_violation", False)
    if not isinstance(halt, bool):
        raise ValidationError("monitor.halt_on_violation", f"must be a boolean, got {halt!r}")
    scn = Scenario(
        name=str(d.get("name", "unnamed")),
        vehicles=vehicles,
        master_seed=d.get("master_seed", 0),
        step_period_ms=d.get("step_period_ms", 100),
        net=net,
        timing=timing,
        geometry=layout,
        kinematics=kin,
        halt_on_violation=halt,
        max_time=d.get("max_time", 600_000),
    )
    scn.validate()
    return scn


def parse_override(item: str) -> tuple[list[str], Any]:
    """``"net.loss_rate=0.2"`` -> ``(["net", "loss_rate"], 0.2)``; values are JSON, else strings."""
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ParseError("--set", f"expected KEY=VALUE, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(d: dict[str, Any], items: Iterable[str]) -> dict[str, Any]:
    out = copy.deepcopy(d)
    for item in items:
        path, value = parse_override(item)
        node: Any = out
        for i, part in enumerate(path[:-1]):
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError):
                    raise ParseError(".".join(path[: i + 1]), "no such list element") from None
            else:
                node = node.setdefault(part, {})
            if not isinstance(node, (dict, list)):
                raise ParseError(".".join(path[: i + 1]), "cannot descend into a scalar")
        last = path[-1]
        if isinstance(node, list):
            try:
                node[int(last)] = value
            except (ValueError, IndexError):
                raise ParseError(".".join(path), "no such list element") from None
        else:
            node[last] = value
    return out


BUNDLED = ("fourway", "solo", "contention", "lossy", "crash")


def bundled_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".json") else name
    return Path(str(resources.files("robocoord") / "scenarios" / f"{stem}.json"))


def read_scenario_dict(path: str | Path) -> dict[str, Any]:
    p = Path(path)
    if not p.exists():
        alt = bundled_path(p.name)
        if p.parent == Path(".") and alt.exists():
            p = alt
        else:
            raise FileNotFoundError(f"no scenario file {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError("<file>", f"{p}: {exc}") from None


def load_scenario(path: str | Path, overrides: Iterable[str] = ()) -> Scenario:
    """Load and validate a scenario file; a bare bundled name like ``fourway.json`` also works."""
    return scenario_from_dict(apply_overrides(read_scenario_dict(path), overrides))


def bundled(name: str, overrides: Iterable[str] = ()) -> Scenario:
    return load_scenario(bundled_path(name), overrides)
