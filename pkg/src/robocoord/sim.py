"""Build a simulation from a scenario and run it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .engine import Engine
from .icp import Vehicle
from .monitor import Monitor, ProgressReport, Violation, check_geocast_trace, check_registration_trace, progress_report
from .net import Network
from .node import wire_geocast_flags
from .physics import World, detect_collisions
from .primitives.mutex import Mutex
from .scenario import Scenario
from .trace import WORLD, Trace


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    trace: Trace
    locs: dict[int, str]
    violations: list[Violation] = field(default_factory=list)
    halted: str | None = None

    @property
    def all_done(self) -> bool:
        return all(loc == "done" for loc in self.locs.values())

    @property
    def exit_code(self) -> int:
        return 0 if self.all_done and not self.violations else 1

    def of_property(self, prop: str) -> list[Violation]:
        return [v for v in self.violations if v.property == prop]

    def progress(self) -> ProgressReport:
        return progress_report(self.trace, self.scenario.geometry, self.scenario.kinematics.v_max)

    def summary(self) -> dict[str, Any]:
        t = self.scenario.timing
        return {
            "scenario": self.scenario.name,
            "seed": self.seed,
            "exit_code": self.exit_code,
            "halted": self.halted,
            "end_time": self.trace.end_time,
            "vehicles": {str(p): loc for p, loc in sorted(self.locs.items())},
            "violations": [v.to_dict() for v in self.violations],
            "trace_checks": {
                "geocast": [v.to_dict() for v in check_geocast_trace(self.trace)],
                "registration": [v.to_dict() for v in check_registration_trace(self.trace, t.d, t.d1)],
            },
            "progress": self.progress().to_dict(),
        }


class Simulation:
    """One wired-up run: engine, world, network, vehicles and monitor."""

    def __init__(
        self,
        scenario: Scenario,
        seed: int | None = None,
        *,
        monitor: bool = True,
        halt_on_violation: bool | None = None,
        mutex_cls: type[Mutex] = Mutex,
    ):
        self.scenario = scn = scenario
        self.seed = scn.master_seed if seed is None else int(seed)
        header = {"seed": self.seed, "scenario": scn.to_dict()}
        self.engine = eng = Engine(self.seed, scn.step_period_ms, header)
        self.world = World(eng, scn.kinematics)
        self.net = Network(eng, scn.net, self.world.position_of)
        self.vehicles: dict[int, Vehicle] = {}
        for v in scn.vehicles:
            self.vehicles[v.pid] = Vehicle(
                v.pid, v.arrival, v.departure, eng, self.net, self.world, scn.geometry, scn.timing, mutex_cls=mutex_cls
            )
        wire_geocast_flags(self.net, {p: veh.node for p, veh in self.vehicles.items()})
        self.net.crash_hooks.append(self.world.freeze)
        self.violations: list[Violation] = []
        halt = scn.halt_on_violation if halt_on_violation is None else halt_on_violation
        self.monitor: Monitor | None = None
        if monitor:
            self.monitor = Monitor(scn.geometry)
            self.monitor.attach(eng, halt_on_violation=halt)
        self._colliding: set[tuple[int, int]] = set()
        self.world.on_tick.append(self._check_collisions)
        # crashes go in first so a crash at t=0 precedes the victim's first step
        self.net.install_crash_schedule()
        for v in scn.vehicles:
            veh = self.vehicles[v.pid]
            eng.spawn_process(v.pid, veh.step, v.start_at, **veh.spawn_info())

    def _check_collisions(self) -> None:
        pairs = set(detect_collisions(self.world.present_positions(), self.scenario.kinematics.robot_radius))
        for a, b in sorted(pairs - self._colliding):
            v = Violation("collision", self.engine.now(), (a, b), f"robots {a} and {b} closer than two radii")
            self.engine.emit("violation", WORLD, **v.to_dict())
            self.engine.halt("collision")
        self._colliding = pairs

    def run(self, max_time: int | None = None) -> RunResult:
        trace = self.engine.run("all_done", max_time=max_time or self.scenario.max_time)
        violations = [
            Violation.from_dict({**r.payload, "time": r.time}) for r in trace.records if r.kind == "violation"
        ]
        locs = {p: veh.state.loc for p, veh in self.vehicles.items()}
        return RunResult(self.scenario, self.seed, trace, locs, violations, self.engine.halted)


def run_scenario(scenario: Scenario, seed: int | None = None, **kw: Any) -> RunResult:
    max_time = kw.pop("max_time", None)
    return Simulation(scenario, seed, **kw).run(max_time)
