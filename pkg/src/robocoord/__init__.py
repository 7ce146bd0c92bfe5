"""Simulation and runtime checking of distributed coordination primitives for mobile robots."""

from .scenario import Scenario, bundled, load_scenario
from .sim import RunResult, Simulation, run_scenario

__all__ = ["RunResult", "Scenario", "Simulation", "bundled", "load_scenario", "run_scenario"]
__version__ = "0.1.0"
