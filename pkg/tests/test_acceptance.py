"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``. Every tolerance is a
module constant below.
"""

from __future__ import annotations

import hashlib
import os
import subprocess
import sys
import time
from pathlib import Path

import pytest

from robocoord import bundled, run_scenario
from robocoord.explore import explore, simulated_ordering, small_instances
from robocoord.monitor import registration_results, replay
from robocoord.primitives.mutex import Mutex
from robocoord.scenario import BUNDLED
from robocoord.workloads import geocast_run, mutex_stress

FOURWAY_SEEDS = 200
FOURWAY_WALL_S = 60.0
STRESS_RUNS = 500
EXPLORE_MAX_SEEDS = 1000
GEOCAST_RUNS = 300
ICP_SEEDS = 20
PROGRESS_SEEDS = 50
REGISTRATION_SEEDS = 50
BROKEN_SEEDS = 100
# trace of fourway at seed 12345, frozen on the reference host
GOLDEN_SEED = 12345
GOLDEN_SHA256 = "4cda7632938fa3bbc4d7f60368f69cb2cf070824ebd7b120e039f42404782625"


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}")

    return emit


def test_1_fourway_reproduction(report):
    scn = bundled("fourway")
    t0 = time.perf_counter()
    bad = []
    for seed in range(FOURWAY_SEEDS):
        res = run_scenario(scn, seed)
        unsafe = res.of_property("traffic_safety") + res.of_property("mutex_safety")
        if not res.all_done or unsafe:
            bad.append((seed, res.locs, unsafe))
    wall = time.perf_counter() - t0
    ok = not bad and wall < FOURWAY_WALL_S
    report(1, ok, f"{FOURWAY_SEEDS} seeds, {len(bad)} failing, {wall:.1f}s wall (limit {FOURWAY_WALL_S:.0f}s)")
    assert not bad, bad[:3]
    assert wall < FOURWAY_WALL_S


def test_2_mutex_stress(report):
    overlaps = 0
    unfinished = 0
    sizes = set()
    for seed in range(STRESS_RUNS):
        res = mutex_stress(seed)
        sizes.add(res.n)
        overlaps += len([v for v in res.violations if v.property == "mutex_safety"])
        unfinished += bool(res.unfinished)
    ok = overlaps == 0
    report(2, ok, f"{STRESS_RUNS} runs, n in [{min(sizes)},{max(sizes)}], {overlaps} overlaps, {unfinished} runs unfinished")
    assert overlaps == 0
    assert max(sizes) == 20


def test_3_explorer_equivalence(report):
    problems = []
    seeds_used = []
    states = 0
    for inst in small_instances():
        res = explore(inst)
        states += res.states
        if res.violations or not res.complete:
            problems.append((inst, "explorer", res.violations[:1], res.truncated))
            continue
        seen = set()
        for seed in range(EXPLORE_MAX_SEEDS):
            o = simulated_ordering(inst, seed)
            if o not in res.orderings:
                problems.append((inst, "simulator ordering not reachable", o))
                break
            seen.add(o)
            if seen == res.orderings:
                break
        seeds_used.append(seed + 1)
        if seen != res.orderings:
            problems.append((inst, "unreached", sorted(res.orderings - seen)[:2]))
    n = len(small_instances())
    ok = not problems
    report(3, ok, f"{n} instances, {states} states, {len(problems)} problems; max seeds to cover {max(seeds_used)}")
    assert not problems, problems[:3]


def test_4_geocast(report):
    by_prop: dict[str, int] = {}
    missed = 0
    for seed in range(GEOCAST_RUNS):
        # random loss: exclusion and latency must hold
        for v in geocast_run(seed).violations:
            by_prop[v.property] = by_prop.get(v.property, 0) + 1
        # loss-free with delay <= d/2: inclusion must hold as well
        res = geocast_run(seed, loss_rate=0.0, bounded=True)
        for v in res.violations:
            by_prop[v.property] = by_prop.get(v.property, 0) + 1
        missed += sum(len(set(res.inside) - got) for got in res.delivered.values())
    ok = not by_prop and missed == 0
    report(4, ok, f"{GEOCAST_RUNS} seeds x (lossy, bounded loss-free): violations {by_prop or 0}, missed inside {missed}")
    assert not by_prop
    assert missed == 0


def test_5_icp_key_invariant(report):
    counts = {}
    for name in BUNDLED:
        scn = bundled(name)
        n = 0
        for seed in range(ICP_SEEDS):
            res = run_scenario(scn, seed)
            n += len(res.of_property("icp_key"))
            n += len([v for v in replay(res.trace) if v.property == "icp_key"])
        counts[name] = n
    ok = not any(counts.values())
    report(5, ok, f"{len(BUNDLED)} scenarios x {ICP_SEEDS} seeds, online+replay icp_key violations {counts}")
    assert not any(counts.values())


def _cli_trace(tmp: Path, tag: str, hashseed: str) -> bytes:
    out = tmp / f"{tag}.jsonl"
    env = {**os.environ, "PYTHONHASHSEED": hashseed}
    cmd = [sys.executable, "-m", "robocoord", "run", "--scenario", "fourway.json", "--seed", str(GOLDEN_SEED),
           "--trace", str(out)]
    subprocess.run(cmd, check=True, env=env, cwd=tmp, capture_output=True)
    return out.read_bytes()


def test_6_determinism(report, tmp_path):
    a = _cli_trace(tmp_path, "a", "0")
    b = _cli_trace(tmp_path, "b", "4242")
    inproc = run_scenario(bundled("fourway"), GOLDEN_SEED).trace.dumps().encode()
    digest = hashlib.sha256(a).hexdigest()
    ok = a == b == inproc and digest == GOLDEN_SHA256
    report(6, ok, f"2 processes + in-process identical: {a == b == inproc}; sha256 matches frozen host digest: {digest == GOLDEN_SHA256}")
    assert a == b == inproc
    assert digest == GOLDEN_SHA256


def test_7_progress(report):
    # uniform delays in [0, 100] ms, no loss, no crashes
    scn = bundled("fourway", ['net={"mean_delay": 50, "delay_distribution": "uniform", "delay_bounds": [0, 100]}'])
    worst = float("inf")
    failures = []
    for seed in range(PROGRESS_SEEDS):
        rep = run_scenario(scn, seed).progress()
        if rep.non_departed or not rep.assumptions_held:
            failures.append((seed, rep.non_departed))
            continue
        for pid, t in rep.traversal.items():
            slack = t - rep.lower_bound[pid]
            worst = min(worst, slack)
            if slack < 0:
                failures.append((seed, pid, t, rep.lower_bound[pid]))
    ok = not failures
    report(7, ok, f"{PROGRESS_SEEDS} seeds, all departed, min(traversal - bound) = {worst:.0f} ms")
    assert not failures, failures[:3]


def test_8_registration_agreement(report):
    scn = bundled("fourway")
    d = scn.timing.d
    bad = []
    for seed in range(REGISTRATION_SEEDS):
        res = run_scenario(scn, seed)
        first = {}
        for pid, _xid, ts, members in registration_results(res.trace):
            first.setdefault(pid, (ts, members))
        stamps = [ts for ts, _ in first.values()]
        lists = {m for _, m in first.values()}
        if len(first) != 4 or lists != {frozenset(range(4))} or max(stamps) - min(stamps) > d:
            bad.append((seed, first))
    ok = not bad
    report(8, ok, f"{REGISTRATION_SEEDS} loss-free seeds, four identical rLists of size 4, ts spread <= d={d}; {len(bad)} bad")
    assert not bad, bad[:2]


class AlwaysOk(Mutex):
    """Replies OK to every request."""

    def should_defer(self, zones, stamp):
        return False


def test_9_broken_mutex_detected(report):
    scn = bundled("contention")
    hit = None
    for seed in range(BROKEN_SEEDS):
        if run_scenario(scn, seed, mutex_cls=AlwaysOk).of_property("mutex_safety"):
            hit = seed
            break
    ok = hit is not None
    report(9, ok, f"first mutex_safety violation at seed {hit} (budget {BROKEN_SEEDS})")
    assert hit is not None
