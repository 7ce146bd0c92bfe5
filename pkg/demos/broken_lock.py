"""Swap in a lock that never defers and watch the monitor catch it.

    python3 demos/broken_lock.py [seeds]
"""

from __future__ import annotations

import sys

from robocoord import bundled, run_scenario
from robocoord.primitives.mutex import Mutex


class AlwaysOk(Mutex):
    def should_defer(self, zones, stamp):
        return False


def main() -> None:
    seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    scn = bundled("contention")
    for label, cls in (("correct lock", Mutex), ("broken lock", AlwaysOk)):
        hits = 0
        first = None
        for seed in range(seeds):
            res = run_scenario(scn, seed, mutex_cls=cls)
            bad = [v for v in res.violations if v.property in ("mutex_safety", "traffic_safety", "collision")]
            if bad:
                hits += 1
                first = first or bad[0]
        print(f"{label:>12}: {hits}/{seeds} runs with a safety violation")
        if first:
            print(f"{'':>14}first: {first.property} at t={first.time} ms, {first.detail}")


if __name__ == "__main__":
    main()
