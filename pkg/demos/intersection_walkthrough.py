"""Four robots cross the intersection; print who held what, and when.

    python3 demos/intersection_walkthrough.py [seed] [outdir]

Writes the trace, a summary and three SVG snapshots into ``outdir``
(default ./walkthrough).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from robocoord import bundled, run_scenario
from robocoord.render import render_snapshot


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
    out = Path(sys.argv[2] if len(sys.argv) > 2 else "walkthrough")
    out.mkdir(parents=True, exist_ok=True)

    scn = bundled("fourway")
    res = run_scenario(scn, seed)
    for v in scn.vehicles:
        print(f"robot {v.pid}: {' -> '.join(scn.geometry.path(v.arrival, v.departure))}")

    print("\nzone holdings over time:")
    held: dict[int, set[str]] = {}
    for r in res.trace.of_kind("gvh_publish"):
        if not r.payload["slot"].endswith(".crit_set"):
            continue
        now = set(r.payload["value"] or ())
        before = held.get(r.pid, set())
        if now - before:
            print(f"  {r.time:>6} ms  robot {r.pid} granted {sorted(now - before)}")
        if before - now:
            print(f"  {r.time:>6} ms  robot {r.pid} released {sorted(before - now)}")
        held[r.pid] = now

    rep = res.progress()
    print("\ntraversal vs kinematic lower bound:")
    for pid in sorted(rep.traversal):
        print(f"  robot {pid}: {rep.traversal[pid]} ms (bound {rep.lower_bound[pid]:.0f} ms)")
    print(f"\nviolations: {len(res.violations)}  exit code: {res.exit_code}")

    res.trace.write(out / "trace.jsonl")
    (out / "summary.json").write_text(json.dumps(res.summary(), indent=2) + "\n")
    end = res.trace.end_time
    for t in (0, end // 3, 2 * end // 3):
        render_snapshot(res.trace, t, out / f"t{t}.svg", scn.geometry)
    print(f"wrote trace, summary and snapshots to {out}/")


if __name__ == "__main__":
    main()
