"""Command-line front end.

    robocoord run --scenario fourway.json --seed 7 --trace out.jsonl --summary out.json
    robocoord replay out.jsonl
    robocoord render out.jsonl --at 5000 --out snap.svg

``run`` exits 0 when every vehicle is done and no violation was reported,
1 on a violation or a vehicle that never departed, 2 on bad configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .monitor import check_geocast_trace, check_registration_trace, layout_from_header, progress_report, replay
from .net import ConfigError
from .render import TimeOutOfRange, render_snapshot
from .scenario import load_scenario
from .sim import run_scenario
from .trace import MalformedTrace, read_trace

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {v}")
    return v


def _ms(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected milliseconds, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("time must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robocoord", description="Simulate and check multi-robot coordination runs.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("--scenario", required=True, help="scenario file, or a bundled name such as fourway.json")
    run.add_argument("--seed", type=_u64, default=0, help="master seed (default 0)")
    run.add_argument("--trace", type=Path, help="write the JSON-lines trace here")
    run.add_argument("--summary", type=Path, help="write the JSON summary here")
    run.add_argument("--snapshot-at", type=_ms, action="append", default=[], metavar="MS")
    run.add_argument("--snapshot-dir", type=Path, default=Path("."))
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--halt-on-violation", type=_bool, default=None, metavar="BOOL")
    run.add_argument("--max-time", type=_ms, default=None, metavar="MS")

    rep = sub.add_parser("replay", help="re-check a saved trace offline")
    rep.add_argument("trace", type=Path)
    rep.add_argument("--summary", type=Path)

    ren = sub.add_parser("render", help="SVG snapshot of a saved trace")
    ren.add_argument("trace", type=Path)
    ren.add_argument("--at", type=_ms, required=True, metavar="MS")
    ren.add_argument("--out", type=Path, required=True)
    return ap


def _write_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scn = load_scenario(args.scenario, args.overrides)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    res = run_scenario(scn, args.seed, halt_on_violation=args.halt_on_violation, max_time=args.max_time)
    if args.trace:
        res.trace.write(args.trace)
    if args.summary:
        _write_json(args.summary, res.summary())
    for t in args.snapshot_at:
        try:
            render_snapshot(res.trace, t, args.snapshot_dir / f"{scn.name}_{args.seed}_{t}.svg", scn.geometry)
        except TimeOutOfRange as exc:
            print(f"config error: --snapshot-at {exc}", file=sys.stderr)
            return EXIT_CONFIG
    done = sum(loc == "done" for loc in res.locs.values())
    print(
        f"{scn.name} seed={res.seed} t_end={res.trace.end_time}ms vehicles_done={done}/{len(res.locs)} "
        f"violations={len(res.violations)} exit={res.exit_code}"
    )
    for v in res.violations:
        print(f"  violation {v.property} t={v.time}: {v.detail}", file=sys.stderr)
    return res.exit_code


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        trace = read_trace(args.trace)
    except (MalformedTrace, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    timing = (trace.header.get("scenario") or {}).get("timing") or {}
    violations = replay(trace, layout_from_header(trace.header))
    out = {
        "violations": [v.to_dict() for v in violations],
        "trace_checks": {
            "geocast": [v.to_dict() for v in check_geocast_trace(trace)],
            "registration": [
                v.to_dict() for v in check_registration_trace(trace, timing.get("d", 400), timing.get("d1", 4800))
            ],
        },
        "progress": progress_report(trace).to_dict(),
    }
    if args.summary:
        _write_json(args.summary, out)
    else:
        print(json.dumps(out, indent=2))
    rep = progress_report(trace)
    return EXIT_OK if not violations and not rep.non_departed else EXIT_FAIL


def cmd_render(args: argparse.Namespace) -> int:
    try:
        trace = read_trace(args.trace)
        render_snapshot(trace, args.at, args.out)
    except (MalformedTrace, OSError, TimeOutOfRange) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return {"run": cmd_run, "replay": cmd_replay, "render": cmd_render}[args.cmd](args)


if __name__ == "__main__":
    sys.exit(main())
