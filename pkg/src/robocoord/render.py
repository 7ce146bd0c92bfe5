"""SVG snapshots of a trace at a chosen time."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from .geometry import Layout
from .monitor import Monitor, layout_from_header
from .trace import Trace

SCALE = 60.0  # px per metre
MARGIN = 20.0
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
FILL = {"critical": "#f2f2f2", "arrival": "#e8f0fb", "departure": "#eaf6ea"}


class TimeOutOfRange(ValueError):
    pass


def state_at(trace: Trace, at: int, layout: Layout | None = None) -> Monitor:
    """Monitor state after every record with time <= ``at``."""
    if trace.records and not 0 <= at <= trace.end_time:
        raise TimeOutOfRange(f"t={at} outside [0, {trace.end_time}]")
    mon = Monitor(layout or layout_from_header(trace.header))
    for rec in trace.records:
        if rec.time > at:
            break
        mon.feed(rec)
    return mon


def held_zones(mon: Monitor) -> set[str]:
    return {z for sets in mon.crit_sets.values() for s in sets.values() for z in s}


def render_svg(trace: Trace, at: int, layout: Layout | None = None) -> str:
    layout = layout or layout_from_header(trace.header)
    mon = state_at(trace, at, layout)
    held = held_zones(mon)
    rects = [z.footprint for z in layout.zones.values()]
    x0 = min(r.x0 for r in rects)
    y0 = min(r.y0 for r in rects)
    x1 = max(r.x1 for r in rects)
    y1 = max(r.y1 for r in rects)
    width = (x1 - x0) * SCALE + 2 * MARGIN
    height = (y1 - y0) * SCALE + 2 * MARGIN + 20

    def px(p: tuple[float, float]) -> tuple[float, float]:
        # svg y grows downward
        return MARGIN + (p[0] - x0) * SCALE, MARGIN + (y1 - p[1]) * SCALE

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for name, z in sorted(layout.zones.items()):
        r = z.footprint
        left, top = px((r.x0, r.y1))
        fill = "#ffd27f" if name in held else FILL.get(z.kind, "#ffffff")
        cls = "zone held" if name in held else "zone"
        out.append(
            f'<rect class="{cls}" data-zone="{name}" x="{left:.1f}" y="{top:.1f}" '
            f'width="{(r.x1 - r.x0) * SCALE:.1f}" height="{(r.y1 - r.y0) * SCALE:.1f}" fill="{fill}" stroke="#999"/>'
        )
        cx, cy = px(z.center)
        out.append(f'<text x="{cx:.1f}" y="{cy:.1f}" font-size="10" fill="#777" text-anchor="middle">{name}</text>')
    for pid in sorted(mon.routes):
        if pid not in mon.present:
            continue
        color = COLORS[pid % len(COLORS)]
        pts = [mon.pos[pid]] + [layout.zones[z].center for z in mon.myseq.get(pid, ())[1:]]
        path = " ".join(f"{x:.1f},{y:.1f}" for x, y in map(px, pts))
        out.append(
            f'<polyline class="route" points="{path}" fill="none" stroke="{color}" stroke-dasharray="3,3"/>'
        )
    kin = (trace.header.get("scenario") or {}).get("kinematics") or {}
    r_px = float(kin.get("robot_radius", 0.15)) * SCALE
    for pid in sorted(mon.present):
        color = COLORS[pid % len(COLORS)] if isinstance(pid, int) else "#000"
        cx, cy = px(mon.pos[pid])
        out.append(
            f'<circle class="robot" data-pid="{pid}" cx="{cx:.1f}" cy="{cy:.1f}" r="{r_px:.1f}" '
            f'fill="{color}" fill-opacity="0.8"/>'
        )
        out.append(
            f'<text x="{cx:.1f}" y="{cy + 3:.1f}" font-size="9" fill="white" text-anchor="middle">{pid}</text>'
        )
    label = escape(f"t = {at} ms")
    out.append(f'<text x="{MARGIN}" y="{height - 6:.0f}" font-size="12">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_snapshot(trace: Trace, at: int, out_path: str | Path, layout: Layout | None = None) -> Path:
    svg = render_svg(trace, at, layout)
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    return path
