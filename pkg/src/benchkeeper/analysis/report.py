"""Deterministic CSV + SVG reports of stored runs.

The SVG groups runs by node count along x. Within a group, runs sit at their
position in the common time range, so an event becomes one dashed path with a
vertical segment in every group. Elapsed time is drawn as crosses on the left
axis, energy as circles on the right axis; lighter colors are more recent.
"""
from __future__ import annotations

import csv
import io
from typing import Sequence

from .._time import format_ts
from ..records import EventRecord, RunRecord
from .series import metric_value

WIDTH, HEIGHT = 800, 500
LEFT, RIGHT, TOP, BOTTOM = 80, 720, 40, 440
GROUP_PAD = 0.1  # fraction of each group band left empty on either side
CROSS_HALF = 5.0
CIRCLE_R = 4.5


def _f(x: float) -> str:
    return f"{x:.6f}"


def _node_count(rec: RunRecord, node_param: str) -> int:
    try:
        return int(rec.params[node_param])
    except (KeyError, ValueError):
        raise ValueError(f"run {rec.run_id} has no integer param {node_param!r}") from None


def _sorted_runs(records: Sequence[RunRecord], node_param: str) -> list[RunRecord]:
    return sorted(records, key=lambda r: (_node_count(r, node_param), r.started_at, r.run_id))


def render_csv(
    records: Sequence[RunRecord], node_param: str, elapsed_metric: str = "elapsed", energy_metric: str | None = None
) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["p", "started_at", "elapsed_seconds", "energy_joules", "state"])
    for rec in _sorted_runs(records, node_param):
        elapsed = metric_value(rec, elapsed_metric)
        energy = rec.metrics.get(energy_metric) if energy_metric else None
        writer.writerow(
            [
                _node_count(rec, node_param),
                format_ts(rec.started_at),
                _f(elapsed) if elapsed is not None else "",
                _f(energy) if energy is not None else "",
                rec.state,
            ]
        )
    return buf.getvalue()


def _nice_max(v: float) -> float:
    return v * 1.1 if v > 0 else 1.0


def _color(rank: int, total: int, hue: int) -> str:
    # older runs dark, newer runs bright
    lightness = 25.0 if total <= 1 else 25.0 + 50.0 * rank / (total - 1)
    return f"hsl({hue},70%,{lightness:.1f}%)"


def render_svg(
    records: Sequence[RunRecord],
    events: Sequence[EventRecord],
    node_param: str,
    elapsed_metric: str = "elapsed",
    energy_metric: str | None = None,
) -> str:
    runs = [r for r in _sorted_runs(records, node_param) if metric_value(r, elapsed_metric) is not None]
    groups = sorted({_node_count(r, node_param) for r in runs})
    band = (RIGHT - LEFT) / max(len(groups), 1)

    stamps = [r.started_at.timestamp() for r in runs] + [e.timestamp.timestamp() for e in events]
    t_lo, t_hi = (min(stamps), max(stamps)) if stamps else (0.0, 1.0)
    span = t_hi - t_lo

    def x_of(p: int, ts: float) -> float:
        g = groups.index(p)
        frac = 0.5 if span == 0 else (ts - t_lo) / span
        inner = band * (1 - 2 * GROUP_PAD)
        return LEFT + g * band + band * GROUP_PAD + frac * inner

    elapsed_vals = [metric_value(r, elapsed_metric) for r in runs]
    energy_runs = [r for r in runs if energy_metric and energy_metric in r.metrics]
    y_max_l = _nice_max(max(elapsed_vals, default=0.0))
    y_max_r = _nice_max(max((r.metrics[energy_metric] for r in energy_runs), default=0.0))

    def y_of(v: float, vmax: float) -> float:
        return BOTTOM - (v / vmax) * (BOTTOM - TOP)

    recency = {r.run_id: i for i, r in enumerate(sorted(runs, key=lambda r: (r.started_at, r.run_id)))}

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect x="0" y="0" width="800" height="500" fill="white"/>',
        f'<g id="axes" stroke="black" stroke-width="1" fill="none">'
        f'<path d="M {LEFT} {TOP} V {BOTTOM} H {RIGHT} V {TOP}"/></g>',
        '<g id="labels" font-family="sans-serif" font-size="12" fill="black">',
        f'<text x="{LEFT}" y="{TOP - 12}" text-anchor="middle">elapsed [s]</text>',
        f'<text x="{RIGHT}" y="{TOP - 12}" text-anchor="middle">energy [J]</text>',
        f'<text x="{(LEFT + RIGHT) / 2}" y="{HEIGHT - 20}" text-anchor="middle">nodes ({node_param})</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        y = _f(y_of(frac * y_max_l, y_max_l))
        out.append(f'<text x="{LEFT - 6}" y="{y}" text-anchor="end">{_f(frac * y_max_l)}</text>')
        if energy_runs:
            out.append(f'<text x="{RIGHT + 6}" y="{y}" text-anchor="start">{_f(frac * y_max_r)}</text>')
    for g, p in enumerate(groups):
        out.append(f'<text x="{_f(LEFT + (g + 0.5) * band)}" y="{BOTTOM + 20}" text-anchor="middle">{p}</text>')
    out.append("</g>")

    out.append('<g id="events" stroke="gray" stroke-width="1" stroke-dasharray="6,4" fill="none">')
    for ev in events:
        ts = ev.timestamp.timestamp()
        d = " ".join(f"M {_f(x_of(p, ts))} {TOP} V {BOTTOM}" for p in groups)
        if not d:
            d = f"M {_f((LEFT + RIGHT) / 2)} {TOP} V {BOTTOM}"
        label = ev.label.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
        out.append(f'<path class="event" data-label="{label}" d="{d}"/>')
    out.append("</g>")

    out.append('<g id="elapsed" stroke-width="1.5" fill="none">')
    for rec, val in zip(runs, elapsed_vals):
        x = x_of(_node_count(rec, node_param), rec.started_at.timestamp())
        y = y_of(val, y_max_l)
        h = CROSS_HALF
        out.append(
            f'<path class="cross" stroke="{_color(recency[rec.run_id], len(runs), 220)}" '
            f'd="M {_f(x - h)} {_f(y - h)} L {_f(x + h)} {_f(y + h)} M {_f(x - h)} {_f(y + h)} L {_f(x + h)} {_f(y - h)}"/>'
        )
    out.append("</g>")

    out.append('<g id="energy" stroke-width="1.5" fill="none">')
    for rec in energy_runs:
        x = x_of(_node_count(rec, node_param), rec.started_at.timestamp())
        y = y_of(rec.metrics[energy_metric], y_max_r)
        out.append(
            f'<circle class="energy" cx="{_f(x)}" cy="{_f(y)}" r="{CIRCLE_R}" '
            f'stroke="{_color(recency[rec.run_id], len(runs), 20)}"/>'
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_report(
    records: Sequence[RunRecord],
    events: Sequence[EventRecord],
    node_param: str,
    elapsed_metric: str = "elapsed",
    energy_metric: str | None = None,
) -> tuple[str, str]:
    """Return ``(csv_text, svg_text)``; equal inputs give byte-identical output."""
    if not records:
        raise ValueError("report needs at least one run")
    return (
        render_csv(records, node_param, elapsed_metric, energy_metric),
        render_svg(records, events, node_param, elapsed_metric, energy_metric),
    )
