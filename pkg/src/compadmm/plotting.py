"""Self-contained SVG line plots of gap against oracle calls or wall time."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

AXES = {
    "oracle": ("oracle_calls", "oracle calls"),
    "oracle_calls": ("oracle_calls", "oracle calls"),
    "time": ("wall_ns", "wall time (s)"),
    "wall_ns": ("wall_ns", "wall time (s)"),
}
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 20, 50


def _num(v):
    return f"{v:.2f}"


def _series(trace, column, gap):
    pts = []
    for row in trace.rows:
        y = getattr(row, gap)
        if y is None or not y > 0:
            continue
        x = getattr(row, column)
        pts.append((x / 1e9 if column == "wall_ns" else float(x), math.log10(y)))
    return pts


def render_svg(traces, axis="oracle", gap="objective_gap") -> str:
    """SVG text with one polyline per trace; rows with nonpositive gaps are skipped."""
    if not traces:
        raise ValueError("no traces to plot")
    if axis not in AXES:
        raise ValueError(f"axis must be one of {sorted(AXES)}")
    column, xlabel = AXES[axis]
    series = [(t.run_id, _series(t, column, gap)) for t in traces]
    if any(not pts for _, pts in series):
        raise ValueError(f"a trace has no positive {gap} values")
    xs = [p[0] for _, pts in series for p in pts]
    ys = [p[1] for _, pts in series for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    step = max(1, (y1 - y0) // 8)
    for e in range(y0, y1 + 1, step):
        y = _num(sy(e))
        out.append(f'<line x1="{LEFT}" y1="{y}" x2="{LEFT + pw}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{e}</text>')
    for i in range(5):
        v = x0 + (x1 - x0) * i / 4
        out.append(f'<text x="{_num(sx(v))}" y="{TOP + ph + 16}" text-anchor="middle">{v:.4g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {TOP + ph / 2:.2f})">{escape(gap.replace("_", " "))} (log scale)</text>'
    )
    for k, (name, pts) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        coords = " ".join(f"{_num(sx(a))},{_num(sy(b))}" for a, b in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = TOP + 14 + 18 * k
        lx = LEFT + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}" dominant-baseline="middle">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(traces, axis, out_path, gap="objective_gap"):
    text = render_svg(traces, axis, gap)
    with open(out_path, "w", newline="\n") as fh:
        fh.write(text)
    return out_path
