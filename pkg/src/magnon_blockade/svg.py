"""Dependency-free SVG heatmaps of log10 g2(0) sweep grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidParameterError
from .experiments import SweepGrid, locate_minimum

# viridis anchors
_PALETTE = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
], dtype=float)
FLAGGED_COLOR = "#bbbbbb"

AXIS_LABELS = {
    "delta1": "δ₁/κ", "delta2": "δ₂/κ", "delta_q": "δ_q/κ", "g1": "g₁/κ", "g2": "g₂/κ",
    "g2_ratio": "g₂/g₁", "omega_drive": "Ω/κ", "n_th1": "n_th1", "n_th2": "n_th2",
}


@dataclass(frozen=True)
class HeatmapStyle:
    width: int = 640
    height: int = 480
    margin_left: int = 70
    margin_bottom: int = 55
    margin_top: int = 30
    colorbar_width: int = 18
    colorbar_gap: int = 20
    colorbar_label_room: int = 60
    title: str | None = None


def color(t: float) -> str:
    """Map t in [0, 1] onto the palette."""
    t = min(max(t, 0.0), 1.0) * (len(_PALETTE) - 1)
    k = min(int(t), len(_PALETTE) - 2)
    rgb = _PALETTE[k] + (t - k) * (_PALETTE[k + 1] - _PALETTE[k])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _edges(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    mid = (v[1:] + v[:-1]) / 2
    return np.concatenate([[v[0] - (v[1] - v[0]) / 2], mid, [v[-1] + (v[-1] - v[-2]) / 2]])


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def render_heatmap(grid: SweepGrid, channel: str = "numeric", style: HeatmapStyle = HeatmapStyle()) -> str:
    """SVG heatmap of log10 g2(0) with axis labels, a colorbar and minimum crosshairs."""
    if len(grid.axes) != 2:
        raise InvalidParameterError("heatmaps need a 2-D grid; write 1-D sweeps as CSV curves instead")
    if channel not in grid.values:
        raise InvalidParameterError(f"grid has no {channel!r} channel")
    ax1, ax2 = grid.axes
    values = np.asarray(grid.values[channel], dtype=float)
    flags = np.asarray(grid.flags.get(channel, ~np.isfinite(values)), dtype=bool) | ~np.isfinite(values)
    positive = values[(~flags) & (values > 0)]
    floor = positive.min() if positive.size else 1.0
    logv = np.log10(np.where(values > 0, values, floor))
    valid = logv[~flags]
    lo, hi = (float(valid.min()), float(valid.max())) if valid.size else (0.0, 0.0)
    span = hi - lo

    plot_w = style.width - style.margin_left - style.colorbar_gap - style.colorbar_width - style.colorbar_label_room
    plot_h = style.height - style.margin_top - style.margin_bottom
    x0, y0 = style.margin_left, style.margin_top
    e1, e2 = _edges(ax1.values), _edges(ax2.values)

    def px(x):
        return x0 + (x - e1[0]) / (e1[-1] - e1[0]) * plot_w

    def py(y):
        return y0 + plot_h - (y - e2[0]) / (e2[-1] - e2[0]) * plot_h

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{style.width}" height="{style.height}" '
        f'viewBox="0 0 {style.width} {style.height}" font-family="sans-serif" font-size="12">',
    ]
    if style.title:
        out.append(f'<text x="{style.width / 2:.2f}" y="18" text-anchor="middle">{escape(style.title)}</text>')
    out.append('<g class="cells" shape-rendering="crispEdges">')
    for i in range(len(ax1.values)):
        for j in range(len(ax2.values)):
            xa, xb = sorted((px(e1[i]), px(e1[i + 1])))
            ya, yb = sorted((py(e2[j]), py(e2[j + 1])))
            fill = FLAGGED_COLOR if flags[i, j] else color((logv[i, j] - lo) / span if span > 0 else 0.5)
            out.append(f'<rect class="cell" x="{xa:.3f}" y="{ya:.3f}" width="{xb - xa:.3f}" '
                       f'height="{yb - ya:.3f}" fill="{fill}"/>')
    out.append("</g>")

    # axes frame and ticks
    out.append(f'<rect x="{x0}" y="{y0}" width="{plot_w:.3f}" height="{plot_h:.3f}" fill="none" stroke="black"/>')
    for k in range(5):
        xv = ax1.values[0] + k * (ax1.values[-1] - ax1.values[0]) / 4
        yv = ax2.values[0] + k * (ax2.values[-1] - ax2.values[0]) / 4
        out.append(f'<text x="{px(xv):.2f}" y="{y0 + plot_h + 16}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<text x="{x0 - 6}" y="{py(yv) + 4:.2f}" text-anchor="end">{_fmt(yv)}</text>')
    out.append(f'<text x="{x0 + plot_w / 2:.2f}" y="{style.height - 12}" text-anchor="middle">'
               f'{escape(AXIS_LABELS.get(ax1.name, ax1.name))}</text>')
    out.append(f'<text x="16" y="{y0 + plot_h / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {y0 + plot_h / 2:.2f})">{escape(AXIS_LABELS.get(ax2.name, ax2.name))}</text>')

    minimum = grid.minimum.get(channel) or locate_minimum(grid.axes, values, flags, channel)
    if minimum is not None:
        cx, cy = px(minimum.coords[0]), py(minimum.coords[1])
        out.append(f'<g class="crosshair" stroke="white" stroke-width="1.2" stroke-dasharray="5,4" '
                   f'data-x="{minimum.coords[0]!r}" data-y="{minimum.coords[1]!r}">')
        out.append(f'<line x1="{cx:.3f}" y1="{y0}" x2="{cx:.3f}" y2="{y0 + plot_h:.3f}"/>')
        out.append(f'<line x1="{x0}" y1="{cy:.3f}" x2="{x0 + plot_w:.3f}" y2="{cy:.3f}"/>')
        out.append("</g>")

    # colorbar
    bx = x0 + plot_w + style.colorbar_gap
    out.append('<g class="colorbar">')
    if span > 0:
        steps = 64
        for k in range(steps):
            h = plot_h / steps
            out.append(f'<rect x="{bx:.3f}" y="{y0 + plot_h - (k + 1) * h:.3f}" width="{style.colorbar_width}" '
                       f'height="{h + 0.5:.3f}" fill="{color((k + 0.5) / steps)}"/>')
    else:
        out.append(f'<rect x="{bx:.3f}" y="{y0}" width="{style.colorbar_width}" height="{plot_h:.3f}" '
                   f'fill="{color(0.5)}"/>')
    out.append(f'<rect x="{bx:.3f}" y="{y0}" width="{style.colorbar_width}" height="{plot_h:.3f}" '
               f'fill="none" stroke="black"/>')
    ticks = [lo + k * span / 4 for k in range(5)] if span > 0 else [lo]
    for v in ticks:
        yv = y0 + plot_h - ((v - lo) / span * plot_h if span > 0 else plot_h / 2)
        out.append(f'<text x="{bx + style.colorbar_width + 4:.3f}" y="{yv + 4:.2f}">{_fmt(v)}</text>')
    out.append(f'<text x="{bx + style.colorbar_width / 2:.3f}" y="{y0 - 8}" text-anchor="middle">'
               'log₁₀ g²(0)</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def is_finite_number(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)
