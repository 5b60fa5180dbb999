"""Deterministic SVG output: fixed palette, fixed viewport, no external
processes, suitable for docs and CI snapshots."""

from __future__ import annotations

import numpy as np

__all__ = ["heatmap_svg", "line_svg"]

# 16-stop palette (dark blue -> green -> yellow)
_PALETTE = [
    (68, 1, 84), (71, 19, 101), (72, 36, 117), (70, 52, 128),
    (65, 68, 135), (59, 82, 139), (53, 95, 141), (47, 108, 142),
    (42, 120, 142), (37, 132, 142), (33, 145, 140), (30, 156, 137),
    (34, 168, 132), (47, 180, 124), (68, 191, 112), (94, 201, 98),
]


def _color(v: float) -> str:
    v = min(max(v, 0.0), 1.0)
    pos = v * (len(_PALETTE) - 1)
    i = min(int(pos), len(_PALETTE) - 2)
    t = pos - i
    c0, c1 = _PALETTE[i], _PALETTE[i + 1]
    rgb = tuple(round(a + t * (b - a)) for a, b in zip(c0, c1))
    return f"#{rgb[0]:02x}{rgb[1]:02x}{rgb[2]:02x}"


def _downsample(vals: np.ndarray, max_cells: int = 160):
    sy = max(1, vals.shape[0] // max_cells)
    sx = max(1, vals.shape[1] // max_cells)
    return vals[::sy, ::sx], sy, sx


def heatmap_svg(xs, ys, vals, title: str = "", overlay_points=None,
                width: int = 800, height: int = 600) -> str:
    """Field heatmap; overlay_points is an optional list of (x, y) marks."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    vals = np.asarray(vals, dtype=float)
    sub, sy, sx = _downsample(vals)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    span = hi - lo if hi > lo else 1.0

    mx, my = 50.0, 40.0
    pw, ph = width - 2 * mx, height - 2 * my
    x0, x1 = float(xs[0]), float(xs[-1])
    y0, y1 = float(ys[0]), float(ys[-1])

    def px(x):
        return mx + (x - x0) / (x1 - x0 or 1.0) * pw

    def py(y):
        return my + (y1 - y) / (y1 - y0 or 1.0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">']
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
                   f'font-family="monospace" font-size="14">{title}</text>')
    ny, nx = sub.shape
    cw = pw / nx
    ch = ph / ny
    for j in range(ny):
        for i in range(nx):
            c = _color((sub[j, i] - lo) / span)
            x = mx + i * cw
            y = my + ph - (j + 1) * ch
            out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.5:.2f}" '
                       f'height="{ch + 0.5:.2f}" fill="{c}"/>')
    for pt in overlay_points or []:
        out.append(f'<circle cx="{px(pt[0]):.2f}" cy="{py(pt[1]):.2f}" r="4" '
                   f'fill="none" stroke="red" stroke-width="2"/>')
    out.append(f'<text x="{mx:.1f}" y="{height - 10:.1f}" font-family="monospace" '
               f'font-size="11">range [{lo:.6g}, {hi:.6g}]</text>')
    out.append("</svg>")
    return "\n".join(out)


def line_svg(xs, vals, title: str = "", width: int = 800, height: int = 400) -> str:
    xs = np.asarray(xs, dtype=float)
    vals = np.asarray(vals, dtype=float)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    span = hi - lo if hi > lo else 1.0
    mx, my = 50.0, 40.0
    pw, ph = width - 2 * mx, height - 2 * my
    pts = []
    for x, v in zip(xs, vals):
        sx = mx + (x - xs[0]) / (xs[-1] - xs[0] or 1.0) * pw
        sv = my + ph - (v - lo) / span * ph
        pts.append(f"{sx:.2f},{sv:.2f}")
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
                   f'font-family="monospace" font-size="14">{title}</text>')
    out.append(f'<polyline points="{" ".join(pts)}" fill="none" '
               f'stroke="#2a788e" stroke-width="1.5"/>')
    out.append(f'<text x="{mx:.1f}" y="{height - 10:.1f}" font-family="monospace" '
               f'font-size="11">range [{lo:.6g}, {hi:.6g}]</text>')
    out.append("</svg>")
    return "\n".join(out)
