"""Trajectory plot: occupied cells in grey, robot path as zone-coloured points."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .maps import OccupancyGrid

ZONE_COLORS = {"green": "#2ca02c", "yellow": "#e6b800", "red": "#d62728"}


def trajectory_svg(grid: OccupancyGrid, log, scale: float = 20.0) -> str:
    """Render ``log`` (a MetricsLog) over ``grid``; one SVG unit is ``1/scale`` m."""
    res = grid.resolution
    W, H = grid.width * res * scale, grid.height * res * scale
    ox, oy = grid.origin.x, grid.origin.y

    def to_px(x, y):
        return (x - ox) * scale, H - (y - oy) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
           f'viewBox="0 0 {W:.2f} {H:.2f}">',
           f'<rect width="{W:.2f}" height="{H:.2f}" fill="white"/>']
    js, is_ = np.nonzero(grid.cells)
    s = res * scale
    for j, i in zip(js, is_):
        px, py = i * s, H - (j + 1) * s
        out.append(f'<rect x="{px:.2f}" y="{py:.2f}" width="{s:.2f}" height="{s:.2f}" fill="#888"/>')
    xs, ys, zones = log.column("x"), log.column("y"), log.column("zone")
    pts = " ".join("%.2f,%.2f" % to_px(x, y) for x, y in zip(xs, ys))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#444" stroke-width="1"/>')
    for x, y, z in zip(xs, ys, zones):
        px, py = to_px(x, y)
        color = ZONE_COLORS.get(z, "#1f77b4")
        out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2" fill="{color}"/>')
    title = f"{log.summary.scenario} / {log.summary.controller}"
    out.append(f'<text x="4" y="14" font-size="12">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
