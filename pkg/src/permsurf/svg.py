"""Minimal deterministic SVG emitters for the standard plots: watermelon
chains over a point cloud, staircase level frontiers with probe labels,
grid level plots, and the sloped-rectangle diagram.  No plotting library;
output bytes depend only on the data."""
from __future__ import annotations

import numpy as np


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


class Canvas:
    """Collects SVG elements in a fixed world-coordinate viewport."""

    def __init__(self, width: int, height: int, world):
        self.width = width
        self.height = height
        self.x0, self.x1, self.y0, self.y1 = world
        self.margin = 20.0
        self.elements: list[str] = []

    def px(self, x: float) -> float:
        span = self.x1 - self.x0 or 1.0
        return self.margin + (x - self.x0) / span * (self.width - 2 * self.margin)

    def py(self, y: float) -> float:
        span = self.y1 - self.y0 or 1.0
        return self.height - self.margin - (y - self.y0) / span * (self.height - 2 * self.margin)

    def circle(self, x, y, r=1.5, fill="black"):
        self.elements.append(
            f'<circle cx="{_fmt(self.px(x))}" cy="{_fmt(self.py(y))}" '
            f'r="{_fmt(r)}" fill="{fill}"/>'
        )

    def polyline(self, pts, stroke="black", width=1.0):
        coords = " ".join(f"{_fmt(self.px(x))},{_fmt(self.py(y))}" for x, y in pts)
        self.elements.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{_fmt(width)}"/>'
        )

    def rect(self, x, y, w, h, fill):
        xp, yp = self.px(x), self.py(y + h)
        self.elements.append(
            f'<rect x="{_fmt(xp)}" y="{_fmt(yp)}" '
            f'width="{_fmt(self.px(x + w) - xp)}" '
            f'height="{_fmt(self.py(y) - yp)}" fill="{fill}"/>'
        )

    def text(self, x, y, s, size=12):
        self.elements.append(
            f'<text x="{_fmt(self.px(x))}" y="{_fmt(self.py(y))}" '
            f'font-size="{size}" font-family="sans-serif">{s}</text>'
        )

    def to_string(self) -> str:
        body = "\n".join(self.elements)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f"{body}\n</svg>\n"
        )


def _world_of(xy: np.ndarray):
    if xy.size == 0:
        return (0.0, 1.0, 0.0, 1.0)
    pad_x = 0.02 * (float(np.ptp(xy[:, 0])) or 1.0)
    pad_y = 0.02 * (float(np.ptp(xy[:, 1])) or 1.0)
    return (xy[:, 0].min() - pad_x, xy[:, 0].max() + pad_x,
            xy[:, 1].min() - pad_y, xy[:, 1].max() + pad_y)


def scatter_with_chains(result, ps=None, width=480, height=480) -> str:
    """Watermelon rendering: every point as a dot, adjacent points of each
    decreasing sequence joined by segments."""
    base = ps.xy if ps is not None else result.subset.xy
    cv = Canvas(width, height, _world_of(base))
    for x, y in base:
        cv.circle(x, y, r=1.2, fill="#888888")
    for seq in result.sequences:
        if len(seq) >= 2:
            cv.polyline(seq, stroke="black", width=1.0)
        for x, y in seq:
            cv.circle(x, y, r=1.6, fill="black")
    return cv.to_string()


def staircase_svg(staircase, ps=None, probes=None, width=480, height=480) -> str:
    """Level-frontier staircases; optional probe labels show the surface
    value at given query points."""
    pts = [p for lv in staircase.levels for p in lv]
    base = np.array(pts).reshape(-1, 2) if pts else np.empty((0, 2))
    if ps is not None and len(ps):
        base = np.vstack([base, ps.xy]) if base.size else ps.xy
    if probes:
        base = np.vstack([base, np.array(probes, dtype=float)])
    x0, x1, y0, y1 = _world_of(base)
    cv = Canvas(width, height, (x0, x1, y0, y1))
    for lv in staircase.levels:
        path = [(lv[0, 0], y1)]
        for i, (px, py) in enumerate(lv):
            path.append((px, py))
            if i + 1 < len(lv):
                path.append((lv[i + 1, 0], py))
        path.append((x1, lv[-1, 1]))
        cv.polyline(path, stroke="black", width=1.0)
        for px, py in lv:
            cv.circle(px, py, r=2.0, fill="black")
    if ps is not None:
        for x, y in ps.xy:
            cv.circle(x, y, r=1.2, fill="#888888")
    for x, y in probes or []:
        cv.text(x, y, str(staircase.eval(float(x), float(y))))
    return cv.to_string()


def grid_level_svg(grid, n_levels=12, width=480, height=480) -> str:
    """Grayscale level plot of a grid (light = low, dark = high)."""
    d = grid.domain
    v = grid.values
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo or 1.0
    cv = Canvas(width, height, (d.xs[0], d.xs[-1], d.ys[0], d.ys[-1]))
    for i in range(d.nx - 1):
        for j in range(d.ny - 1):
            level = int((v[i, j] - lo) / span * (n_levels - 1) + 0.5)
            shade = 240 - int(200 * level / max(n_levels - 1, 1))
            cv.rect(d.xs[i], d.ys[j], d.hx, d.hy,
                    f"rgb({shade},{shade},{shade})")
    return cv.to_string()


def rectangle_diagram_svg(beta: float, ps=None, width=560, height=360) -> str:
    """The sloped rectangle 0 < (x+y)/sqrt2 < 1, 0 < (y-x)/sqrt2 < beta,
    with sampled points if given."""
    s2 = 2.0 ** 0.5
    # rotated coords (s, t) map back by x = (s-t)/sqrt2, y = (s+t)/sqrt2
    st = [(0.0, 0.0), (1.0, 0.0), (1.0, beta), (0.0, beta), (0.0, 0.0)]
    corners = np.array([((s - t) / s2, (s + t) / s2) for s, t in st])
    base = corners if ps is None or not len(ps) else np.vstack([corners, ps.xy])
    cv = Canvas(width, height, _world_of(base))
    cv.polyline(corners, stroke="black", width=1.2)
    if ps is not None:
        for x, y in ps.xy:
            cv.circle(x, y, r=1.0, fill="#555555")
    return cv.to_string()
