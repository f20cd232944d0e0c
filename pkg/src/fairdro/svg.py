"""Tiny hand-rolled SVG emitter for scatter and line charts.

Plots are presentation-only; no external plotting dependency is pulled in.
"""

from __future__ import annotations

import math

_W, _H = 640, 480
_MARGIN = 60
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]


def _finite(values):
    return [v for v in values if math.isfinite(v)]


def _axis_range(values):
    vals = _finite(values)
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, xs, ys, title, xlabel, ylabel):
        self.x0, self.x1 = _axis_range(xs)
        self.y0, self.y1 = _axis_range(ys)
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W/2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
            f'<text x="{_W/2}" y="{_H-12}" text-anchor="middle" font-size="12">{xlabel}</text>',
            f'<text x="16" y="{_H/2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {_H/2})">{ylabel}</text>',
            f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_W-2*_MARGIN}" '
            f'height="{_H-2*_MARGIN}" fill="none" stroke="#888"/>',
        ]
        self._ticks()

    def px(self, x):
        return _MARGIN + (x - self.x0) / (self.x1 - self.x0) * (_W - 2 * _MARGIN)

    def py(self, y):
        return _H - _MARGIN - (y - self.y0) / (self.y1 - self.y0) * (_H - 2 * _MARGIN)

    def _ticks(self):
        for k in range(5):
            fx = self.x0 + k / 4 * (self.x1 - self.x0)
            fy = self.y0 + k / 4 * (self.y1 - self.y0)
            self.parts.append(
                f'<text x="{self.px(fx):.1f}" y="{_H-_MARGIN+16}" '
                f'text-anchor="middle" font-size="10">{fx:.3g}</text>')
            self.parts.append(
                f'<text x="{_MARGIN-6}" y="{self.py(fy):.1f}" '
                f'text-anchor="end" font-size="10">{fy:.3g}</text>')

    def legend(self, names):
        for k, name in enumerate(names):
            y = _MARGIN + 16 + 16 * k
            color = _COLORS[k % len(_COLORS)]
            self.parts.append(
                f'<circle cx="{_W-_MARGIN-110}" cy="{y-4}" r="4" fill="{color}"/>')
            self.parts.append(
                f'<text x="{_W-_MARGIN-100}" y="{y}" font-size="11">{name}</text>')

    def finish(self):
        self.parts.append("</svg>")
        return "\n".join(self.parts)


def scatter_svg(groups: dict, title="", xlabel="x1", ylabel="x2") -> str:
    """groups maps a label to an (n, 2) array of points."""
    xs, ys = [], []
    for pts in groups.values():
        xs.extend(float(p[0]) for p in pts)
        ys.extend(float(p[1]) for p in pts)
    canvas = _Canvas(xs, ys, title, xlabel, ylabel)
    for k, (name, pts) in enumerate(groups.items()):
        color = _COLORS[k % len(_COLORS)]
        for p in pts:
            if not (math.isfinite(p[0]) and math.isfinite(p[1])):
                continue
            canvas.parts.append(
                f'<circle cx="{canvas.px(float(p[0])):.1f}" '
                f'cy="{canvas.py(float(p[1])):.1f}" r="2.5" '
                f'fill="{color}" fill-opacity="0.6"/>')
    canvas.legend(list(groups))
    return canvas.finish()


def lines_svg(series: dict, title="", xlabel="", ylabel="") -> str:
    """series maps a label to a list of (x, y) pairs drawn as a polyline."""
    xs, ys = [], []
    for pts in series.values():
        xs.extend(float(p[0]) for p in pts)
        ys.extend(float(p[1]) for p in pts)
    canvas = _Canvas(xs, ys, title, xlabel, ylabel)
    for k, (name, pts) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(
            f"{canvas.px(float(x)):.1f},{canvas.py(float(y)):.1f}"
            for x, y in pts if math.isfinite(x) and math.isfinite(y))
        canvas.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>')
    canvas.legend(list(series))
    return canvas.finish()
