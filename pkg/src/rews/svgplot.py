"""Tiny dependency-free SVG chart writer.

Only what the simulation reports need: multi-series line charts and a
Nyquist locus with a forbidden circle.  Output is a self-contained
vector file suitable for hermetic CI artifacts.
"""

from __future__ import annotations

import math

_WIDTH = 720
_HEIGHT = 480
_MARGIN = 60
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _finite(values):
    return [v for v in values if math.isfinite(v)]


def _axis_range(lo, hi):
    if lo == hi:
        pad = 1.0 if lo == 0 else abs(lo) * 0.1
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _ticks(lo, hi, n=6):
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


class _Canvas:
    def __init__(self, x_range, y_range, title, xlabel, ylabel, square=False):
        self.x0, self.x1 = _axis_range(*x_range)
        self.y0, self.y1 = _axis_range(*y_range)
        if square:
            # Equal units per pixel on both axes.
            plot_w = _WIDTH - 2 * _MARGIN
            plot_h = _HEIGHT - 2 * _MARGIN
            sx = (self.x1 - self.x0) / plot_w
            sy = (self.y1 - self.y0) / plot_h
            s = max(sx, sy)
            cx, cy = 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)
            self.x0, self.x1 = cx - s * plot_w / 2, cx + s * plot_w / 2
            self.y0, self.y1 = cy - s * plot_h / 2, cy + s * plot_h / 2
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
            f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
            f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
            f'<text x="{_WIDTH / 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{title}</text>',
            f'<text x="{_WIDTH / 2}" y="{_HEIGHT - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{xlabel}</text>',
            f'<text x="16" y="{_HEIGHT / 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {_HEIGHT / 2})">{ylabel}</text>',
        ]
        self._axes()

    def px(self, x):
        return _MARGIN + (x - self.x0) / (self.x1 - self.x0) * (_WIDTH - 2 * _MARGIN)

    def py(self, y):
        return _HEIGHT - _MARGIN - (y - self.y0) / (self.y1 - self.y0) * (_HEIGHT - 2 * _MARGIN)

    def _axes(self):
        left, right = _MARGIN, _WIDTH - _MARGIN
        top, bottom = _MARGIN, _HEIGHT - _MARGIN
        self.parts.append(
            f'<rect x="{left}" y="{top}" width="{right - left}" '
            f'height="{bottom - top}" fill="none" stroke="black"/>')
        for t in _ticks(self.x0, self.x1):
            x = self.px(t)
            self.parts.append(
                f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 5}" stroke="black"/>'
                f'<text x="{x:.1f}" y="{bottom + 18}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="10">{t:g}</text>')
        for t in _ticks(self.y0, self.y1):
            y = self.py(t)
            self.parts.append(
                f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>'
                f'<text x="{left - 8}" y="{y + 3:.1f}" text-anchor="end" '
                f'font-family="sans-serif" font-size="10">{t:g}</text>')

    def polyline(self, xs, ys, color):
        pts = []
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                pts.append(f"{self.px(x):.2f},{self.py(y):.2f}")
        if len(pts) >= 2:
            self.parts.append(
                f'<polyline points="{" ".join(pts)}" fill="none" '
                f'stroke="{color}" stroke-width="1.2"/>')

    def circle(self, cx, cy, r, color):
        rx = abs(self.px(cx + r) - self.px(cx))
        self.parts.append(
            f'<circle cx="{self.px(cx):.2f}" cy="{self.py(cy):.2f}" r="{rx:.2f}" '
            f'fill="{color}" fill-opacity="0.15" stroke="{color}"/>')

    def legend(self, labels):
        for i, (label, color) in enumerate(labels):
            y = _MARGIN + 16 + 16 * i
            x = _WIDTH - _MARGIN - 150
            self.parts.append(
                f'<line x1="{x}" y1="{y - 4}" x2="{x + 24}" y2="{y - 4}" '
                f'stroke="{color}" stroke-width="2"/>'
                f'<text x="{x + 30}" y="{y}" font-family="sans-serif" '
                f'font-size="11">{label}</text>')

    def write(self, path):
        self.parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.parts) + "\n")


def line_chart(path, x, series, title="", xlabel="", ylabel=""):
    """Write a line chart; ``series`` is a list of (label, y-values)."""
    xs = list(x)
    all_y = []
    for _, ys in series:
        all_y.extend(_finite(list(ys)))
    if not xs or not all_y:
        raise ValueError("nothing to plot")
    canvas = _Canvas((min(xs), max(xs)), (min(all_y), max(all_y)),
                     title, xlabel, ylabel)
    labels = []
    for i, (label, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        canvas.polyline(xs, list(ys), color)
        labels.append((label, color))
    canvas.legend(labels)
    canvas.write(path)


def nyquist_chart(path, re, im, center, radius, title="Nyquist locus"):
    """Locus of G(jw) with the forbidden disk, equal axis scaling."""
    res, ims = list(re), list(im)
    xs = _finite(res) + [center - radius, center + radius]
    ys = _finite(ims) + [-radius, radius]
    # Clip the view to the disk neighborhood; |G| blows up at low frequency.
    span = 6 * radius
    xs = [max(min(v, center + span), center - span) for v in xs]
    ys = [max(min(v, span), -span) for v in ys]
    canvas = _Canvas((min(xs), max(xs)), (min(ys), max(ys)),
                     title, "Re", "Im", square=True)
    canvas.circle(center, 0.0, radius, "#d62728")
    canvas.polyline(res, ims, "#1f77b4")
    canvas.legend([("G(jω)", "#1f77b4"), ("forbidden disk", "#d62728")])
    canvas.write(path)
