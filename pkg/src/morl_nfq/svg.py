"""Dependency-free SVG charts. CSVs remain the authoritative outputs."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=64, right=120, top=36, bottom=52)
PALETTE = ["#1f4e9c", "#2e8b57", "#8a2be2", "#d18b00", "#008b8b", "#7a7a7a"]
FRONT_COLOR = "#d62728"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + step * 1e-9, step)]


class _Frame:
    def __init__(self, xlim, ylim, title, xlabel, ylabel, x_ticks=True):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
        ]
        self._axes(xlabel, ylabel, x_ticks)

    def px(self, x):
        span = WIDTH - MARGIN["left"] - MARGIN["right"]
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * span

    def py(self, y):
        span = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        return HEIGHT - MARGIN["bottom"] - (y - self.y0) / (self.y1 - self.y0) * span

    def _axes(self, xlabel, ylabel, x_ticks):
        left, bottom = MARGIN["left"], HEIGHT - MARGIN["bottom"]
        right, top = WIDTH - MARGIN["right"], MARGIN["top"]
        p = self.parts
        p.append(f'<path d="M{left},{top} V{bottom} H{right}" stroke="black" fill="none"/>')
        for v in _ticks(self.x0, self.x1) if x_ticks else []:
            x = self.px(v)
            p.append(f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 4}" stroke="black"/>')
            p.append(f'<text x="{x:.1f}" y="{bottom + 16}" text-anchor="middle">{v:g}</text>')
        for v in _ticks(self.y0, self.y1):
            y = self.py(v)
            p.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
            p.append(f'<text x="{left - 7}" y="{y + 4:.1f}" text-anchor="end">{v:g}</text>')
        p.append(f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle">{escape(xlabel)}</text>')
        p.append(f'<text transform="translate(16,{(top + bottom) / 2:.1f}) rotate(-90)" '
                 f'text-anchor="middle">{escape(ylabel)}</text>')

    def legend(self, entries):
        x = WIDTH - MARGIN["right"] + 14
        for k, (label, color) in enumerate(entries):
            y = MARGIN["top"] + 16 * k + 8
            self.parts.append(f'<rect x="{x}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
            self.parts.append(f'<text x="{x + 15}" y="{y + 1}">{escape(str(label))}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def scatter_svg(points, highlight, title="", xlabel="", ylabel="", lim=(0.0, 10.0)) -> str:
    """Scatter plot; highlighted points are drawn last with ``class="front"``."""
    pts = np.asarray(points, dtype=float)
    highlight = np.asarray(highlight, dtype=bool)
    frame = _Frame(lim, lim, title, xlabel, ylabel)
    for (x, y) in pts[~highlight]:
        frame.parts.append(f'<circle class="pt" cx="{frame.px(x):.2f}" cy="{frame.py(y):.2f}" r="1.2" '
                           f'fill="#9aa5b1" fill-opacity="0.5"/>')
    for (x, y) in pts[highlight]:
        frame.parts.append(f'<circle class="front" cx="{frame.px(x):.2f}" cy="{frame.py(y):.2f}" r="3" '
                           f'fill="{FRONT_COLOR}"/>')
    frame.legend([("all schedules", "#9aa5b1"), ("Pareto front", FRONT_COLOR)])
    return frame.render()


def box_svg(rows, title="", ylabel="scalarized reward") -> str:
    """Box plot of aggregate rows grouped by episode bucket, one box per position."""
    buckets = list(dict.fromkeys(r.episode_bucket for r in rows))
    positions = list(dict.fromkeys(r.task_position for r in rows))
    lo = min((r.whisker_low for r in rows), default=0.0)
    hi = max((r.whisker_high for r in rows), default=10.0)
    pad = 0.05 * (hi - lo or 1.0)
    frame = _Frame((0.0, float(len(buckets))), (lo - pad, hi + pad), title, "episode bucket", ylabel,
                   x_ticks=False)
    colors = {pos: (FRONT_COLOR if pos == "baseline" else PALETTE[k % len(PALETTE)]) for k, pos in enumerate(positions)}
    slot = 1.0 / (len(positions) + 1)
    for b, bucket in enumerate(buckets):
        frame.parts.append(f'<text x="{frame.px(b + 0.5):.1f}" y="{HEIGHT - MARGIN["bottom"] + 16}" '
                           f'text-anchor="middle">{escape(bucket)}</text>')
        for k, pos in enumerate(positions):
            row = next((r for r in rows if r.episode_bucket == bucket and r.task_position == pos), None)
            if row is None:
                continue
            cx = b + slot * (k + 1)
            x0, x1 = frame.px(cx - 0.35 * slot), frame.px(cx + 0.35 * slot)
            xm = frame.px(cx)
            c = colors[pos]
            frame.parts.append(
                f'<g class="box" stroke="{c}" fill="none">'
                f'<line x1="{xm:.1f}" y1="{frame.py(row.whisker_low):.1f}" x2="{xm:.1f}" y2="{frame.py(row.q1):.1f}"/>'
                f'<line x1="{xm:.1f}" y1="{frame.py(row.q3):.1f}" x2="{xm:.1f}" y2="{frame.py(row.whisker_high):.1f}"/>'
                f'<rect x="{x0:.1f}" y="{frame.py(row.q3):.1f}" width="{x1 - x0:.1f}" '
                f'height="{frame.py(row.q1) - frame.py(row.q3):.1f}" fill="{c}" fill-opacity="0.25"/>'
                f'<line x1="{x0:.1f}" y1="{frame.py(row.median):.1f}" x2="{x1:.1f}" y2="{frame.py(row.median):.1f}" '
                f'stroke-width="2"/></g>')
    frame.legend([(pos, colors[pos]) for pos in positions])
    return frame.render()


def lines_svg(series: dict, title="", xlabel="", ylabel="", zero_line=True) -> str:
    """One polyline per labelled series of (x, y) points."""
    xs = [x for pts in series.values() for x, _ in pts] or [0.0, 1.0]
    ys = [y for pts in series.values() for _, y in pts] or [0.0, 1.0]
    pad = 0.05 * ((max(ys) - min(ys)) or 1.0)
    frame = _Frame((min(xs), max(xs)), (min(ys) - pad, max(ys) + pad), title, xlabel, ylabel)
    if zero_line and frame.y0 < 0 < frame.y1:
        frame.parts.append(f'<line x1="{frame.px(frame.x0):.1f}" y1="{frame.py(0):.1f}" '
                           f'x2="{frame.px(frame.x1):.1f}" y2="{frame.py(0):.1f}" stroke="#bbb" stroke-dasharray="4 3"/>')
    entries = []
    for k, (label, pts) in enumerate(series.items()):
        c = PALETTE[k % len(PALETTE)]
        path = " ".join(f"{frame.px(x):.2f},{frame.py(y):.2f}" for x, y in pts)
        frame.parts.append(f'<polyline class="series" points="{path}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        entries.append((label, c))
    frame.legend(entries)
    return frame.render()
