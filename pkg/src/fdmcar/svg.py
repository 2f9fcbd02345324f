"""Minimal static SVG line plots (band plots and power curves)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=64, right=24, top=32, bottom=48)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1.0, self.y1 + 1.0
        self.w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        return MARGIN["top"] + (self.y1 - np.asarray(y, dtype=float)) / (self.y1 - self.y0) * self.h

    def points(self, x, y) -> str:
        return " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self.px(x), self.py(y)))

    def frame(self, title, xlabel, ylabel) -> list[str]:
        left, top = MARGIN["left"], MARGIN["top"]
        out = [
            f'<rect x="{left}" y="{top}" width="{self.w}" height="{self.h}" fill="none" stroke="#333"/>',
            f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
        ]
        for v in np.linspace(self.x0, self.x1, 6):
            x = _fmt(self.px(v))
            out.append(f'<line x1="{x}" x2="{x}" y1="{top + self.h}" y2="{top + self.h + 4}" stroke="#333"/>')
            out.append(f'<text x="{x}" y="{top + self.h + 18}" text-anchor="middle" font-size="10">{_fmt(v)}</text>')
        for v in np.linspace(self.y0, self.y1, 6):
            y = _fmt(self.py(v))
            out.append(f'<line x1="{left - 4}" x2="{left}" y1="{y}" y2="{y}" stroke="#333"/>')
            out.append(f'<text x="{left - 6}" y="{y}" text-anchor="end" dominant-baseline="middle" font-size="10">{_fmt(v)}</text>')
        return out


def _document(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>', *body, "</svg>"]) + "\n"


def band_svg(t, center, half_width: float, level: float, title: str = "") -> str:
    """Mean-difference curve with its constant-width band and the zero line."""
    t = np.asarray(t, dtype=float)
    center = np.asarray(center, dtype=float)
    lo, hi = center - half_width, center + half_width
    ymin, ymax = min(lo.min(), 0.0), max(hi.max(), 0.0)
    pad = 0.05 * (ymax - ymin or 1.0)
    ax = _Axes((t.min(), t.max()), (ymin - pad, ymax + pad))
    body = ax.frame(title or f"{level:.0%} simultaneous band", "t", "mu_A - mu_B")
    # segments between gaps in t are drawn separately
    gaps = np.flatnonzero(np.diff(t) > 1.5 * np.min(np.diff(t))) + 1 if t.size > 1 else []
    for seg in np.split(np.arange(t.size), gaps):
        poly = ax.points(np.r_[t[seg], t[seg][::-1]], np.r_[hi[seg], lo[seg][::-1]])
        body.append(f'<polygon points="{poly}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>')
        body.append(f'<polyline points="{ax.points(t[seg], center[seg])}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    zero = _fmt(ax.py(0.0))
    body.append(
        f'<line x1="{_fmt(ax.px(t.min()))}" x2="{_fmt(ax.px(t.max()))}" y1="{zero}" y2="{zero}" '
        'stroke="#333" stroke-dasharray="4 3"/>'
    )
    return _document(body)


def power_svg(b_grid, curves: dict, alpha: float, title: str = "Rejection rates") -> str:
    """Rejection rate against the upper censoring bound, one line per method."""
    b = np.asarray(b_grid, dtype=float)
    ax = _Axes((b.min(), b.max()), (0.0, 1.0))
    body = ax.frame(title, "b", "rejection rate")
    a = _fmt(ax.py(alpha))
    body.append(f'<line x1="{_fmt(ax.px(b.min()))}" x2="{_fmt(ax.px(b.max()))}" y1="{a}" y2="{a}" stroke="#999" stroke-dasharray="4 3"/>')
    for k, (name, rates) in enumerate(curves.items()):
        color = COLORS[k % len(COLORS)]
        body.append(f'<polyline points="{ax.points(b, rates)}" fill="none" stroke="{color}" stroke-width="2"/>')
        y = MARGIN["top"] + 14 + 16 * k
        x = MARGIN["left"] + 10
        body.append(f'<line x1="{x}" x2="{x + 20}" y1="{y}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{x + 26}" y="{y}" dominant-baseline="middle" font-size="11">{escape(name)}</text>')
    return _document(body)
