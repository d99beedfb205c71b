"""Minimal deterministic SVG line/scatter panels.

Output is plain text with coordinates rounded to two decimals, so the same
data always produces the same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html import escape
from typing import Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

PANEL_W = 360
PANEL_H = 240
MARGIN = 44


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    scatter: bool = False


@dataclass
class Panel:
    title: str
    series: list[Series] = field(default_factory=list)
    xlabel: str = ""
    ylabel: str = ""


def _f(v: float) -> str:
    return f"{v:.2f}"


def _bounds(vals: np.ndarray) -> tuple[float, float]:
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _panel_svg(panel: Panel, ox: float, oy: float) -> list[str]:
    out = [f'<g transform="translate({_f(ox)},{_f(oy)})">']
    iw, ih = PANEL_W - 2 * MARGIN, PANEL_H - 2 * MARGIN
    out.append(
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{iw}" height="{ih}" fill="none" stroke="#444" stroke-width="1"/>'
    )
    out.append(f'<text x="{PANEL_W / 2:.2f}" y="{MARGIN - 14}" text-anchor="middle" font-size="12">{escape(panel.title)}</text>')
    if panel.xlabel:
        out.append(f'<text x="{PANEL_W / 2:.2f}" y="{PANEL_H - 8}" text-anchor="middle" font-size="10">{escape(panel.xlabel)}</text>')
    if panel.ylabel:
        out.append(
            f'<text x="12" y="{PANEL_H / 2:.2f}" text-anchor="middle" font-size="10" '
            f'transform="rotate(-90 12 {PANEL_H / 2:.2f})">{escape(panel.ylabel)}</text>'
        )
    usable = [s for s in panel.series if len(s.x)]
    if not usable:
        out.append("</g>")
        return out
    xs = np.concatenate([np.asarray(s.x, dtype=float) for s in usable])
    ys = np.concatenate([np.asarray(s.y, dtype=float) for s in usable])
    x0, x1 = _bounds(xs)
    y0, y1 = _bounds(ys)
    for v, anchor, x, y in (
        (x0, "start", MARGIN, MARGIN + ih + 14),
        (x1, "end", MARGIN + iw, MARGIN + ih + 14),
    ):
        out.append(f'<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="9">{v:.4g}</text>')
    out.append(f'<text x="{MARGIN - 4}" y="{MARGIN + ih}" text-anchor="end" font-size="9">{y0:.4g}</text>')
    out.append(f'<text x="{MARGIN - 4}" y="{MARGIN + 8}" text-anchor="end" font-size="9">{y1:.4g}</text>')

    def px(x):
        return MARGIN + (np.asarray(x, dtype=float) - x0) / (x1 - x0) * iw

    def py(y):
        return MARGIN + ih - (np.asarray(y, dtype=float) - y0) / (y1 - y0) * ih

    for i, s in enumerate(usable):
        color = PALETTE[i % len(PALETTE)]
        X, Y = px(s.x), py(s.y)
        if s.scatter:
            for a, b in zip(X, Y):
                out.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="1.5" fill="{color}"/>')
        else:
            pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(X, Y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        if s.label:
            ly = MARGIN + 12 + 12 * i
            out.append(f'<text x="{MARGIN + iw - 4}" y="{ly}" text-anchor="end" font-size="9" fill="{color}">{escape(s.label)}</text>')
    out.append("</g>")
    return out


def render(panels: Sequence[Panel], columns: int = 2) -> str:
    """Lay panels out on a grid and return the SVG document."""
    columns = max(1, min(columns, len(panels) or 1))
    rows = (len(panels) + columns - 1) // columns
    W, H = columns * PANEL_W, max(rows, 1) * PANEL_H
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
    ]
    for k, panel in enumerate(panels):
        out += _panel_svg(panel, (k % columns) * PANEL_W, (k // columns) * PANEL_H)
    out.append("</svg>")
    return "\n".join(out) + "\n"
