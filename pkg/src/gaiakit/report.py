"""Deterministic CSV-to-SVG scatter and line plots.

Output is a pure function of the inputs: fixed canvas, fixed decimal
formatting, no timestamps or generated ids, so identical data produces
byte-identical files.
"""

from __future__ import annotations

import csv
from html import escape
from typing import Iterable, Sequence

from .errors import BadCSV

WIDTH, HEIGHT = 640, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50
N_TICKS = 5


def read_csv_columns(lines: Iterable[str], x: str, y: str) -> list[tuple[float, float]]:
    """(x, y) float pairs from two named columns of a headered CSV."""
    rows = list(csv.reader(lines))
    rows = [r for r in rows if r]
    if not rows:
        raise BadCSV("empty CSV")
    header = rows[0]
    try:
        xi, yi = header.index(x), header.index(y)
    except ValueError:
        raise BadCSV(f"columns {x!r}, {y!r} not both in header {header}") from None
    points = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) <= max(xi, yi):
            raise BadCSV(f"line {lineno}: too few fields")
        try:
            points.append((float(row[xi]), float(row[yi])))
        except ValueError:
            raise BadCSV(f"line {lineno}: non-numeric value") from None
    if not points:
        raise BadCSV("no data rows")
    return points


def _axis(lo: float, hi: float) -> tuple[float, float]:
    if lo == hi:
        return lo - 1.0, hi + 1.0
    return lo, hi


def render_plot(points: Sequence[tuple[float, float]], kind: str = "scatter",
                title: str = "", xlabel: str = "x", ylabel: str = "y") -> str:
    """An SVG document; kind is "scatter" (circles) or "line" (one polyline)."""
    if kind not in ("scatter", "line"):
        raise ValueError(f"unknown plot kind {kind!r}")
    if not points:
        raise BadCSV("nothing to plot")
    x_lo, x_hi = _axis(min(p[0] for p in points), max(p[0] for p in points))
    y_lo, y_hi = _axis(min(p[1] for p in points), max(p[1] for p in points))
    px = lambda v: MARGIN_L + (v - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R)
    py = lambda v: HEIGHT - MARGIN_B - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{escape(title)}</text>')
    x0, y0 = MARGIN_L, HEIGHT - MARGIN_B
    parts.append(f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{WIDTH - MARGIN_R}" y2="{y0}" stroke="black"/>')
    for i in range(N_TICKS):
        fx = x_lo + i * (x_hi - x_lo) / (N_TICKS - 1)
        fy = y_lo + i * (y_hi - y_lo) / (N_TICKS - 1)
        tx, ty = px(fx), py(fy)
        parts.append(f'<line x1="{tx:.2f}" y1="{y0}" x2="{tx:.2f}" y2="{y0 + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{tx:.2f}" y="{y0 + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{fx:g}</text>')
        parts.append(f'<line x1="{x0 - 5}" y1="{ty:.2f}" x2="{x0}" y2="{ty:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{ty + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{fy:g}</text>')
    parts.append(
        f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:.1f}" y="{HEIGHT - 12}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="13">{escape(xlabel)}</text>')
    parts.append(
        f'<text x="18" y="{(MARGIN_T + HEIGHT - MARGIN_B) / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {(MARGIN_T + HEIGHT - MARGIN_B) / 2:.1f})">'
        f'{escape(ylabel)}</text>')
    if kind == "scatter":
        for x, y in points:
            parts.append(
                f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" '
                f'fill="steelblue" fill-opacity="0.7"/>')
    else:
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in points)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def points_to_csv_lines(points: Sequence[tuple[float, float]],
                        x: str = "x", y: str = "y") -> list[str]:
    return [f"{x},{y}"] + [f"{a!r},{b!r}" for a, b in points]
