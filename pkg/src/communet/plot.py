"""Dependency-free SVG line plot of BER against SNR on a log axis."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT, MARGIN = 640, 440, 60


def ber_svg(series: dict[str, list[tuple[float, float]]], title: str = "BER vs Eb/N0") -> str:
    """One polyline per series of ``(snr_db, ber)`` points.

    Zero BER values cannot be drawn on a log axis and are skipped.
    """
    pts = [(s, b) for data in series.values() for s, b in data if b > 0]
    if pts:
        x_lo, x_hi = min(p[0] for p in pts), max(p[0] for p in pts)
        y_lo = math.floor(math.log10(min(p[1] for p in pts)))
        y_hi = max(math.ceil(math.log10(max(p[1] for p in pts))), y_lo + 1)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, -6, 0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(b):
        return MARGIN + (y_hi - math.log10(b)) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">Eb/N0 (dB)</text>',
        f'<text x="15" y="{HEIGHT / 2}" transform="rotate(-90 15 {HEIGHT / 2})" '
        'text-anchor="middle">BER</text>',
    ]
    for e in range(y_lo, y_hi + 1):
        y = sy(10.0**e)
        out.append(f'<line x1="{MARGIN}" y1="{y:.2f}" x2="{MARGIN + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    for x in sorted({p[0] for p in pts}):
        out.append(f'<text x="{sx(x):.2f}" y="{MARGIN + ph + 16}" text-anchor="middle">{x:g}</text>')
    for i, (name, data) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{sx(s):.2f},{sy(b):.2f}" for s, b in sorted(data) if b > 0)
        out.append(
            f'<polyline data-series="{escape(name)}" fill="none" stroke="{color}" '
            f'stroke-width="2" points="{coords}"/>'
        )
        ly = MARGIN + 16 + 16 * i
        out.append(
            f'<text x="{MARGIN + pw - 8}" y="{ly}" text-anchor="end" fill="{color}">{escape(name)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
