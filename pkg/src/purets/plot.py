"""Minimal SVG line charts (forecast overlays, convergence curves)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from ._io import write_text

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_plot_svg(series, labels, title: str = "", width: int = 720, height: int = 360,
                  log_y: bool = False) -> str:
    """Render equal-length series as one polyline each; returns SVG text."""
    series = [np.asarray(s, dtype=float).ravel() for s in series]
    if not series or any(s.size == 0 for s in series):
        raise ValueError("line plot needs at least one non-empty series")
    if len({s.size for s in series}) != 1:
        raise ValueError("all series must have the same length")
    if len(labels) != len(series):
        raise ValueError("need one label per series")
    if log_y:
        series = [np.log10(np.maximum(s, 1e-300)) for s in series]

    left, right, top, bottom = 60, 150, 30, 40
    pw, ph = width - left - right, height - top - bottom
    n = series[0].size
    lo = min(float(s.min()) for s in series)
    hi = max(float(s.max()) for s in series)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0

    def sx(i):
        return left + (pw * i / (n - 1) if n > 1 else pw / 2)

    def sy(v):
        return top + ph * (hi - v) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{left}" y="18" font-family="sans-serif" font-size="13">{escape(title)}</text>')
    # axes
    out.append(
        f'<path d="M{left},{top} L{left},{top + ph} L{left + pw},{top + ph}" '
        f'stroke="black" fill="none" stroke-width="1"/>'
    )
    for frac in (0.0, 0.5, 1.0):
        v = lo + frac * (hi - lo)
        label = f"1e{v:.1f}" if log_y else f"{v:.3g}"
        y = sy(v)
        out.append(f'<line x1="{left - 4}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(
            f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end" font-family="sans-serif" '
            f'font-size="10">{label}</text>'
        )
    for i in (0, n - 1):
        out.append(
            f'<text x="{_fmt(sx(i))}" y="{top + ph + 15}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="10">{i}</text>'
        )
    for k, (s, label) in enumerate(zip(series, labels)):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(i))},{_fmt(sy(v))}" for i, v in enumerate(s))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = top + 12 + 16 * k
        out.append(
            f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{left + pw + 35}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="11">{escape(str(label))}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_line_plot(series, labels, path, **kwargs) -> None:
    write_text(path, line_plot_svg(series, labels, **kwargs))
