"""Static SVG emission for run artifacts.

Plots are assembled as plain strings: same data in, same bytes out, which the
determinism guarantees of the CLI rely on. No timestamps, no randomness, no
external assets. Data coordinates are written at full precision so a plotted
series can be parsed back out of the file and checked.
"""

from __future__ import annotations

import numpy as np

WIDTH = 640
HEIGHT = 400
MARGIN_LEFT = 64
MARGIN_RIGHT = 16
MARGIN_TOP = 32
MARGIN_BOTTOM = 44

PALETTE = ("#1f6fb2", "#c23b22", "#2e8b57", "#8a2be2", "#b8860b")

SVG_OPEN = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">')


def _axis_bounds(values):
    finite = [v for v in values if np.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        pad = 0.5 if lo == 0.0 else abs(lo) * 0.05
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _x_map(lo, hi):
    span = hi - lo
    inner = WIDTH - MARGIN_LEFT - MARGIN_RIGHT

    def fn(v):
        return MARGIN_LEFT + (v - lo) / span * inner
    return fn


def _y_map(lo, hi):
    span = hi - lo
    inner = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def fn(v):
        return HEIGHT - MARGIN_BOTTOM - (v - lo) / span * inner
    return fn


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def _frame(title, xlabel, ylabel, x_bounds, y_bounds):
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
    parts = [
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#333333"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#333333"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{_esc(title)}</text>',
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="14" y="{(y0 + y1) // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {(y0 + y1) // 2})">{_esc(ylabel)}</text>',
    ]
    for (lo, hi), axis in ((x_bounds, "x"), (y_bounds, "y")):
        for frac, val in ((0.0, lo), (0.5, (lo + hi) / 2.0), (1.0, hi)):
            label = f"{val:.4g}"
            if axis == "x":
                px = MARGIN_LEFT + frac * (x1 - x0)
                parts.append(f'<text x="{px:.1f}" y="{y0 + 16}" '
                             f'text-anchor="middle" font-family="sans-serif" '
                             f'font-size="10">{label}</text>')
            else:
                py = y0 - frac * (y0 - y1)
                parts.append(f'<text x="{x0 - 6}" y="{py + 3:.1f}" '
                             f'text-anchor="end" font-family="sans-serif" '
                             f'font-size="10">{label}</text>')
    return parts


def render_line_plot(series, *, title, xlabel, ylabel) -> str:
    """series: iterable of (label, xs, ys); NaNs break the polyline."""
    all_x, all_y = [], []
    for _, xs, ys in series:
        all_x.extend(float(v) for v in xs)
        all_y.extend(float(v) for v in ys if np.isfinite(v))
    xb = _axis_bounds(all_x)
    yb = _axis_bounds(all_y)
    fx, fy = _x_map(*xb), _y_map(*yb)
    parts = [SVG_OPEN]
    parts.extend(_frame(title, xlabel, ylabel, xb, yb))
    for idx, (label, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        segment = []
        segments = []
        for x, y in zip(xs, ys):
            if not np.isfinite(y):
                if segment:
                    segments.append(segment)
                segment = []
                continue
            segment.append(f"{fx(float(x))!r},{fy(float(y))!r}")
        if segment:
            segments.append(segment)
        for seg in segments:
            if len(seg) == 1:
                px, py = seg[0].split(",")
                parts.append(f'<circle cx="{px}" cy="{py}" r="2.5" '
                             f'fill="{color}"/>')
            else:
                parts.append(f'<polyline fill="none" stroke="{color}" '
                             f'stroke-width="1.5" points="{" ".join(seg)}"/>')
        ly = MARGIN_TOP + 14 * idx + 4
        parts.append(f'<rect x="{WIDTH - 170}" y="{ly - 8}" width="10" '
                     f'height="10" fill="{color}"/>')
        parts.append(f'<text x="{WIDTH - 155}" y="{ly + 1}" '
                     f'font-family="sans-serif" font-size="11">'
                     f'{_esc(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_scatter_path(xs, ys, *, title, xlabel, ylabel) -> str:
    """A 2-D path with per-point markers (start square, end diamond)."""
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    xb = _axis_bounds(xs)
    yb = _axis_bounds(ys)
    fx, fy = _x_map(*xb), _y_map(*yb)
    parts = [SVG_OPEN]
    parts.extend(_frame(title, xlabel, ylabel, xb, yb))
    if xs:
        pts = " ".join(f"{fx(x)!r},{fy(y)!r}" for x, y in zip(xs, ys))
        if len(xs) > 1:
            parts.append(f'<polyline fill="none" stroke="{PALETTE[0]}" '
                         f'stroke-width="1.2" points="{pts}"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{fx(x)!r}" cy="{fy(y)!r}" r="2.5" '
                         f'fill="{PALETTE[0]}"/>')
        parts.append(f'<rect x="{fx(xs[0]) - 4!r}" y="{fy(ys[0]) - 4!r}" '
                     f'width="8" height="8" fill="none" '
                     f'stroke="{PALETTE[1]}" stroke-width="1.5"/>')
        parts.append(f'<circle cx="{fx(xs[-1])!r}" cy="{fy(ys[-1])!r}" r="5" '
                     f'fill="none" stroke="{PALETTE[2]}" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
