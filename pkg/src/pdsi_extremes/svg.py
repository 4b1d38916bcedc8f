"""Minimal deterministic SVG line plots (no rendering backend needed)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 420
MARGIN = (60, 20, 30, 50)  # left, right, top, bottom

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#d62728", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def line_plot(series, title: str = "", xlabel: str = "", ylabel: str = "", logx: bool = False) -> str:
    """Render ``series``: a list of ``(label, xs, ys, style)`` with style in
    {"line", "dashed", "step"}. ``None`` y-values break the line."""
    pts = [(x, y) for _, xs, ys, _ in series for x, y in zip(xs, ys) if y is not None]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    tx = (lambda v: math.log10(v)) if logx else float
    xs_all = [tx(p[0]) for p in pts]
    ys_all = [float(p[1]) for p in pts]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all + [0.0]), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def px(x):
        return left + (tx(x) - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in _nice_ticks(y0, y1):
        out.append(f'<text x="{left - 5}" y="{_fmt(py(t) + 4)}" text-anchor="end" font-size="10">{t:g}</text>')
    if logx:
        xticks = [10**e for e in range(math.floor(x0), math.ceil(x1) + 1) if x0 <= e <= x1] or [10**x0]
    else:
        xticks = _nice_ticks(x0, x1)
    for t in xticks:
        out.append(f'<text x="{_fmt(px(t))}" y="{top + ph + 15}" text-anchor="middle" font-size="10">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(
        f'<text x="14" y="{top + ph / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {top + ph / 2})">{escape(ylabel)}</text>'
    )
    for i, (label, xs, ys, style) in enumerate(series):
        colour = PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="5,3"' if style == "dashed" else ""
        segs, cur = [], []
        for x, y in zip(xs, ys):
            if y is None:
                if cur:
                    segs.append(cur)
                cur = []
            else:
                cur.append((px(x), py(y)))
        if cur:
            segs.append(cur)
        for seg in segs:
            if style == "step":
                path = []
                for j, (a, b) in enumerate(seg):
                    path.append(f"{_fmt(a)},{_fmt(b)}" if j == 0 else f"{_fmt(a)},{_fmt(seg[j - 1][1])} {_fmt(a)},{_fmt(b)}")
                d = " ".join(path)
            else:
                d = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in seg)
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2"{dash} points="{d}"/>')
        ly = top + 14 * (i + 1)
        out.append(f'<line x1="{left + pw - 150}" y1="{ly - 4}" x2="{left + pw - 130}" y2="{ly - 4}" stroke="{colour}"{dash}/>')
        out.append(f'<text x="{left + pw - 125}" y="{ly}" font-size="10">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
