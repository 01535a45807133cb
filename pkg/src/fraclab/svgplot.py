"""Minimal SVG line/scatter charts with optional log axes."""

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = (70, 20, 30, 50)  # left, right, top, bottom
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _transform(vals, log):
    if log:
        return [math.log10(v) if v > 0 else None for v in vals]
    return [float(v) for v in vals]


def _ticks(lo, hi, log, n=5):
    if hi == lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    out = []
    for k in range(n):
        v = lo + k * step
        out.append((v, f"{10 ** v:.3g}" if log else f"{v:.3g}"))
    return out


def render(series, title="", xlabel="", ylabel="", xlog=False, ylog=False):
    """SVG text for ``series = [(label, xs, ys), ...]``.

    Points that are nonpositive on a log axis are dropped.
    """
    pts = []
    for label, xs, ys in series:
        tx, ty = _transform(xs, xlog), _transform(ys, ylog)
        pts.append((label, [(a, b) for a, b in zip(tx, ty) if a is not None and b is not None]))
    allx = [a for _, p in pts for a, _ in p] or [0.0, 1.0]
    ally = [b for _, p in pts for _, b in p] or [0.0, 1.0]
    x0, x1, y0, y1 = min(allx), max(allx), min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom
    sx = lambda v: left + (v - x0) / (x1 - x0) * pw
    sy = lambda v: top + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v, lab in _ticks(x0, x1, xlog):
        out.append(f'<text x="{sx(v):.2f}" y="{top + ph + 15}" text-anchor="middle">'
                   f'{escape(lab)}</text>')
    for v, lab in _ticks(y0, y1, ylog):
        out.append(f'<text x="{left - 5}" y="{sy(v) + 4:.2f}" text-anchor="end">'
                   f'{escape(lab)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 8}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2})">{escape(ylabel)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="18" text-anchor="middle">{escape(title)}</text>')
    for k, (label, p) in enumerate(pts):
        col = COLORS[k % len(COLORS)]
        if len(p) > 1:
            path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in sorted(p))
            out.append(f'<polyline points="{path}" fill="none" stroke="{col}"/>')
        for a, b in p:
            out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.5" fill="{col}"/>')
        out.append(f'<text x="{left + pw - 5}" y="{top + 14 + 14 * k}" text-anchor="end" '
                   f'fill="{col}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, series, **kw):
    with open(path, "w") as fh:
        fh.write(render(series, **kw))
