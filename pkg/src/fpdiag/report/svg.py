"""Minimal SVG writer with byte-stable output.

Coordinates are always written with two decimals, no timestamps or ids are
generated, so equal input gives equal bytes.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from xml.sax.saxutils import escape, quoteattr


def fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def lighten(color: str, amount: float = 0.6) -> str:
    """Blend a ``#rrggbb`` colour towards white."""
    r, g, b = (int(color[i : i + 2], 16) for i in (1, 3, 5))
    mix = lambda c: round(c + (255 - c) * amount)  # noqa: E731
    return f"#{mix(r):02x}{mix(g):02x}{mix(b):02x}"


class LinearScale:
    def __init__(self, domain: tuple[float, float], range_: tuple[float, float]):
        lo, hi = domain
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.domain = (lo, hi)
        self.range = range_

    def __call__(self, v: float) -> float:
        (d0, d1), (r0, r1) = self.domain, self.range
        return r0 + (v - d0) * (r1 - r0) / (d1 - d0)


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def padded(lo: float, hi: float, frac: float = 0.05) -> tuple[float, float]:
    if hi == lo:
        pad = abs(lo) * frac or 1.0
    else:
        pad = (hi - lo) * frac
    return lo - pad, hi + pad


def _attrs(attrs: dict) -> str:
    parts = []
    for k, v in attrs.items():
        if v is None:
            continue
        if isinstance(v, float):
            v = fmt(v)
        parts.append(f"{k.rstrip('_').replace('_', '-')}={quoteattr(str(v))}")
    return (" " + " ".join(parts)) if parts else ""


class Svg:
    def __init__(self, width: float, height: float, title: str = ""):
        self.width = width
        self.height = height
        self._parts: list[str] = []
        self._depth = 1
        if title:
            self._emit(f"<title>{escape(title)}</title>")
        self.rect(0, 0, width, height, fill="#ffffff")

    def _emit(self, s: str):
        self._parts.append("  " * self._depth + s)

    def rect(self, x, y, w, h, fill="none", **attrs):
        if h < 0:
            y, h = y + h, -h
        if w < 0:
            x, w = x + w, -w
        self._emit(
            f'<rect x="{fmt(x)}" y="{fmt(y)}" width="{fmt(w)}" height="{fmt(h)}"'
            f"{_attrs({'fill': fill, **attrs})}/>"
        )

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, **attrs):
        self._emit(
            f'<line x1="{fmt(x1)}" y1="{fmt(y1)}" x2="{fmt(x2)}" y2="{fmt(y2)}"'
            f"{_attrs({'stroke': stroke, 'stroke_width': float(width), **attrs})}/>"
        )

    def circle(self, cx, cy, r, fill="#000000", **attrs):
        self._emit(
            f'<circle cx="{fmt(cx)}" cy="{fmt(cy)}" r="{fmt(r)}"{_attrs({"fill": fill, **attrs})}/>'
        )

    def polyline(self, points, stroke="#000000", width=1.5, **attrs):
        if not points:
            return
        pts = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
        self._emit(
            f'<polyline points="{pts}"'
            f"{_attrs({'fill': 'none', 'stroke': stroke, 'stroke_width': float(width), **attrs})}/>"
        )

    def text(self, x, y, s, size=10, anchor="start", fill="#222222", rotate=None, **attrs):
        transform = None if rotate is None else f"rotate({fmt(rotate)} {fmt(x)} {fmt(y)})"
        self._emit(
            f'<text x="{fmt(x)}" y="{fmt(y)}"'
            f"{_attrs({'font_size': size, 'text_anchor': anchor, 'fill': fill, 'transform': transform, **attrs})}"
            f">{escape(str(s))}</text>"
        )

    @contextmanager
    def group(self, **attrs):
        self._emit(f"<g{_attrs(attrs)}>")
        self._depth += 1
        try:
            yield self
        finally:
            self._depth -= 1
            self._emit("</g>")

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{fmt(self.width)}" '
            f'height="{fmt(self.height)}" viewBox="0 0 {fmt(self.width)} {fmt(self.height)}" '
            f'font-family="Helvetica, Arial, sans-serif">'
        )
        return "\n".join([head, *self._parts, "</svg>"]) + "\n"


def stack_labels(labels, min_gap: float = 11.0):
    """Push overlapping labels down so consecutive ones are ``min_gap`` apart.

    ``labels`` is a list of ``(x, y, text)``; returns the same with adjusted y,
    in input order.  Labels are considered overlapping when their x anchors
    are within 80 px of each other.
    """
    order = sorted(range(len(labels)), key=lambda k: (labels[k][1], labels[k][0], labels[k][2]))
    placed: list[tuple[float, float]] = []
    out = list(labels)
    for k in order:
        x, y, text = labels[k]
        moved = True
        while moved:
            moved = False
            for px, py in placed:
                if abs(px - x) < 80 and abs(py - y) < min_gap:
                    y = py + min_gap
                    moved = True
        placed.append((x, y))
        out[k] = (x, y, text)
    return out
