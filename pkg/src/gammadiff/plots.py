"""Minimal static SVG charts (lines, scatter, vertical markers) with no plotting dependency."""

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .tables import atomic_write_text

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=30, bottom=50)
PALETTE = ("#5b2a86", "#d1495b", "#00798c", "#edae49", "#30638e", "#888888")


@dataclass
class Layer:
    x: np.ndarray
    y: np.ndarray
    kind: str = "line"  # "line" or "scatter"
    label: str = ""
    color: str = None
    size: float = 2.0


@dataclass
class Chart:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    logy: bool = False
    layers: list = field(default_factory=list)
    vlines: list = field(default_factory=list)  # (x, label)

    def add(self, x, y, kind="line", label="", color=None, size=2.0):
        self.layers.append(Layer(np.asarray(x, float), np.asarray(y, float), kind, label, color, size))
        return self


def _transform(v, log):
    v = np.asarray(v, float)
    if log:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v > 0, np.log10(np.where(v > 0, v, 1.0)), np.nan)
    return v


def _range(values):
    vals = np.concatenate([v[np.isfinite(v)] for v in values]) if values else np.array([])
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    pad = 0.03 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo, hi, log, count=5):
    if log:
        ticks = np.arange(math.ceil(lo), math.floor(hi) + 1)
        labels = [f"1e{int(t)}" for t in ticks]
        return ticks, labels
    ticks = np.linspace(lo, hi, count)
    return ticks, [f"{t:.3g}" for t in ticks]


def render(chart):
    """Return the chart as an SVG document string."""
    xs = [_transform(l.x, chart.logx) for l in chart.layers]
    ys = [_transform(l.y, chart.logy) for l in chart.layers]
    vx = [_transform([v], chart.logx)[0] for v, _ in chart.vlines]
    xlo, xhi = _range(xs + [np.array(vx)])
    ylo, yhi = _range(ys)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return MARGIN["top"] + (1.0 - (y - ylo) / (yhi - ylo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    for t, lab in zip(*_ticks(xlo, xhi, chart.logx)):
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN["top"] + ph}" x2="{x:.2f}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN["top"] + ph + 18}" '
                   f'text-anchor="middle">{escape(lab)}</text>')
    for t, lab in zip(*_ticks(ylo, yhi, chart.logy)):
        y = py(t)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{y:.2f}" x2="{MARGIN["left"]}" '
                   f'y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{y + 4:.2f}" '
                   f'text-anchor="end">{escape(lab)}</text>')

    for i, (layer, x, y) in enumerate(zip(chart.layers, xs, ys)):
        color = layer.color or PALETTE[i % len(PALETTE)]
        ok = np.isfinite(x) & np.isfinite(y)
        if layer.kind == "scatter":
            for a, b in zip(x[ok], y[ok]):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="{layer.size}" '
                           f'fill="{color}" fill-opacity="0.5"/>')
        else:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                       f'stroke-width="{layer.size}"/>')
        if layer.label:
            ly = MARGIN["top"] + 16 * (i + 1)
            out.append(f'<text x="{WIDTH - MARGIN["right"] - 8}" y="{ly}" fill="{color}" '
                       f'text-anchor="end">{escape(layer.label)}</text>')
    for (_, label), x in zip(chart.vlines, vx):
        if np.isfinite(x):
            out.append(f'<line x1="{px(x):.2f}" y1="{MARGIN["top"]}" x2="{px(x):.2f}" '
                       f'y2="{MARGIN["top"] + ph}" stroke="#d1495b" stroke-dasharray="4 3"/>')
            out.append(f'<text x="{px(x) + 4:.2f}" y="{MARGIN["top"] + 14}" '
                       f'fill="#d1495b">{escape(label)}</text>')

    out.append(f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" '
               f'font-size="14">{escape(chart.title)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 10}" '
               f'text-anchor="middle">{escape(chart.xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2})">{escape(chart.ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save(chart, path):
    atomic_write_text(path, render(chart))
