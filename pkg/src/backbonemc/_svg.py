"""Minimal hand-rolled SVG plotting.

Kept dependency-free and fully deterministic (fixed canvas, fixed float
formatting) so that re-running a report reproduces byte-identical files.
"""

from __future__ import annotations

import math

import numpy as np

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]
_GREY = "#444444"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


class Svg:
    def __init__(self, width: int = 640, height: int = 480):
        self.width = width
        self.height = height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        ]

    def line(self, x1, y1, x2, y2, color=_GREY, width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{width}"/>'
        )

    def polyline(self, xs, ys, color, width=1.0, opacity=1.0, dash: str | None = None):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}" stroke-opacity="{opacity}"{dash_attr}/>'
        )

    def circle(self, cx, cy, r, color, opacity=1.0):
        self.parts.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{r}" fill="{color}" '
            f'fill-opacity="{opacity}"/>'
        )

    def rect(self, x, y, w, h, fill, stroke="none"):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{fill}" stroke="{stroke}"/>'
        )

    def text(self, x, y, s, size=11, anchor="middle", color="#000000"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" '
            f'font-size="{size}" text-anchor="{anchor}" fill="{color}">{s}</text>'
        )

    def to_string(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class Panel:
    """One set of axes inside an Svg with data-to-canvas mapping."""

    def __init__(self, svg: Svg, x: float, y: float, w: float, h: float,
                 xlim, ylim, title="", xlabel="", ylabel="", ticks=True):
        self.svg = svg
        self.x0, self.y0, self.w, self.h = x, y, w, h
        lo_x, hi_x = xlim
        lo_y, hi_y = ylim
        if hi_x <= lo_x:
            hi_x = lo_x + 1.0
        if hi_y <= lo_y:
            hi_y = lo_y + 1.0
        pad_x = 0.03 * (hi_x - lo_x)
        pad_y = 0.05 * (hi_y - lo_y)
        self.xlim = (lo_x - pad_x, hi_x + pad_x)
        self.ylim = (lo_y - pad_y, hi_y + pad_y)
        svg.rect(x, y, w, h, fill="none", stroke=_GREY)
        if title:
            svg.text(x + w / 2, y - 6, title, size=12)
        if xlabel:
            svg.text(x + w / 2, y + h + 30, xlabel, size=11)
        if ylabel:
            sx, sy = x - 44, y + h / 2
            self.svg.parts.append(
                f'<text x="{_fmt(sx)}" y="{_fmt(sy)}" font-family="sans-serif" '
                f'font-size="11" text-anchor="middle" '
                f'transform="rotate(-90 {_fmt(sx)} {_fmt(sy)})">{ylabel}</text>'
            )
        if ticks:
            for t in _nice_ticks(*self.xlim):
                cx = self.map_x(t)
                svg.line(cx, y + h, cx, y + h + 4)
                svg.text(cx, y + h + 16, f"{t:.5g}", size=9)
            for t in _nice_ticks(*self.ylim):
                cy = self.map_y(t)
                svg.line(x - 4, cy, x, cy)
                svg.text(x - 6, cy + 3, f"{t:.5g}", size=9, anchor="end")

    def map_x(self, v: float) -> float:
        lo, hi = self.xlim
        return self.x0 + (v - lo) / (hi - lo) * self.w

    def map_y(self, v: float) -> float:
        lo, hi = self.ylim
        return self.y0 + self.h - (v - lo) / (hi - lo) * self.h

    def polyline(self, xs, ys, color, **kw):
        self.svg.polyline([self.map_x(v) for v in xs], [self.map_y(v) for v in ys],
                          color, **kw)

    def scatter(self, xs, ys, color, r=1.5, opacity=0.5):
        for x, y in zip(xs, ys):
            self.svg.circle(self.map_x(x), self.map_y(y), r, color, opacity)

    def vline(self, v, color, dash="4,3"):
        self.svg.polyline(
            [self.map_x(v), self.map_x(v)],
            [self.y0, self.y0 + self.h], color, width=1.0, opacity=0.9, dash=dash,
        )

    def bars(self, edges, counts, color):
        top = max(counts) if len(counts) and max(counts) > 0 else 1
        for i, c in enumerate(counts):
            x_left = self.map_x(edges[i])
            x_right = self.map_x(edges[i + 1])
            frac = c / top
            y_top = self.y0 + self.h * (1.0 - 0.92 * frac)
            self.svg.rect(x_left, y_top, max(x_right - x_left - 0.5, 0.5),
                          self.y0 + self.h - y_top, fill=color)


def _downsample(arr: np.ndarray, max_points: int) -> np.ndarray:
    if arr.shape[0] <= max_points:
        return arr
    stride = int(math.ceil(arr.shape[0] / max_points))
    return arr[::stride]


def trace_svg(values: np.ndarray, name: str, burn_in: int, path) -> None:
    from ._io import atomic_write_text

    svg = Svg(720, 300)
    idx = np.arange(values.size)
    keep = _downsample(np.column_stack([idx, values]), 4000)
    panel = Panel(svg, 70, 30, 600, 220,
                  (0, float(values.size)), (float(values.min()), float(values.max())),
                  title=f"trace: {name}", xlabel="iteration", ylabel=name)
    panel.polyline(keep[:, 0], keep[:, 1], PALETTE[0], width=0.8)
    if burn_in > 0:
        panel.vline(float(burn_in), "#d62728")
    atomic_write_text(path, svg.to_string())


def scatter_matrix_svg(samples: np.ndarray, names, path) -> None:
    from ._io import atomic_write_text

    d = samples.shape[1]
    cell = 170
    pad = 60
    size = pad + d * cell + 20
    svg = Svg(size, size)
    pts = _downsample(samples, 1500)
    for i in range(d):
        for j in range(d):
            x0 = pad + j * cell
            y0 = 30 + i * cell
            xi = samples[:, j]
            yi = samples[:, i]
            if i == j:
                counts, edges = np.histogram(xi, bins=30)
                panel = Panel(svg, x0, y0, cell - 24, cell - 34,
                              (float(edges[0]), float(edges[-1])), (0.0, 1.0),
                              title=names[i], ticks=False)
                panel.bars(edges, counts, PALETTE[i % len(PALETTE)])
            else:
                panel = Panel(svg, x0, y0, cell - 24, cell - 34,
                              (float(xi.min()), float(xi.max())),
                              (float(yi.min()), float(yi.max())),
                              title=f"{names[j]} vs {names[i]}", ticks=False)
                panel.scatter(pts[:, j], pts[:, i], PALETTE[1], r=1.2, opacity=0.35)
    atomic_write_text(path, svg.to_string())


def backbone_bands_svg(measured_curves, predicted_curves, path) -> None:
    from ._io import atomic_write_text

    svg = Svg(720, 480)
    all_f = np.concatenate([c.frequency_hz for c in measured_curves + predicted_curves])
    all_a = np.concatenate([c.amplitude for c in measured_curves + predicted_curves])
    panel = Panel(svg, 80, 40, 580, 360,
                  (float(all_f.min()), float(all_f.max())),
                  (float(all_a.min()), float(all_a.max())),
                  title="backbone curves: measured vs posterior predictive",
                  xlabel="frequency [Hz]", ylabel="amplitude [m]")
    for c in predicted_curves:
        panel.polyline(c.frequency_hz, c.amplitude, PALETTE[1], width=0.7, opacity=0.25)
    for c in measured_curves:
        panel.polyline(c.frequency_hz, c.amplitude, PALETTE[0], width=1.2, opacity=0.9)
    svg.text(600, 30, "measured", size=11, anchor="end", color=PALETTE[0])
    svg.text(680, 30, "predicted", size=11, anchor="end", color=PALETTE[1])
    atomic_write_text(path, svg.to_string())


def pdf_overlays_svg(comparisons, path) -> None:
    from ._io import atomic_write_text

    n = len(comparisons)
    svg = Svg(720, 70 + 230 * n)
    for i, comp in enumerate(comparisons):
        xm, ym = comp.measured.pdf_grid(200)
        xp, yp = comp.predicted.pdf_grid(200)
        lo = min(xm.min(), xp.min())
        hi = max(xm.max(), xp.max())
        top = max(ym.max(), yp.max())
        panel = Panel(svg, 80, 50 + i * 230, 580, 160,
                      (float(lo), float(hi)), (0.0, float(top)),
                      title=f"amplitude level {comp.level:.5g} m",
                      xlabel="frequency [Hz]" if i == n - 1 else "",
                      ylabel="density")
        panel.polyline(xm, ym, PALETTE[0], width=1.4)
        panel.polyline(xp, yp, PALETTE[1], width=1.4, dash="6,4")
    svg.text(600, 26, "measured", size=11, anchor="end", color=PALETTE[0])
    svg.text(680, 26, "predicted", size=11, anchor="end", color=PALETTE[1])
    atomic_write_text(path, svg.to_string())
