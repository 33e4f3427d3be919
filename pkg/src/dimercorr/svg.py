"""Minimal deterministic SVG rendering: heatmaps, polylines, polar and line plots.

Coordinates are written with fixed precision so identical data gives
byte-identical files.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

# viridis anchor colours, linearly interpolated
_ANCHORS = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
], dtype=float)

PALETTE = ("#1f4e9c", "#c0392b", "#2e8b57", "#e08e0b", "#6c3483", "#555555")
MAX_CELLS = 180


def colormap(u):
    """RGB triples for values in [0, 1]."""
    u = np.clip(np.asarray(u, float), 0.0, 1.0) * (len(_ANCHORS) - 1)
    i = np.minimum(u.astype(int), len(_ANCHORS) - 2)
    f = (u - i)[..., None]
    return np.rint(_ANCHORS[i] * (1 - f) + _ANCHORS[i + 1] * f).astype(int)


def _hex(rgb) -> str:
    return "#%02x%02x%02x" % tuple(int(v) for v in rgb)


def _f(x: float) -> str:
    return f"{x:.2f}"


class Canvas:
    def __init__(self, width: int = 480, height: int = 440):
        self.w, self.h = width, height
        self.items: list[str] = []

    def add(self, s: str) -> None:
        self.items.append(s)

    def text(self, x, y, s, size=12, anchor="middle", rotate=None):
        tr = f' transform="rotate({rotate} {_f(x)} {_f(y)})"' if rotate is not None else ""
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" text-anchor="{anchor}" '
                 f'font-family="sans-serif"{tr}>{escape(s)}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">')
        return "\n".join([head, f'<rect width="{self.w}" height="{self.h}" fill="white"/>',
                          *self.items, "</svg>"]) + "\n"


class Frame:
    """Axis box mapping data coordinates to pixels."""

    def __init__(self, canvas, box, xlim, ylim):
        self.c = canvas
        self.x0, self.y0, self.x1, self.y1 = box
        self.xlim, self.ylim = xlim, ylim

    def px(self, x, y):
        (a, b), (c, d) = self.xlim, self.ylim
        u = self.x0 + (np.asarray(x) - a) / (b - a) * (self.x1 - self.x0)
        v = self.y1 - (np.asarray(y) - c) / (d - c) * (self.y1 - self.y0)
        return u, v

    def axes(self, xlabel="", ylabel="", title="", nticks=5, fmt="{:.0f}", xscale=1.0,
             yscale=1.0):
        c = self.c
        c.add(f'<rect x="{_f(self.x0)}" y="{_f(self.y0)}" width="{_f(self.x1 - self.x0)}" '
              f'height="{_f(self.y1 - self.y0)}" fill="none" stroke="black"/>')
        for k in range(nticks):
            fx = self.xlim[0] + (self.xlim[1] - self.xlim[0]) * k / (nticks - 1)
            fy = self.ylim[0] + (self.ylim[1] - self.ylim[0]) * k / (nticks - 1)
            u, _ = self.px(fx, self.ylim[0])
            _, v = self.px(self.xlim[0], fy)
            c.add(f'<line x1="{_f(u)}" y1="{_f(self.y1)}" x2="{_f(u)}" y2="{_f(self.y1 + 4)}" stroke="black"/>')
            c.add(f'<line x1="{_f(self.x0 - 4)}" y1="{_f(v)}" x2="{_f(self.x0)}" y2="{_f(v)}" stroke="black"/>')
            c.text(u, self.y1 + 16, fmt.format(fx * xscale), 10)
            c.text(self.x0 - 6, v + 3, fmt.format(fy * yscale), 10, anchor="end")
        c.text(0.5 * (self.x0 + self.x1), self.y1 + 32, xlabel)
        c.text(self.x0 - 38, 0.5 * (self.y0 + self.y1), ylabel, rotate=-90)
        if title:
            c.text(0.5 * (self.x0 + self.x1), self.y0 - 10, title, 13)

    def polyline(self, xs, ys, color="black", width=1.5, dash=None):
        u, v = self.px(xs, ys)
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(u, v) if np.isfinite(a) and np.isfinite(b))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.c.add(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{d}/>')

    def points(self, xs, ys, color="red", r=3.5, hollow=False):
        u, v = self.px(xs, ys)
        fill = "white" if hollow else color
        for a, b in zip(np.atleast_1d(u), np.atleast_1d(v)):
            self.c.add(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="{r}" fill="{fill}" stroke="{color}"/>')

    def legend(self, labels, colors):
        for k, (lab, col) in enumerate(zip(labels, colors)):
            y = self.y0 + 14 + 15 * k
            self.c.add(f'<line x1="{_f(self.x1 - 90)}" y1="{_f(y - 4)}" x2="{_f(self.x1 - 72)}" '
                       f'y2="{_f(y - 4)}" stroke="{col}" stroke-width="2"/>')
            self.c.text(self.x1 - 68, y, lab, 10, anchor="start")


def _stride(n: int, max_cells: int = MAX_CELLS) -> int:
    return max(1, math.ceil((n - 1) / (max_cells - 1))) if n > max_cells else 1


def heatmap(values, extent, title="", xlabel="theta' (deg)", ylabel="theta (deg)",
            log=False, vmin=None, vmax=None, max_cells: int = MAX_CELLS) -> tuple[Canvas, Frame]:
    """Heatmap with rows = theta (y axis) and columns = theta' (x axis).

    Large maps are subsampled on shared grid nodes, never interpolated.
    """
    vals = np.asarray(values, float)
    k = _stride(vals.shape[0], max_cells)
    sub = vals[::k, ::k]
    data = np.log10(np.maximum(sub, 1e-300)) if log else sub
    finite = np.isfinite(data)
    lo = vmin if vmin is not None else (float(data[finite].min()) if finite.any() else 0.0)
    hi = vmax if vmax is not None else (float(data[finite].max()) if finite.any() else 1.0)
    span = hi - lo if hi > lo else 1.0
    canvas = Canvas(520, 460)
    fr = Frame(canvas, (70, 40, 430, 400), extent, extent)
    m = sub.shape[0]
    cell = (fr.x1 - fr.x0) / m
    for i in range(m):
        for j in range(m):
            x = fr.x0 + j * cell
            y = fr.y1 - (i + 1) * cell
            col = "#bbbbbb" if not finite[i, j] else _hex(colormap((data[i, j] - lo) / span))
            canvas.add(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(cell + 0.05)}" '
                       f'height="{_f(cell + 0.05)}" fill="{col}"/>')
    fr.axes(xlabel, ylabel, title, xscale=180 / math.pi, yscale=180 / math.pi)
    # colour bar
    for q in range(50):
        y = fr.y1 - (q + 1) * (fr.y1 - fr.y0) / 50
        canvas.add(f'<rect x="445" y="{_f(y)}" width="14" height="{_f((fr.y1 - fr.y0) / 50 + 0.05)}" '
                   f'fill="{_hex(colormap(q / 49))}"/>')
    lab = "log10 " if log else ""
    canvas.text(470, fr.y1, f"{lab}{lo:.3g}", 9, anchor="start")
    canvas.text(470, fr.y0 + 8, f"{lab}{hi:.3g}", 9, anchor="start")
    return canvas, fr


def square_plot(extent, title="", xlabel="theta' (deg)", ylabel="theta (deg)") -> tuple[Canvas, Frame]:
    canvas = Canvas(480, 460)
    fr = Frame(canvas, (70, 40, 430, 400), extent, extent)
    fr.axes(xlabel, ylabel, title, xscale=180 / math.pi, yscale=180 / math.pi)
    return canvas, fr


def mask_overlay(fr: Frame, mask, extent, color, max_cells: int = MAX_CELLS, opacity=0.55):
    """Draw True cells of a boolean mask as translucent squares."""
    mask = np.asarray(mask, bool)
    k = _stride(mask.shape[0], max_cells)
    sub = mask[::k, ::k]
    m = sub.shape[0]
    cell = (fr.x1 - fr.x0) / m
    for i, j in zip(*np.nonzero(sub)):
        x = fr.x0 + j * cell
        y = fr.y1 - (i + 1) * cell
        fr.c.add(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(cell + 0.05)}" height="{_f(cell + 0.05)}" '
                 f'fill="{color}" fill-opacity="{opacity}"/>')


def line_plot(x, series: dict, title="", xlabel="", ylabel="", ylim=None, markers=False,
              fmt="{:.2g}") -> str:
    canvas = Canvas(520, 400)
    x = np.asarray(x, float)
    ally = np.concatenate([np.asarray(v, float)[np.isfinite(v)] for v in series.values()])
    yl = ylim or (float(min(0.0, ally.min())), float(ally.max() * 1.05 or 1.0))
    fr = Frame(canvas, (70, 40, 490, 340), (float(x.min()), float(x.max())), yl)
    fr.axes(xlabel, ylabel, title, fmt=fmt)
    for (name, y), col in zip(series.items(), PALETTE):
        fr.polyline(x, np.asarray(y, float), col)
        if markers:
            fr.points(x, np.asarray(y, float), col, r=2.5)
    fr.legend(list(series), PALETTE)
    return canvas.render()


def polar_plot(theta, series: dict, title="") -> str:
    """Radial plot of nonnegative curves versus polar angle from the +z axis."""
    canvas = Canvas(460, 460)
    cx, cy, rad = 230.0, 240.0, 180.0
    th = np.asarray(theta, float)
    rmax = max(float(np.nanmax(np.asarray(v, float))) for v in series.values()) or 1.0
    for q in (0.25, 0.5, 0.75, 1.0):
        canvas.add(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(rad * q)}" fill="none" '
                   f'stroke="#cccccc"/>')
    canvas.text(cx + 4, cy - rad - 4, f"{rmax:.3g}", 9, anchor="start")
    canvas.add(f'<line x1="{_f(cx)}" y1="{_f(cy - rad)}" x2="{_f(cx)}" y2="{_f(cy + rad)}" stroke="#cccccc"/>')
    for (name, r), col in zip(series.items(), PALETTE):
        r = np.nan_to_num(np.asarray(r, float)) / rmax * rad
        u = cx + r * np.sin(th)
        v = cy - r * np.cos(th)
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(u, v))
        canvas.add(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
    for k, (name, col) in enumerate(zip(series, PALETTE)):
        canvas.add(f'<line x1="10" y1="{14 + 15 * k}" x2="28" y2="{14 + 15 * k}" stroke="{col}" stroke-width="2"/>')
        canvas.text(32, 18 + 15 * k, name, 10, anchor="start")
    canvas.text(cx, 20, title, 13)
    return canvas.render()
