"""Static SVG and CSV output: bifurcation diagrams, space-time maps and multiplier plots."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .branchio import read_branch

WIDTH, HEIGHT, MARGIN = 640, 480, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


class _Canvas:
    def __init__(self, xlim, ylim, title="", xlabel="", ylabel="", equal=False):
        (x0, x1), (y0, y1) = xlim, ylim
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        if equal:
            span = max(x1 - x0, y1 - y0)
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            x0, x1, y0, y1 = cx - span / 2, cx + span / 2, cy - span / 2, cy + span / 2
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            '<rect width="100%" height="100%" fill="white"/>',
            f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
            'fill="none" stroke="black"/>',
            self._text(WIDTH / 2, MARGIN / 2, title, size=16),
            self._text(WIDTH / 2, HEIGHT - 15, xlabel),
            f'<text x="15" y="{HEIGHT / 2}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>',
        ]
        for v, (px, _) in ((x0, self.map(x0, y0)), (x1, self.map(x1, y0))):
            self.parts.append(self._text(px, HEIGHT - MARGIN + 18, f"{v:.4g}"))
        for v in (y0, y1):
            self.parts.append(self._text(MARGIN - 8, self.map(x0, v)[1] + 4, f"{v:.4g}", anchor="end"))

    @staticmethod
    def _text(x, y, s, size=12, anchor="middle"):
        return f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" text-anchor="{anchor}">{escape(str(s))}</text>'

    def map(self, x, y):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        px = MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)
        py = HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)
        return px, py

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = " ".join("{:.2f},{:.2f}".format(*self.map(x, y)) for x, y in zip(xs, ys) if np.isfinite(y))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>')

    def marker(self, x, y, color, r=3.5, label=None):
        px, py = self.map(x, y)
        self.parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{r}" fill="{color}"/>')
        if label:
            self.parts.append(self._text(px + 6, py - 6, label, size=10, anchor="start"))

    def rect(self, x, y, w, h, color):
        self.parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{color}"/>')

    def legend(self, entries):
        for k, (name, color) in enumerate(entries):
            y = MARGIN + 15 + 15 * k
            self.parts.append(f'<line x1="{WIDTH - MARGIN - 110}" y1="{y - 4}" x2="{WIDTH - MARGIN - 90}" '
                              f'y2="{y - 4}" stroke="{color}" stroke-width="2"/>')
            self.parts.append(self._text(WIDTH - MARGIN - 85, y, name, size=11, anchor="start"))

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.parts + ["</svg>"]) + "\n")
        return path


def bifurcation_diagram(branch_dirs, out_path, quantity: str = "norm") -> Path:
    """``lam`` against ``quantity`` (``norm``, ``T``, ``max_u1`` ...) for each branch; special points labelled."""
    tables = [(Path(d).name, read_branch(d)) for d in branch_dirs]
    xs = np.concatenate([t["lam"] for _, t in tables]) if tables else np.zeros(1)
    ys = np.concatenate([t[quantity] for _, t in tables]) if tables else np.zeros(1)
    ys = ys[np.isfinite(ys)] if np.any(np.isfinite(ys)) else np.zeros(1)
    canvas = _Canvas((xs.min(), xs.max()), (ys.min(), ys.max()), "bifurcation diagram", "lambda", quantity)
    legend = []
    for k, (name, tab) in enumerate(tables):
        color = COLORS[k % len(COLORS)]
        canvas.polyline(tab["lam"], tab[quantity], color)
        for x, y, pt in zip(tab["lam"], tab[quantity], tab["ptype"]):
            if pt not in ("regular", "user") and np.isfinite(y):
                canvas.marker(x, y, color, label=pt)
        legend.append((name, color))
    canvas.legend(legend)
    return canvas.save(out_path)


def _colormap(v: float) -> str:
    """Blue-white-red ramp for ``v`` in [0, 1]."""
    v = float(np.clip(v, 0.0, 1.0))
    if v < 0.5:
        s = v / 0.5
        r, g, b = s, s, 1.0
    else:
        s = (v - 0.5) / 0.5
        r, g, b = 1.0, 1.0 - s, 1.0 - s
    return "#{:02x}{:02x}{:02x}".format(int(255 * r), int(255 * g), int(255 * b))


def spacetime(orbit, out_stem, component: int = 0) -> tuple[Path, Path]:
    """Space-time map of one component over one period.

    Writes ``<stem>.csv`` (first row ``x`` values, then one row per slice
    led by its time) and ``<stem>.svg``.
    """
    prob = orbit.problem
    x = prob.mesh.work_points
    grid = np.array([prob.components(y)[component] for y in orbit.Y])
    times = orbit.t * orbit.T
    stem = Path(out_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t\\x", *(repr(float(v)) for v in x)])
        for t, row in zip(times, grid):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
    lo, hi = float(grid.min()), float(grid.max())
    scale = hi - lo if hi > lo else 1.0
    canvas = _Canvas((x[0], x[-1]), (times[0], times[-1]), f"component {component + 1}", "x", "t")
    nx, nt = x.size, times.size
    cw = (WIDTH - 2 * MARGIN) / nx
    ch = (HEIGHT - 2 * MARGIN) / nt
    for j in range(nt):
        for i in range(nx):
            canvas.rect(MARGIN + i * cw, HEIGHT - MARGIN - (j + 1) * ch, cw + 0.5, ch + 0.5,
                        _colormap((grid[j, i] - lo) / scale))
    return csv_path, canvas.save(stem.with_suffix(".svg"))


def multiplier_plot(multipliers, out_stem) -> tuple[Path, Path]:
    """Multipliers in the complex plane with the unit circle; the one nearest 1 is marked as trivial."""
    g = np.asarray(multipliers, dtype=complex)
    g = g[np.isfinite(g)]
    stem = Path(out_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_suffix(".csv")
    trivial = int(np.argmin(np.abs(g - 1))) if g.size else -1
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "abs", "trivial"])
        for k, v in enumerate(g):
            w.writerow([repr(v.real), repr(v.imag), repr(abs(v)), int(k == trivial)])
    # clip huge multipliers so the circle stays visible
    shown = np.where(np.abs(g) > 3, 3 * g / np.maximum(np.abs(g), 1e-300), g)
    canvas = _Canvas((-3, 3), (-3, 3), "Floquet multipliers", "Re", "Im", equal=True)
    th = np.linspace(0, 2 * np.pi, 200)
    canvas.polyline(np.cos(th), np.sin(th), "black", width=1, dash="4,3")
    for k, v in enumerate(shown):
        if k == trivial:
            canvas.marker(v.real, v.imag, COLORS[1], r=5, label="trivial")
        else:
            canvas.marker(v.real, v.imag, COLORS[0])
    return csv_path, canvas.save(stem.with_suffix(".svg"))
