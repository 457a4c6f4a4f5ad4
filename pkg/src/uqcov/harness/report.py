"""Deterministic hand-written SVG plots of analysis outputs."""

import json
import os
import re
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 520, 380
LEFT, RIGHT, TOP, BOTTOM = 70, 500, 30, 320
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22")
REFERENCE = 0.95


def _fmt(v):
    return f"{v:.3f}"


def _range(values, include=()):
    vals = list(values) + list(include)
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class Axes:
    """Affine map from data to pixel coordinates."""

    def __init__(self, xr, yr):
        self.xr, self.yr = xr, yr

    def x(self, v):
        return LEFT + (v - self.xr[0]) / (self.xr[1] - self.xr[0]) * (RIGHT - LEFT)

    def y(self, v):
        return BOTTOM - (v - self.yr[0]) / (self.yr[1] - self.yr[0]) * (BOTTOM - TOP)


def svg_plot(series, title, xlabel, ylabel, mode="scatter", hline=None, line=None):
    """Render ``series`` (name -> [(x, y), ...]) as an SVG document string.

    ``mode`` is ``scatter`` (markers) or ``line`` (markers joined in x order).
    ``hline`` adds a dashed horizontal reference; ``line`` = (intercept,
    slope) adds a fitted line across the x range.
    """
    names = sorted(series)
    xs = [p[0] for n in names for p in series[n]]
    ys = [p[1] for n in names for p in series[n]]
    ax = Axes(_range(xs), _range(ys, [hline] if hline is not None and ys else []))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line class="axis" x1="{LEFT}" y1="{BOTTOM}" x2="{RIGHT}" y2="{BOTTOM}" stroke="black"/>',
        f'<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{BOTTOM}" stroke="black"/>',
        f'<text x="{(LEFT + RIGHT) / 2}" y="{BOTTOM + 40}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{(TOP + BOTTOM) / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {(TOP + BOTTOM) / 2})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        xv = ax.xr[0] + i * (ax.xr[1] - ax.xr[0]) / 4
        yv = ax.yr[0] + i * (ax.yr[1] - ax.yr[0]) / 4
        out.append(f'<text class="tick" x="{_fmt(ax.x(xv))}" y="{BOTTOM + 16}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
        out.append(f'<text class="tick" x="{LEFT - 6}" y="{_fmt(ax.y(yv) + 3)}" text-anchor="end" font-size="10">{yv:.3g}</text>')
    if hline is not None and ys:
        out.append(f'<line class="reference" x1="{LEFT}" y1="{_fmt(ax.y(hline))}" x2="{RIGHT}" y2="{_fmt(ax.y(hline))}" '
                   'stroke="gray" stroke-dasharray="4 3"/>')
    if line is not None and xs:
        a, b = line
        x0, x1 = ax.xr
        out.append(f'<line class="fit" x1="{_fmt(ax.x(x0))}" y1="{_fmt(ax.y(a + b * x0))}" x2="{_fmt(ax.x(x1))}" '
                   f'y2="{_fmt(ax.y(a + b * x1))}" stroke="black" stroke-width="1"/>')
    for i, name in enumerate(names):
        color = PALETTE[i % len(PALETTE)]
        pts = sorted(series[name]) if mode == "line" else list(series[name])
        if mode == "line" and len(pts) > 1:
            path = " ".join(f"{_fmt(ax.x(x))},{_fmt(ax.y(y))}" for x, y in pts)
            out.append(f'<polyline class="series" fill="none" stroke="{color}" points="{path}"/>')
        for x, y in pts:
            out.append(f'<circle class="marker" data-series="{escape(name)}" cx="{_fmt(ax.x(x))}" cy="{_fmt(ax.y(y))}" '
                       f'r="3" fill="{color}"/>')
        out.append(f'<text x="{RIGHT - 110}" y="{TOP + 14 * (i + 1)}" font-size="10" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _slug(s):
    return re.sub(r"[^A-Za-z0-9.]+", "_", str(s)).strip("_") or "x"


def write_report(analysis, out_dir):
    """Write all plots for an analysis dict; returns the file names written (sorted)."""
    os.makedirs(out_dir, exist_ok=True)
    files = {}
    for lv in analysis.get("levels", []):
        series = {m: [tuple(p) for p in pts] for m, pts in lv["points"].items()}
        files[f"coverage_width_{_slug(lv['level'])}.svg"] = svg_plot(
            series, f"coverage vs width, level {lv['level']}", "width", "coverage",
            hline=REFERENCE, line=tuple(lv["line"]))
    for key, per_method in analysis.get("series", {}).items():
        dataset, shift = key.split("|", 1)
        if shift == "none":
            continue
        cov = {m: [(p[0], p[1]) for p in pts] for m, pts in per_method.items()}
        wid = {m: [(p[0], p[2]) for p in pts] for m, pts in per_method.items()}
        files[f"coverage_{_slug(dataset)}_{_slug(shift)}.svg"] = svg_plot(
            cov, f"{dataset}: coverage under {shift}", "shift level", "coverage", mode="line", hline=REFERENCE)
        files[f"width_{_slug(dataset)}_{_slug(shift)}.svg"] = svg_plot(
            wid, f"{dataset}: width under {shift}", "shift level", "width", mode="line")
    for name in sorted(files):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(files[name])
    return sorted(files)


def load_analysis(path):
    """Accepts analysis.json or the directory containing it."""
    if os.path.isdir(path):
        path = os.path.join(path, "analysis.json")
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read analysis {path}: {exc}") from None
    if not isinstance(data, dict) or "levels" not in data or "series" not in data:
        raise ValueError(f"{path}: not an analysis file (missing 'levels' or 'series')")
    return data
