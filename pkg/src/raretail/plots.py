"""Deterministic SVG plots: box plots, line plots and bar charts.

The SVG is written by hand with fixed number formatting, so identical
inputs give byte-identical files (no timestamps, ids or font metrics).
"""

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["BoxStats", "box_stats", "box_plot_svg", "line_plot_svg", "bar_plot_svg"]

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


@dataclass(frozen=True)
class BoxStats:
    """Five-number summary with whiskers at the most extreme data within 1.5 IQR of the box."""

    median: float
    q25: float
    q75: float
    whisker_low: float
    whisker_high: float
    outliers: tuple
    count: int = 0

    def covers(self, value):
        return self.q25 <= value <= self.q75

    def to_dict(self):
        return {
            "median": self.median,
            "q25": self.q25,
            "q75": self.q75,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "outliers": list(self.outliers),
            "count": self.count,
        }


def box_stats(values, whis=1.5):
    """Box statistics with linear-interpolated quartiles."""
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        nan = float("nan")
        return BoxStats(nan, nan, nan, nan, nan, (), 0)
    q25, med, q75 = np.percentile(x, [25, 50, 75])
    iqr = q75 - q25
    hi_lim = q75 + whis * iqr
    lo_lim = q25 - whis * iqr
    inside_hi = x[x <= hi_lim]
    inside_lo = x[x >= lo_lim]
    wh = q75 if inside_hi.size == 0 or inside_hi.max() < q75 else inside_hi.max()
    wl = q25 if inside_lo.size == 0 or inside_lo.min() > q25 else inside_lo.min()
    out = tuple(float(v) for v in np.sort(x[(x < wl) | (x > wh)]))
    return BoxStats(float(med), float(q25), float(q75), float(wl), float(wh), out, int(x.size))


# ---------------------------------------------------------------------------
# svg primitives


def _f(v):
    return f"{v:.2f}"


def _tick(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.1e}"
    return f"{v:.3g}"


class _Canvas:
    def __init__(self, title, xlabel, ylabel):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
            f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>',
            f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {H / 2:.1f})">{escape(ylabel)}</text>',
        ]
        self.x0, self.x1 = LEFT, W - RIGHT
        self.y0, self.y1 = H - BOTTOM, TOP

    def axes(self, ylo, yhi, xticks=(), log_y=False):
        self.ylo, self.yhi, self.log_y = ylo, yhi, log_y
        p = self.parts
        p.append(f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x1}" y2="{self.y0}" stroke="black"/>')
        p.append(f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x0}" y2="{self.y1}" stroke="black"/>')
        for v in np.linspace(ylo, yhi, 5):
            y = self.ypos(10**v if log_y else v)
            label = _tick(10**v) if log_y else _tick(v)
            p.append(f'<line x1="{self.x0 - 4}" y1="{_f(y)}" x2="{self.x0}" y2="{_f(y)}" stroke="black"/>')
            p.append(
                f'<text x="{self.x0 - 6}" y="{_f(y + 4)}" text-anchor="end" font-family="sans-serif" '
                f'font-size="10">{label}</text>'
            )
        for x, label in xticks:
            p.append(
                f'<text x="{_f(x)}" y="{self.y0 + 16}" text-anchor="middle" font-family="sans-serif" '
                f'font-size="10">{escape(label)}</text>'
            )

    def ypos(self, v):
        if self.log_y:
            v = math.log10(v) if v > 0 else self.ylo
        span = self.yhi - self.ylo
        frac = 0.5 if span == 0 else (v - self.ylo) / span
        return self.y0 - frac * (self.y0 - self.y1)

    def svg(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _range(values, pad=0.05):
    v = [x for x in values if math.isfinite(x)]
    if not v:
        return 0.0, 1.0
    lo, hi = min(v), max(v)
    if lo == hi:
        return lo - 0.5, hi + 0.5
    d = (hi - lo) * pad
    return lo - d, hi + d


# ---------------------------------------------------------------------------
# plots


def box_plot_svg(groups, title="", xlabel="", ylabel="", reference=None):
    """Box plot of ``groups``: a list of (label, BoxStats). ``reference`` draws a dashed line."""
    vals = []
    for _, s in groups:
        vals += [s.whisker_low, s.whisker_high, s.q25, s.q75, *s.outliers]
    if reference is not None:
        vals.append(reference)
    c = _Canvas(title, xlabel, ylabel)
    m = len(groups)
    slot = (c.x1 - c.x0) / max(m, 1)
    xs = [c.x0 + slot * (i + 0.5) for i in range(m)]
    c.axes(*_range(vals), xticks=[(x, lab) for x, (lab, _) in zip(xs, groups)])
    p = c.parts
    half = min(slot * 0.3, 40)
    for i, (x, (_, s)) in enumerate(zip(xs, groups)):
        if not math.isfinite(s.median):
            continue
        col = PALETTE[i % len(PALETTE)]
        ylo, yhi = c.ypos(s.q25), c.ypos(s.q75)
        p.append(f'<line x1="{_f(x)}" y1="{_f(c.ypos(s.whisker_low))}" x2="{_f(x)}" y2="{_f(ylo)}" stroke="{col}"/>')
        p.append(f'<line x1="{_f(x)}" y1="{_f(yhi)}" x2="{_f(x)}" y2="{_f(c.ypos(s.whisker_high))}" stroke="{col}"/>')
        for w in (s.whisker_low, s.whisker_high):
            yw = c.ypos(w)
            p.append(f'<line x1="{_f(x - half / 2)}" y1="{_f(yw)}" x2="{_f(x + half / 2)}" y2="{_f(yw)}" stroke="{col}"/>')
        if s.q75 > s.q25:
            p.append(
                f'<rect x="{_f(x - half)}" y="{_f(yhi)}" width="{_f(2 * half)}" height="{_f(ylo - yhi)}" '
                f'fill="none" stroke="{col}"/>'
            )
        else:
            # zero IQR: the box collapses to a line
            p.append(f'<line x1="{_f(x - half)}" y1="{_f(ylo)}" x2="{_f(x + half)}" y2="{_f(ylo)}" stroke="{col}"/>')
        ym = c.ypos(s.median)
        p.append(
            f'<line x1="{_f(x - half)}" y1="{_f(ym)}" x2="{_f(x + half)}" y2="{_f(ym)}" stroke="{col}" stroke-width="2"/>'
        )
        for o in s.outliers:
            p.append(f'<circle cx="{_f(x)}" cy="{_f(c.ypos(o))}" r="2.5" fill="none" stroke="{col}"/>')
    if reference is not None:
        yr = c.ypos(reference)
        p.append(f'<line x1="{c.x0}" y1="{_f(yr)}" x2="{c.x1}" y2="{_f(yr)}" stroke="gray" stroke-dasharray="4 3"/>')
    return c.svg()


def line_plot_svg(series, title="", xlabel="", ylabel="", reference=None):
    """Line plot; ``series`` is a list of (label, xs, ys). NaN values break the line."""
    xs_all = [float(x) for _, xs, _ in series for x in xs]
    ys_all = [float(y) for _, _, ys in series for y in ys]
    if reference is not None:
        ys_all.append(reference)
    c = _Canvas(title, xlabel, ylabel)
    xlo, xhi = _range(xs_all, pad=0.0)
    c.axes(*_range(ys_all), xticks=[(c.x0, _tick(xlo)), (c.x1, _tick(xhi))] if xs_all else ())
    p = c.parts

    def xpos(v):
        return c.x0 + (0.5 if xhi == xlo else (v - xlo) / (xhi - xlo)) * (c.x1 - c.x0)

    for i, (label, xs, ys) in enumerate(series):
        col = PALETTE[i % len(PALETTE)]
        run = []
        segments = []
        for x, y in zip(xs, ys):
            if math.isfinite(y):
                run.append(f"{_f(xpos(x))},{_f(c.ypos(y))}")
            elif run:
                segments.append(run)
                run = []
        if run:
            segments.append(run)
        for seg in segments:
            p.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{col}" stroke-width="1.2"/>')
        ly = c.y1 + 14 * i + 6
        p.append(f'<line x1="{c.x1 - 120}" y1="{ly}" x2="{c.x1 - 100}" y2="{ly}" stroke="{col}" stroke-width="2"/>')
        p.append(
            f'<text x="{c.x1 - 96}" y="{ly + 4}" font-family="sans-serif" font-size="10">{escape(str(label))}</text>'
        )
    if reference is not None:
        yr = c.ypos(reference)
        p.append(f'<line x1="{c.x0}" y1="{_f(yr)}" x2="{c.x1}" y2="{_f(yr)}" stroke="gray" stroke-dasharray="4 3"/>')
    return c.svg()


def bar_plot_svg(labels, values, errors=None, title="", xlabel="", ylabel=""):
    """Bar chart with optional symmetric error bars."""
    values = [float(v) for v in values]
    errors = [float(e) for e in errors] if errors is not None else [0.0] * len(values)
    top = [v + e for v, e in zip(values, errors) if math.isfinite(v + e)]
    c = _Canvas(title, xlabel, ylabel)
    m = len(values)
    slot = (c.x1 - c.x0) / max(m, 1)
    xs = [c.x0 + slot * (i + 0.5) for i in range(m)]
    c.axes(0.0, max(top + [0.0]) * 1.05 or 1.0, xticks=list(zip(xs, labels)))
    p = c.parts
    half = min(slot * 0.35, 40)
    for i, (x, v, e) in enumerate(zip(xs, values, errors)):
        if not math.isfinite(v):
            continue
        col = PALETTE[i % len(PALETTE)]
        y = c.ypos(v)
        p.append(
            f'<rect x="{_f(x - half)}" y="{_f(y)}" width="{_f(2 * half)}" height="{_f(c.y0 - y)}" fill="{col}" fill-opacity="0.7"/>'
        )
        if e > 0:
            p.append(f'<line x1="{_f(x)}" y1="{_f(c.ypos(v - e))}" x2="{_f(x)}" y2="{_f(c.ypos(v + e))}" stroke="black"/>')
    return c.svg()
