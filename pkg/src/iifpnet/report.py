"""Summary tables and dependency-free SVG charts."""

import csv
import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 480, 360
MARGIN = dict(left=70, right=20, top=40, bottom=50)
HIST_BIN_WIDTH = 0.05


def box_stats(values):
    """Quartiles and Tukey whiskers (1.5 IQR, clipped to the data)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        return None
    q1, med, q3 = (float(x) for x in np.quantile(v, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    return {
        "min": float(v[0]),
        "q1": q1,
        "median": med,
        "q3": q3,
        "max": float(v[-1]),
        "whisker_lo": float(inside.min()),
        "whisker_hi": float(inside.max()),
        "outliers": [float(x) for x in v if x < inside.min() or x > inside.max()],
    }


class _Svg:
    def __init__(self, width=WIDTH, height=HEIGHT):
        self.width, self.height = width, height
        self.parts = []

    def line(self, x1, y1, x2, y2, stroke="black", width=1, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="{stroke}" stroke-width="{width}"{d}/>'
        )

    def rect(self, x, y, w, h, fill="none", stroke="black"):
        self.parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}" stroke="{stroke}"/>'
        )

    def circle(self, cx, cy, r, fill="black", cls=None):
        c = f' class="{cls}"' if cls else ""
        self.parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r}" fill="{fill}"{c}/>')

    def text(self, x, y, s, size=12, anchor="middle", fill="black", weight="normal"):
        self.parts.append(
            f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" text-anchor="{anchor}" '
            f'fill="{fill}" font-weight="{weight}" font-family="sans-serif">{escape(str(s))}</text>'
        )

    def render(self):
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">'
        )
        bg = f'<rect width="{self.width}" height="{self.height}" fill="white"/>'
        return "\n".join([head, bg] + self.parts + ["</svg>"]) + "\n"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def box_plot_svg(ratios, bound=None, title=""):
    """Box-and-whisker of the deviation ratios with the bound as a red dot."""
    svg = _Svg()
    s = box_stats(ratios)
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    svg.text(WIDTH / 2, 22, title, size=14)
    if s is None:
        svg.text(WIDTH / 2, HEIGHT / 2, "no test points")
        return svg.render()

    top = max(s["max"], bound if bound is not None and math.isfinite(bound) else 0.0)
    top = top * 1.1 if top > 0 else 1.0

    def y(v):
        return y0 - (v / top) * (y0 - y1)

    svg.line(x0, y0, x1, y0)
    svg.line(x0, y0, x0, y1)
    for t in _ticks(0.0, top):
        svg.line(x0 - 4, y(t), x0, y(t))
        svg.text(x0 - 8, y(t) + 4, f"{t:.3g}", size=10, anchor="end")
    svg.text(18, (y0 + y1) / 2, "ratio", size=12)

    cx, half = (x0 + x1) / 2, 40
    svg.rect(cx - half, y(s["q3"]), 2 * half, y(s["q1"]) - y(s["q3"]), fill="#cfe2f3")
    svg.line(cx - half, y(s["median"]), cx + half, y(s["median"]), stroke="#d35400", width=2)
    svg.line(cx, y(s["q3"]), cx, y(s["whisker_hi"]), dash="4,3")
    svg.line(cx, y(s["q1"]), cx, y(s["whisker_lo"]), dash="4,3")
    svg.line(cx - half / 2, y(s["whisker_hi"]), cx + half / 2, y(s["whisker_hi"]))
    svg.line(cx - half / 2, y(s["whisker_lo"]), cx + half / 2, y(s["whisker_lo"]))
    for o in s["outliers"]:
        svg.circle(cx, y(o), 2.5, fill="#555555")

    if bound is not None and math.isfinite(bound):
        svg.circle(cx, y(bound), 5, fill="red", cls="bound")
        svg.text(cx + half + 8, y(bound) + 4, f"bound {bound:.4g}", size=11, anchor="start", fill="red")
        if s["max"] > bound:
            svg.text(WIDTH / 2, y1 + 14, "BOUND VIOLATED", size=16, fill="red", weight="bold")
    else:
        svg.text(WIDTH / 2, y1 + 14, "uncertified: no bound", size=12, fill="#777777")
    svg.text(WIDTH / 2, HEIGHT - 15, f"n={len(ratios)}  median={s['median']:.4g}  max={s['max']:.4g}", size=11)
    return svg.render()


def histogram_bins(values, width=HIST_BIN_WIDTH):
    v = np.asarray(values, dtype=np.float64)
    lo = math.floor(v.min() / width + 1e-9) * width
    hi = math.floor(v.max() / width + 1e-9) * width + width
    nbins = max(1, int(round((hi - lo) / width)))
    counts, edges = np.histogram(v, bins=nbins, range=(lo, lo + nbins * width))
    return counts, edges


def histogram_svg(values, title="passivity index per layer", target=None):
    svg = _Svg()
    svg.text(WIDTH / 2, 22, title, size=14)
    if len(values) == 0:
        svg.text(WIDTH / 2, HEIGHT / 2, "no layers")
        return svg.render()
    counts, edges = histogram_bins(values)
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    cmax = counts.max()
    bw = (x1 - x0) / len(counts)
    svg.line(x0, y0, x1, y0)
    svg.line(x0, y0, x0, y1)
    for i, c in enumerate(counts):
        h = (c / cmax) * (y0 - y1)
        svg.rect(x0 + i * bw, y0 - h, bw, h, fill="#7fb3d5")
    step = max(1, len(edges) // 6)
    for i in range(0, len(edges), step):
        svg.text(x0 + i * bw, y0 + 16, f"{edges[i]:.2f}", size=10)
    svg.text(x0 - 8, y1 + 4, str(int(cmax)), size=10, anchor="end")
    svg.text(x0 - 8, y0, "0", size=10, anchor="end")
    if target is not None and edges[0] <= target <= edges[-1]:
        tx = x0 + (target - edges[0]) / (edges[-1] - edges[0]) * (x1 - x0)
        svg.line(tx, y0, tx, y1, stroke="red", dash="5,3")
    svg.text(WIDTH / 2, HEIGHT - 15, f"{len(values)} layers, {len(counts)} bin(s) of width {HIST_BIN_WIDTH}", size=11)
    return svg.render()


SUMMARY_COLUMNS = (
    "name",
    "points",
    "min",
    "q1",
    "median",
    "q3",
    "max",
    "bound_ratio",
    "violations",
    "bound_violated",
)


def summary_row(name, cols):
    ratios = cols["ratio"]
    bound = float(cols["bound_ratio"][0]) if len(cols["bound_ratio"]) else float("nan")
    s = box_stats(ratios)
    if s is None:
        return dict(name=name, points=0, min="", q1="", median="", q3="", max="",
                    bound_ratio=bound, violations=0, bound_violated=0)
    viol = int(np.sum(cols["violated"]))
    flagged = int(math.isfinite(bound) and s["max"] > bound)
    return dict(name=name, points=len(ratios), min=s["min"], q1=s["q1"], median=s["median"],
                q3=s["q3"], max=s["max"], bound_ratio=bound, violations=viol, bound_violated=flagged)


def write_summary_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
