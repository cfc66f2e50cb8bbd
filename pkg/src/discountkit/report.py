"""Plot specifications, deterministic SVG rendering and the plain-text report."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Dict, List, Mapping, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from .core import FitResult, IndifferenceSeries, ed50, predict
from .inference import (RegressionResult, Stage2Results, SummaryStats, TTestResult,
                        finite_array, histogram_bins, pretty_breaks, quantile, summarize)
from .special import normal_pdf

PLOT_KINDS = ("scatter", "scatter_with_curve", "histogram", "boxplot", "mosaic", "line")
FIT_GRID = tuple(float(d) for d in range(0, 9501))
_PALETTE = ("#1f4e79", "#c0392b", "#2e7d32", "#6a1b9a", "#ef6c00")


@dataclass(frozen=True)
class Layer:
    """One drawable layer.

    ``kind`` is ``points``, ``line``, ``bars`` (``xs`` holds bin edges, ``ys``
    the heights), ``rects`` (``rects`` holds x0, y0, x1, y1 tuples) or
    ``box`` (``box`` holds the statistics).
    """

    kind: str
    xs: Tuple[float, ...] = ()
    ys: Tuple[float, ...] = ()
    label: str = ""
    dashed: bool = False
    rects: Tuple[Tuple[float, float, float, float], ...] = ()
    rect_labels: Tuple[str, ...] = ()
    box: Optional["BoxStats"] = None


@dataclass(frozen=True)
class Guide:
    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True)
class TextNote:
    x: float
    y: float
    text: str


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    layers: Tuple[Layer, ...] = ()
    guides: Tuple[Guide, ...] = ()
    notes: Tuple[TextNote, ...] = ()
    legend: Tuple[str, ...] = ()
    categories: Tuple[str, ...] = ()
    width: int = 800
    height: int = 600

    def __post_init__(self) -> None:
        if self.kind not in PLOT_KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}")

    def layers_of(self, kind: str) -> List[Layer]:
        return [layer for layer in self.layers if layer.kind == kind]


def _delay_axis(delays: Sequence[float], log_x: bool) -> Tuple[float, ...]:
    return tuple(math.log(d) for d in delays) if log_x else tuple(float(d) for d in delays)


def plot_fit(series: IndifferenceSeries, fits: Sequence[FitResult] = (), log_x: bool = False,
             annotate_ed50: bool = True, title: str = "Indifference points, model fit, and ED50",
             labels: Optional[Sequence[str]] = None) -> PlotSpec:
    """Observed points plus one fitted curve per fit on a step-1 delay grid.

    The grid runs from 0 to 9500 days (from 1 on a log axis). ED50 guides are
    dotted segments meeting the curve at 0.5.
    """
    points = Layer("points", _delay_axis(series.delays, log_x), tuple(series.values), "observed")
    grid = FIT_GRID[1:] if log_x else FIT_GRID
    layers = [points]
    guides: List[Guide] = []
    notes: List[TextNote] = []
    names = list(labels) if labels is not None else [f.model.capitalize() for f in fits]
    for i, (fit, name) in enumerate(zip(fits, names)):
        curve = tuple(predict(fit.params, d) for d in grid)
        layers.append(Layer("line", _delay_axis(grid, log_x), curve, name, dashed=i > 0))
        half_life = ed50(fit.params)
        if annotate_ed50 and math.isfinite(half_life) and half_life > 0:
            x = math.log(half_life) if log_x else half_life
            # ln(1) = 0, so the horizontal guide starts at 0 on either axis
            guides.append(Guide(x, 0.0, x, 0.5))
            guides.append(Guide(0.0, 0.5, x, 0.5))
            text = f"ED50 = {round(half_life)} days"
            if len(fits) > 1:
                text = f"{name} {text}"
            tx = math.log(2700.0) if log_x else 2700.0
            notes.append(TextNote(tx, 0.54 + 0.06 * i, text))
    return PlotSpec(
        kind="scatter_with_curve" if fits else "scatter", title=title,
        x_label="ln(Delay)" if log_x else "Delay (days)",
        y_label="Indifference point", layers=tuple(layers), guides=tuple(guides),
        notes=tuple(notes), legend=tuple(names) if len(fits) > 1 else ())


def plot_scatter(xs: Sequence[float], ys: Sequence[float], title: str = "",
                 x_label: str = "x", y_label: str = "y",
                 line: Optional[Tuple[float, float]] = None) -> PlotSpec:
    """Scatter plot, optionally with a straight line ``intercept + slope * x``."""
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch ({len(xs)} vs {len(ys)})")
    layers = [Layer("points", tuple(map(float, xs)), tuple(map(float, ys)))]
    if line is not None and xs:
        a, b = line
        lo, hi = float(min(xs)), float(max(xs))
        layers.append(Layer("line", (lo, hi), (a + b * lo, a + b * hi), "fit"))
    return PlotSpec("scatter", title, x_label, y_label, tuple(layers))


def plot_line(xs: Sequence[float], ys: Sequence[float], title: str = "",
              x_label: str = "x", y_label: str = "y") -> PlotSpec:
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch ({len(xs)} vs {len(ys)})")
    return PlotSpec("line", title, x_label, y_label,
                    (Layer("line", tuple(map(float, xs)), tuple(map(float, ys))),))


def plot_histogram(values: Sequence[float], bins: Optional[int] = None,
                   overlay_normal: bool = False, title: str = "", x_label: str = "") -> PlotSpec:
    """Equal-width histogram on pretty breaks (Sturges count unless ``bins`` given).

    With ``overlay_normal`` the bars show densities and a normal curve with the
    sample mean and standard deviation is drawn on top.
    """
    x = finite_array(values)
    edges, counts = histogram_bins(x, bins)
    if overlay_normal:
        heights = tuple(c / (x.size * (edges[i + 1] - edges[i])) for i, c in enumerate(counts))
    else:
        heights = tuple(float(c) for c in counts)
    layers = [Layer("bars", tuple(edges), heights, "counts")]
    if overlay_normal and x.size > 1:
        mean, sd = float(np.mean(x)), float(np.std(x, ddof=1))
        if sd > 0:
            grid = np.linspace(edges[0], edges[-1], 201)
            layers.append(Layer("line", tuple(grid.tolist()),
                                tuple(normal_pdf(g, mean, sd) for g in grid), "normal density"))
    return PlotSpec("histogram", title, x_label, "Density" if overlay_normal else "Frequency",
                    tuple(layers))


@dataclass(frozen=True)
class BoxStats:
    label: str
    n: int
    median: float
    lower_hinge: float
    upper_hinge: float
    lower_whisker: float
    upper_whisker: float
    outliers: Tuple[float, ...]


def box_stats(label: str, values: Sequence[float]) -> BoxStats:
    """Type-7 quartile hinges; whiskers reach the most extreme points within 1.5 IQR."""
    x = sorted(float(v) for v in finite_array(values))
    if not x:
        raise ValueError(f"group {label!r} is empty")
    q1, med, q3 = quantile(x, 0.25), quantile(x, 0.5), quantile(x, 0.75)
    reach = 1.5 * (q3 - q1)
    inside = [v for v in x if q1 - reach <= v <= q3 + reach]
    return BoxStats(label, len(x), med, q1, q3, min(inside), max(inside),
                    tuple(v for v in x if v < q1 - reach or v > q3 + reach))


def plot_box(groups: Mapping[str, Sequence[float]], title: str = "", x_label: str = "",
             y_label: str = "") -> PlotSpec:
    stats = [box_stats(str(k), v) for k, v in groups.items()]
    return PlotSpec("boxplot", title, x_label, y_label,
                    tuple(Layer("box", label=s.label, box=s) for s in stats),
                    categories=tuple(s.label for s in stats))


def plot_mosaic(row_levels: Sequence[str], col_levels: Sequence[str],
                counts: Sequence[Sequence[float]], title: str = "",
                x_label: str = "", y_label: str = "") -> PlotSpec:
    """Mosaic on the unit square.

    Column widths follow the row-variable marginals and heights within a
    column the conditional proportions, so each rectangle's area equals its
    cell's share of the grand total. Empty cells produce no rectangle.
    """
    table = np.asarray(counts, dtype=float)
    if table.shape != (len(row_levels), len(col_levels)):
        raise ValueError(f"table shape {table.shape} does not match the level lists")
    if np.any(table < 0) or not np.all(np.isfinite(table)):
        raise ValueError("counts must be finite and non-negative")
    total = float(table.sum())
    if total <= 0:
        raise ValueError("mosaic needs a positive grand total")
    rects: List[Tuple[float, float, float, float]] = []
    labels: List[str] = []
    x0 = 0.0
    for i, row in enumerate(row_levels):
        margin = float(table[i].sum())
        width = margin / total
        y0 = 0.0
        for j, col in enumerate(col_levels):
            if table[i, j] == 0:
                continue
            height = float(table[i, j]) / margin
            rects.append((x0, y0, x0 + width, y0 + height))
            labels.append(f"{row} / {col}")
            y0 += height
        x0 += width
    return PlotSpec("mosaic", title, x_label, y_label,
                    (Layer("rects", rects=tuple(rects), rect_labels=tuple(labels)),),
                    categories=tuple(str(r) for r in row_levels))


# ---------------------------------------------------------------------------
# SVG rendering

_MARGIN = (70, 30, 50, 60)  # left, right, top, bottom


def _fmt(v: float) -> str:
    text = f"{v:.2f}"
    return "0.00" if text == "-0.00" else text


def _tick_label(v: float) -> str:
    text = f"{v:.6g}"
    return "0" if text == "-0" else text


def _data_ranges(spec: PlotSpec) -> Tuple[float, float, float, float]:
    if spec.kind == "mosaic":
        return 0.0, 1.0, 0.0, 1.0
    xs: List[float] = []
    ys: List[float] = []
    for layer in spec.layers:
        if layer.kind == "box" and layer.box is not None:
            b = layer.box
            ys.extend([b.lower_whisker, b.upper_whisker, *b.outliers])
        elif layer.kind == "bars":
            xs.extend(layer.xs)
            ys.extend([0.0, *layer.ys])
        else:
            xs.extend(layer.xs)
            ys.extend(layer.ys)
    for g in spec.guides:
        xs.extend([g.x0, g.x1])
        ys.extend([g.y0, g.y1])
    if spec.kind == "boxplot":
        xs = [0.5, len(spec.layers) + 0.5]
    finite_x = [v for v in xs if math.isfinite(v)] or [0.0, 1.0]
    finite_y = [v for v in ys if math.isfinite(v)] or [0.0, 1.0]
    x0, x1, y0, y1 = min(finite_x), max(finite_x), min(finite_y), max(finite_y)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    return x0, x1, y0, y1


class _Canvas:
    def __init__(self, spec: PlotSpec):
        self.spec = spec
        left, right, top, bottom = _MARGIN
        self.left, self.top = left, top
        self.w = spec.width - left - right
        self.h = spec.height - top - bottom
        self.x0, self.x1, self.y0, self.y1 = _data_ranges(spec)

    def px(self, x: float) -> float:
        return self.left + (x - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y: float) -> float:
        return self.top + self.h - (y - self.y0) / (self.y1 - self.y0) * self.h


def _path(canvas: _Canvas, xs: Sequence[float], ys: Sequence[float]) -> str:
    parts = []
    pen_down = False
    for x, y in zip(xs, ys):
        if not (math.isfinite(x) and math.isfinite(y)):
            pen_down = False
            continue
        parts.append(f"{'L' if pen_down else 'M'}{_fmt(canvas.px(x))},{_fmt(canvas.py(y))}")
        pen_down = True
    return " ".join(parts)


def svg_document(spec: PlotSpec) -> str:
    """Standalone SVG 1.1 text for ``spec``; identical specs give identical bytes."""
    c = _Canvas(spec)
    out: List[str] = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{spec.width}" '
        f'height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">',
        f'<rect class="background" x="0" y="0" width="{spec.width}" height="{spec.height}" fill="white"/>',
    ]
    if spec.title:
        out.append(f'<text class="title" x="{_fmt(spec.width / 2)}" y="28" text-anchor="middle" '
                   f'font-size="16">{escape(spec.title)}</text>')
    out.extend(_axes(c))
    for index, layer in enumerate(spec.layers):
        out.extend(_layer(c, layer, index))
    for g in spec.guides:
        out.append(f'<line class="guide" x1="{_fmt(c.px(g.x0))}" y1="{_fmt(c.py(g.y0))}" '
                   f'x2="{_fmt(c.px(g.x1))}" y2="{_fmt(c.py(g.y1))}" stroke="#555555" '
                   f'stroke-dasharray="2,3"/>')
    for n in spec.notes:
        out.append(f'<text class="annotation" x="{_fmt(c.px(n.x))}" y="{_fmt(c.py(n.y))}" '
                   f'font-size="12">{escape(n.text)}</text>')
    if spec.legend:
        out.extend(_legend(c, spec))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _axes(c: _Canvas) -> List[str]:
    spec = c.spec
    bottom, right = c.top + c.h, c.left + c.w
    out = [f'<line class="axis" x1="{c.left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
           f'<line class="axis" x1="{c.left}" y1="{c.top}" x2="{c.left}" y2="{bottom}" stroke="black"/>']
    if spec.kind in ("boxplot", "mosaic"):
        positions = _category_positions(spec)
        for label, x in positions:
            out.append(f'<text class="tick-label" x="{_fmt(x)}" y="{bottom + 18}" '
                       f'text-anchor="middle" font-size="11">{escape(label)}</text>')
    else:
        for t in pretty_breaks(c.x0, c.x1, 5):
            if c.x0 - 1e-9 <= t <= c.x1 + 1e-9:
                x = c.px(t)
                out.append(f'<line class="tick" x1="{_fmt(x)}" y1="{bottom}" x2="{_fmt(x)}" '
                           f'y2="{bottom + 5}" stroke="black"/>')
                out.append(f'<text class="tick-label" x="{_fmt(x)}" y="{bottom + 18}" '
                           f'text-anchor="middle" font-size="11">{_tick_label(t)}</text>')
    for t in pretty_breaks(c.y0, c.y1, 5):
        if c.y0 - 1e-9 <= t <= c.y1 + 1e-9:
            y = c.py(t)
            out.append(f'<line class="tick" x1="{c.left - 5}" y1="{_fmt(y)}" x2="{c.left}" '
                       f'y2="{_fmt(y)}" stroke="black"/>')
            out.append(f'<text class="tick-label" x="{c.left - 8}" y="{_fmt(y + 4)}" '
                       f'text-anchor="end" font-size="11">{_tick_label(t)}</text>')
    if spec.x_label:
        out.append(f'<text class="axis-label" x="{_fmt(c.left + c.w / 2)}" y="{spec.height - 15}" '
                   f'text-anchor="middle" font-size="13">{escape(spec.x_label)}</text>')
    if spec.y_label:
        y_mid = _fmt(c.top + c.h / 2)
        out.append(f'<text class="axis-label" x="18" y="{y_mid}" text-anchor="middle" '
                   f'font-size="13" transform="rotate(-90 18 {y_mid})">{escape(spec.y_label)}</text>')
    return out


def _category_positions(spec: PlotSpec) -> List[Tuple[str, float]]:
    c = _Canvas(spec)
    if spec.kind == "boxplot":
        return [(label, c.px(i + 1.0)) for i, label in enumerate(spec.categories)]
    rects = spec.layers[0].rects if spec.layers else ()
    labels = spec.layers[0].rect_labels if spec.layers else ()
    spans: Dict[str, Tuple[float, float]] = {}
    for (x0, _, x1, _), label in zip(rects, labels):
        row = label.split(" / ")[0]
        lo, hi = spans.get(row, (x0, x1))
        spans[row] = (min(lo, x0), max(hi, x1))
    return [(row, c.px((lo + hi) / 2)) for row, (lo, hi) in spans.items()]


def _layer(c: _Canvas, layer: Layer, index: int) -> List[str]:
    color = _PALETTE[index % len(_PALETTE)]
    if layer.kind == "points":
        return [f'<circle class="point" cx="{_fmt(c.px(x))}" cy="{_fmt(c.py(y))}" r="4" '
                f'fill="{_PALETTE[0]}"/>' for x, y in zip(layer.xs, layer.ys)]
    if layer.kind == "line":
        dash = ' stroke-dasharray="8,4"' if layer.dashed else ""
        return [f'<path class="curve" d="{_path(c, layer.xs, layer.ys)}" fill="none" '
                f'stroke="{color}" stroke-width="2"{dash}/>']
    if layer.kind == "bars":
        out = []
        for i, h in enumerate(layer.ys):
            x0, x1 = c.px(layer.xs[i]), c.px(layer.xs[i + 1])
            top, base = c.py(h), c.py(0.0)
            out.append(f'<rect class="bar" x="{_fmt(x0)}" y="{_fmt(top)}" width="{_fmt(x1 - x0)}" '
                       f'height="{_fmt(base - top)}" fill="#d9d9d9" stroke="black"/>')
        return out
    if layer.kind == "rects":
        out = []
        for (x0, y0, x1, y1), label in zip(layer.rects, layer.rect_labels):
            out.append(f'<rect class="cell" x="{_fmt(c.px(x0))}" y="{_fmt(c.py(y1))}" '
                       f'width="{_fmt(c.px(x1) - c.px(x0))}" height="{_fmt(c.py(y0) - c.py(y1))}" '
                       f'fill="#d9d9d9" stroke="white" stroke-width="2">'
                       f'<title>{escape(label)}</title></rect>')
        return out
    if layer.kind == "box" and layer.box is not None:
        b = layer.box
        position = 1.0 + c.spec.categories.index(b.label)
        cx = c.px(position)
        half = 0.25 * c.w / max(len(c.spec.categories), 1)
        out = [
            f'<rect class="box" x="{_fmt(cx - half)}" y="{_fmt(c.py(b.upper_hinge))}" '
            f'width="{_fmt(2 * half)}" height="{_fmt(c.py(b.lower_hinge) - c.py(b.upper_hinge))}" '
            f'fill="#d9d9d9" stroke="black"/>',
            f'<line class="median" x1="{_fmt(cx - half)}" y1="{_fmt(c.py(b.median))}" '
            f'x2="{_fmt(cx + half)}" y2="{_fmt(c.py(b.median))}" stroke="black" stroke-width="3"/>',
            f'<line class="whisker" x1="{_fmt(cx)}" y1="{_fmt(c.py(b.upper_hinge))}" '
            f'x2="{_fmt(cx)}" y2="{_fmt(c.py(b.upper_whisker))}" stroke="black" stroke-dasharray="4,3"/>',
            f'<line class="whisker" x1="{_fmt(cx)}" y1="{_fmt(c.py(b.lower_hinge))}" '
            f'x2="{_fmt(cx)}" y2="{_fmt(c.py(b.lower_whisker))}" stroke="black" stroke-dasharray="4,3"/>',
        ]
        out.extend(f'<circle class="outlier" cx="{_fmt(cx)}" cy="{_fmt(c.py(v))}" r="3" '
                   f'fill="none" stroke="black"/>' for v in b.outliers)
        return out
    raise ValueError(f"unknown layer kind {layer.kind!r}")


def _legend(c: _Canvas, spec: PlotSpec) -> List[str]:
    out = []
    x, y = c.left + c.w - 150, c.top + 20
    lines = spec.layers_of("line")
    for i, name in enumerate(spec.legend):
        index = spec.layers.index(lines[i]) if i < len(lines) else i
        dash = ' stroke-dasharray="8,4"' if i < len(lines) and lines[i].dashed else ""
        row_y = y + 20 * i
        out.append(f'<line class="legend-key" x1="{x}" y1="{row_y}" x2="{x + 30}" y2="{row_y}" '
                   f'stroke="{_PALETTE[index % len(_PALETTE)]}" stroke-width="2"{dash}/>')
        out.append(f'<text class="legend" x="{x + 38}" y="{row_y + 4}" font-size="12">'
                   f'{escape(name)}</text>')
    return out


def render_svg(spec: PlotSpec, destination: IO[str]) -> None:
    destination.write(svg_document(spec))


# ---------------------------------------------------------------------------
# text report

def _num(v: Optional[float], digits: int = 7) -> str:
    if v is None:
        return "NA"
    if math.isinf(v):
        return "Inf" if v > 0 else "-Inf"
    return f"{v:.{digits}g}"


def _p(p: float) -> str:
    return "< 2.2e-16" if p < 2.2e-16 else f"{p:.4g}"


def _summary_block(name: str, s: Optional[SummaryStats]) -> List[str]:
    if s is None:
        return [f"{name}: no rows"]
    return [f"{name} (n = {s.n})",
            "   Min. 1st Qu.  Median    Mean 3rd Qu.    Max.",
            "  ".join(f"{v:6.4g}" for v in (s.min, s.q1, s.median, s.mean, s.q3, s.max)),
            f"sd = {s.sd:.6g}"]


def _table_block(title: str, table: Mapping) -> List[str]:
    if not table:
        return [f"{title}: no rows"]
    keys = [str(k) for k in table]
    width = max(max(len(k) for k in keys), max(len(str(v)) for v in table.values()))
    return [title, " ".join(k.rjust(width) for k in keys),
            " ".join(str(v).rjust(width) for v in table.values())]


def _ttest_block(name: str, t: TTestResult) -> List[str]:
    a, b = t.group_labels
    return [
        f"Welch Two Sample t-test: ln k by {name}",
        f"t = {t.t:.5g}, df = {t.df:.5g}, p-value = {_p(t.p)}",
        f"alternative hypothesis: true difference in means between group {a} and group {b} "
        "is not equal to 0",
        f"{round(100 * t.confidence)} percent confidence interval:",
        f" {t.ci_low:.7f} {t.ci_high:.7f}",
        "sample estimates:",
        f"mean in group {a} = {t.mean_a:.7g} (n = {t.n_a})",
        f"mean in group {b} = {t.mean_b:.7g} (n = {t.n_b})",
    ]


def _regression_block(r: RegressionResult, correlation: Optional[float]) -> List[str]:
    lines = [
        "Linear regression: ln k ~ age",
        "Coefficients:",
        "             Estimate  Std. Error  t value  Pr(>|t|)",
        f"(Intercept) {r.intercept:9.5f}  {r.se_intercept:10.5f}  {r.t_intercept:7.3f}  {_p(r.p_intercept)}",
        f"age         {r.slope:9.5f}  {r.se_slope:10.5f}  {r.t_slope:7.3f}  {_p(r.p_slope)}",
        f"Residual standard error: {r.residual_se:.4g} on {r.df_residual} degrees of freedom",
        f"Multiple R-squared: {r.r_squared:.4g}, Adjusted R-squared: {r.adj_r_squared:.4g}",
        f"F-statistic: {r.f_statistic:.4g} on 1 and {r.df_residual} DF, p-value: {_p(r.f_p_value)}",
        f"Confidence intervals ({round(100 * r.confidence)}%):",
        f"(Intercept) {r.ci['intercept'][0]:.8f} {r.ci['intercept'][1]:.8f}",
        f"age         {r.ci['slope'][0]:.8f} {r.ci['slope'][1]:.8f}",
    ]
    if correlation is not None:
        lines.append(f"Pearson correlation (age, ln k) = {correlation:.7g}")
    return lines


def _as_record(m) -> dict:
    """Metrics as a flat dict, from either fitted metrics or rows read from CSV."""
    return m.to_record() if hasattr(m, "to_record") else dict(vars(m))


def text_report(metrics: Sequence = (), stage2: Optional[Stage2Results] = None,
                screening=None, header: Optional[Mapping[str, object]] = None,
                warnings: Sequence[str] = ()) -> str:
    """Plain-text analysis report with one section per pipeline step."""
    lines: List[str] = ["Delay discounting analysis report", "=" * 33]
    if header:
        lines.append("Effective configuration:")
        lines.extend(f"  {k}: {v}" for k, v in header.items())
    if warnings:
        lines.append("Warnings:")
        lines.extend(f"  {w}" for w in warnings)

    lines += ["", "[Dataset]"]
    lines.append(f"participants: {len(metrics)}" if metrics else "no rows")

    lines += ["", "[Screening]"]
    if screening is None or not screening.jb_table:
        lines.append("no rows")
    else:
        source = "stored JBviol" if screening.stored_jb_present else "recomputed (no stored JBviol column)"
        lines += _table_block(f"JBviol ({source})", screening.jb_table)
        if screening.attention_present:
            lines += _table_block("ddattend", screening.attention_table)
            cross = screening.cross
            if cross is not None:
                lines.append("JBviol x ddattend")
                for r in cross.row_levels:
                    lines.append(f"  {r}: " + ", ".join(f"{c!r}={cross.count(r, c)}"
                                                        for c in cross.col_levels))
        else:
            lines.append("attention check: column absent")
        if screening.mismatched_ids:
            lines.append("stored vs recomputed JBviol mismatch for ids: "
                         + ", ".join(screening.mismatched_ids))

    lines += ["", "[Stage 1]"]
    if not metrics:
        lines.append("no rows")
    else:
        records = [_as_record(m) for m in metrics]
        failed = [str(r["id"]) for r in records if not r["fit_converged"]]
        for name, key in (("k (Mazur)", "k_mazur"), ("ln k", "ln_k"), ("AUC", "auc"),
                          ("AUC (log delay)", "auc_log")):
            values = [r[key] for r in records if r[key] is not None and math.isfinite(r[key])]
            lines += _summary_block(name, summarize(values) if values else None)
        undefined = sum(1 for r in records if r["ln_k"] is None)
        if undefined:
            lines.append(f"ln k undefined (k = 0) for {undefined} participant(s)")
        if failed:
            lines.append(f"fits flagged as not converged: {', '.join(failed)}")

    lines += ["", "[Stage 2]"]
    if stage2 is None or stage2.n_rows == 0:
        lines.append("no rows")
    else:
        lines.append(f"rows used: {stage2.n_used} of {stage2.n_rows}")
        lines += _table_block("gender", stage2.gender_counts)
        lines += _table_block("smoke_cigs", stage2.smoker_counts)
        lines += _summary_block("age", stage2.age_summary)
        lines += _summary_block("ln k", stage2.ln_k_summary)
        for name, test in (("gender", stage2.gender_test), ("smoking", stage2.smoker_test)):
            lines.append("")
            lines += _ttest_block(name, test) if test else [f"{name} comparison: not run"]
        lines.append("")
        if stage2.regression is not None:
            lines += _regression_block(stage2.regression, stage2.correlation)
        else:
            lines.append("regression: not run")
        for notice in stage2.notices:
            lines.append(f"notice: {notice}")
    return "\n".join(lines) + "\n"
