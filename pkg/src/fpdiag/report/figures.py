"""Figure emitters.

Every emitter returns an SVG document as a string.  Figures follow the same
small-multiple conventions: one panel (or bar) per country, countries grouped
by sub-region, one colour per sub-region, groups and countries ordered by a
statistic, and a shared scale unless the figure asks for per-panel scaling.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..compare import ComparisonRecord, Label, ResidualDiagnostic, ResidualSeries
from ..decomp import ortho_basis, reconstruct
from ..errors import EmptyInput, UnknownCountry
from ..features import GroupSummary
from ..ingest import Panel
from .svg import LinearScale, Svg, fmt, lighten, nice_ticks, padded, stack_labels

DEFAULT_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#e6ab02",
)
GREY = "#bdbdbd"
INK = "#222222"


class FigureKind(str, enum.Enum):
    STACKED_BARS = "STACKED_BARS"
    RATIO_SCATTER = "RATIO_SCATTER"
    TRAJECTORY_GRID = "TRAJECTORY_GRID"
    PARTITION = "PARTITION"
    SIL_SCATTER = "SIL_SCATTER"
    RESIDUAL_SCATTER = "RESIDUAL_SCATTER"
    RESIDUAL_PANELS = "RESIDUAL_PANELS"


class Ordering(str, enum.Enum):
    BY_GROUP_STAT_DESC = "BY_GROUP_STAT_DESC"
    BY_COUNTRY_STAT_DESC = "BY_COUNTRY_STAT_DESC"


class Scaling(str, enum.Enum):
    SHARED = "SHARED"
    PER_PANEL = "PER_PANEL"


@dataclass(frozen=True)
class FigureSpec:
    """Size, palette and layout options for one figure.

    Grid-like figures treat ``height_px`` as a minimum and grow to fit
    their panels.
    """

    kind: FigureKind
    width_px: int = 1000
    height_px: int = 700
    palette: tuple[str, ...] = DEFAULT_PALETTE
    ordering: Ordering = Ordering.BY_GROUP_STAT_DESC
    scaling: Scaling = Scaling.SHARED

    def colors(self, groups: Iterable[str]) -> dict[str, str]:
        """One colour per group, assigned in sorted group-name order."""
        return {g: self.palette[k % len(self.palette)] for k, g in enumerate(sorted(set(groups)))}


DEFAULT_SPECS = {
    FigureKind.STACKED_BARS: FigureSpec(FigureKind.STACKED_BARS, 1200, 1400),
    FigureKind.RATIO_SCATTER: FigureSpec(FigureKind.RATIO_SCATTER, 900, 600),
    FigureKind.TRAJECTORY_GRID: FigureSpec(
        FigureKind.TRAJECTORY_GRID, 1100, 400, ordering=Ordering.BY_COUNTRY_STAT_DESC,
        scaling=Scaling.PER_PANEL,
    ),
    FigureKind.PARTITION: FigureSpec(FigureKind.PARTITION, 900, 600),
    FigureKind.SIL_SCATTER: FigureSpec(FigureKind.SIL_SCATTER, 750, 750),
    FigureKind.RESIDUAL_SCATTER: FigureSpec(FigureKind.RESIDUAL_SCATTER, 800, 650),
    FigureKind.RESIDUAL_PANELS: FigureSpec(
        FigureKind.RESIDUAL_PANELS, 1100, 420, ordering=Ordering.BY_COUNTRY_STAT_DESC,
        scaling=Scaling.PER_PANEL,
    ),
}


def default_spec(kind: FigureKind) -> FigureSpec:
    return DEFAULT_SPECS[FigureKind(kind)]


# --------------------------------------------------------------------------
# shared layout helpers


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float


def grid_layout(n: int, ncol: int, width: float, panel_h: float, top: float = 40.0,
                left: float = 20.0, right: float = 20.0, gap: float = 12.0) -> list[Box]:
    """Panel boxes for ``n`` panels filled row by row."""
    panel_w = (width - left - right - gap * (ncol - 1)) / ncol
    return [
        Box(left + (k % ncol) * (panel_w + gap), top + (k // ncol) * (panel_h + gap), panel_w, panel_h)
        for k in range(n)
    ]


# inner plotting area of a panel box (room for tick labels and a title)
PANEL_PAD = (34.0, 8.0, 18.0, 20.0)  # left, right, top, bottom


def inner(box: Box) -> Box:
    l, r, t, b = PANEL_PAD
    return Box(box.x + l, box.y + t, box.w - l - r, box.h - t - b)


def _names(names, code):
    return (names or {}).get(code, code)


def _axes(svg: Svg, area: Box, xs: LinearScale, ys: LinearScale, xticks, yticks,
          xlabel: str = "", ylabel: str = "", size: int = 9, xfmt=None, yfmt=None):
    xfmt = xfmt or (lambda v: f"{v:g}")
    yfmt = yfmt or (lambda v: f"{v:g}")
    svg.rect(area.x, area.y, area.w, area.h, fill="none", stroke="#cccccc", stroke_width=0.8)
    for t in yticks:
        y = ys(t)
        svg.line(area.x, y, area.x + area.w, y, stroke="#eeeeee", width=0.6)
        svg.text(area.x - 3, y + 3, yfmt(t), size=size, anchor="end", fill="#555555")
    for t in xticks:
        x = xs(t)
        svg.line(x, area.y + area.h, x, area.y + area.h + 3, stroke="#888888", width=0.6)
        svg.text(x, area.y + area.h + 3 + size, xfmt(t), size=size, anchor="middle", fill="#555555")
    if xlabel:
        svg.text(area.x + area.w / 2, area.y + area.h + 2.6 * size + 6, xlabel, size=size + 2, anchor="middle")
    if ylabel:
        svg.text(area.x - 42, area.y + area.h / 2, ylabel, size=size + 2, anchor="middle", rotate=-90)


def _labels(svg: Svg, items, size=10):
    for x, y, text in stack_labels(items):
        svg.text(x, y, text, size=size, fill=INK, class_="label")


def _year_ticks(lo: int, hi: int) -> list[int]:
    step = 10 if hi - lo > 25 else 5
    return [y for y in range(math.ceil(lo / step) * step, hi + 1, step)]


# --------------------------------------------------------------------------
# stacked bars


def latest_totals(modern: Panel, traditional: Optional[Panel] = None) -> dict[str, float]:
    """Modern + traditional use at each country's most recent survey year."""
    out = {}
    for code in modern.countries:
        year, value = modern.series[code][-1]
        trad = traditional.as_dict(code).get(year, 0.0) if traditional and code in traditional else 0.0
        out[code] = value + trad
    return out


def order_groups(values: Mapping[str, float], grouping) -> list[tuple[str, float, list[str]]]:
    """Groups by descending mean value, countries inside by descending value.

    Ties fall back to the group name / country code.
    """
    by_group: dict[str, list[str]] = defaultdict(list)
    for code in values:
        by_group[grouping.group_of(code)].append(code)
    blocks = []
    for g, codes in by_group.items():
        codes.sort(key=lambda c: (-values[c], c))
        blocks.append((g, float(np.mean([values[c] for c in codes])), codes))
    blocks.sort(key=lambda b: (-b[1], b[0]))
    return blocks


def emit_stacked_bars(modern: Panel, traditional: Optional[Panel], spec: Optional[FigureSpec] = None,
                      names: Optional[Mapping[str, str]] = None,
                      colors: Optional[Mapping[str, str]] = None) -> str:
    spec = spec or default_spec(FigureKind.STACKED_BARS)
    if not len(modern):
        raise EmptyInput("no countries to plot")
    colors = colors or spec.colors(modern.grouping.sub_regions())
    blocks = order_groups(latest_totals(modern, traditional), modern.grouping)

    ncol = max(1, min(6, int(spec.width_px // 180)))
    panel_h, header_h, top = 86.0, 20.0, 40.0
    n_rows = sum(math.ceil(len(c) / ncol) for _, _, c in blocks)
    height = max(spec.height_px, top + n_rows * (panel_h + 12) + len(blocks) * header_h + 20)
    svg = Svg(spec.width_px, height, "Modern and traditional contraceptive use by country")
    svg.text(20, 24, "Contraceptive use (%) at each survey: modern (dark) and traditional (light)", size=14)

    years = [y for c in modern.countries for y in modern.years(c)]
    x_lo, x_hi = min(years) - 1, max(years) + 1
    y_cursor = top
    for group, mean, codes in blocks:
        color = colors[group]
        svg.text(20, y_cursor + 14, f"{group} (mean {mean:.1f})", size=12, fill=color, class_="group-header",
                 data_group=group)
        y_cursor += header_h
        boxes = grid_layout(len(codes), ncol, spec.width_px, panel_h, top=y_cursor)
        for code, box in zip(codes, boxes):
            area = inner(box)
            xs = LinearScale((x_lo, x_hi), (area.x, area.x + area.w))
            ys = LinearScale((0.0, 100.0), (area.y + area.h, area.y))
            with svg.group(class_="panel", data_country=code, data_group=group):
                svg.text(area.x, box.y + 12, _names(names, code), size=10, fill=color)
                _axes(svg, area, xs, ys, _year_ticks(x_lo, x_hi), [0, 50, 100], size=7)
                bar_w = max(1.0, min(6.0, 0.8 * area.w / max(1, x_hi - x_lo)))
                trad = traditional.as_dict(code) if traditional is not None and code in traditional else {}
                for year, m in modern.series[code]:
                    x = xs(year) - bar_w / 2
                    svg.rect(x, ys(m), bar_w, ys(0) - ys(m), fill=color, class_="modern", data_year=year)
                    t = trad.get(year)
                    if t:
                        svg.rect(x, ys(m + t), bar_w, ys(m) - ys(m + t), fill=lighten(color),
                                 class_="traditional", data_year=year)
        y_cursor = boxes[-1].y + panel_h + 12
    return svg.render()


# --------------------------------------------------------------------------
# scatter plots


def _scatter_frame(spec: FigureSpec, title: str):
    svg = Svg(spec.width_px, spec.height_px, title)
    svg.text(20, 24, title, size=14)
    area = Box(70, 45, spec.width_px - 70 - 200, spec.height_px - 45 - 60)
    return svg, area


def _legend(svg: Svg, x: float, y: float, colors: Mapping[str, str], groups: Iterable[str]):
    used = sorted(set(groups))
    for k, g in enumerate(used):
        svg.circle(x + 5, y + k * 15 - 3, 4, fill=colors[g])
        svg.text(x + 14, y + k * 15, g, size=10)


def emit_ratio_scatter(records: Sequence[ComparisonRecord], spec: Optional[FigureSpec] = None,
                       names: Optional[Mapping[str, str]] = None,
                       colors: Optional[Mapping[str, str]] = None) -> str:
    spec = spec or default_spec(FigureKind.RATIO_SCATTER)
    recs = [r for r in records if r.ratio is not None]
    if not recs:
        raise EmptyInput("no records with a defined ratio")
    colors = colors or spec.colors(r.group for r in recs)
    svg, area = _scatter_frame(spec, "Model-to-survey trend strength ratio vs survey trend strength")
    xs = LinearScale((0.0, 1.0), (area.x, area.x + area.w))
    y_lo, y_hi = padded(min(1.0, min(r.ratio for r in recs)), max(1.0, max(r.ratio for r in recs)))
    ys = LinearScale((y_lo, y_hi), (area.y + area.h, area.y))
    _axes(svg, area, xs, ys, nice_ticks(0, 1), nice_ticks(y_lo, y_hi), "Survey trend strength",
          "Model / survey trend strength")
    svg.line(area.x, ys(1.0), area.x + area.w, ys(1.0), stroke="#444444", width=1.0,
             stroke_dasharray="4 3", class_="reference")
    labels = []
    for r in recs:
        cx, cy = xs(r.survey_metric), ys(r.ratio)
        svg.circle(cx, cy, 4, fill=colors[r.group], class_="point", data_country=r.country_code)
        if Label.TOP_RATIO in r.labels:
            labels.append((cx + 6, cy - 4, _names(names, r.country_code)))
    _labels(svg, labels)
    _legend(svg, area.x + area.w + 20, area.y + 10, colors, (r.group for r in recs))
    return svg.render()


def emit_sil_scatter(records: Sequence[ComparisonRecord], spec: Optional[FigureSpec] = None,
                     names: Optional[Mapping[str, str]] = None,
                     colors: Optional[Mapping[str, str]] = None) -> str:
    spec = spec or default_spec(FigureKind.SIL_SCATTER)
    if not records:
        raise EmptyInput("no silhouette records")
    colors = colors or spec.colors(r.group for r in records)
    svg, area = _scatter_frame(spec, "Model vs survey silhouette width")
    xs = LinearScale((-1.0, 1.0), (area.x, area.x + area.w))
    ys = LinearScale((-1.0, 1.0), (area.y + area.h, area.y))
    ticks = nice_ticks(-1, 1, 4)
    _axes(svg, area, xs, ys, ticks, ticks, "Survey silhouette width", "Model silhouette width")
    svg.line(xs(-1), ys(-1), xs(1), ys(1), stroke="#444444", width=1.0, stroke_dasharray="4 3",
             class_="identity")
    labels = []
    for r in records:
        cx, cy = xs(r.survey_metric), ys(r.model_metric)
        svg.circle(cx, cy, 4, fill=colors[r.group], class_="point", data_country=r.country_code)
        if r.labels & {Label.TOP_ABS_SIL_DIFF, Label.TOP_SURVEY_SIL}:
            labels.append((cx + 6, cy - 4, _names(names, r.country_code)))
    _labels(svg, labels)
    _legend(svg, area.x + area.w + 20, area.y + 10, colors, (r.group for r in records))
    return svg.render()


# --------------------------------------------------------------------------
# trajectories


def _extent(values: Iterable[float]) -> tuple[float, float]:
    vals = list(values)
    return min(vals), max(vals)


def emit_trajectory_grid(survey: Panel, model: Panel, countries: Sequence[str],
                         spec: Optional[FigureSpec] = None,
                         highlight: Optional[Mapping[str, str]] = None,
                         names: Optional[Mapping[str, str]] = None,
                         colors: Optional[Mapping[str, str]] = None,
                         notes: Optional[Mapping[str, str]] = None,
                         title: str = "Survey observations (points) and model trajectories (lines)") -> str:
    """One panel per country, in the given order.

    With ``highlight`` a country is drawn in its highlight colour and the
    model trajectories of its group-mates appear in grey behind it.
    """
    spec = spec or default_spec(FigureKind.TRAJECTORY_GRID)
    countries = list(countries)
    if not countries:
        raise EmptyInput("no countries requested")
    for c in countries:
        if c not in survey and c not in model:
            raise UnknownCountry(c)
    highlight = highlight or {}
    grouping = survey.grouping
    colors = colors or spec.colors(grouping.sub_regions())

    def mates(code):
        if code not in highlight:
            return []
        g = grouping.group_of(code)
        return [m for m in model.countries if m != code and grouping.get(m) and grouping.group_of(m) == g]

    def panel_points(code):
        pts = list(survey.series.get(code, ())) + list(model.series.get(code, ()))
        for m in mates(code):
            pts += list(model.series[m])
        return pts

    if spec.scaling is Scaling.SHARED:
        allpts = [p for c in countries for p in panel_points(c)]
        shared = (_extent(p[0] for p in allpts), padded(*_extent(p[1] for p in allpts)))

    ncol = min(5, len(countries))
    panel_h = 170.0
    boxes = grid_layout(len(countries), ncol, spec.width_px, panel_h)
    height = max(spec.height_px, boxes[-1].y + panel_h + 20)
    svg = Svg(spec.width_px, height, title)
    svg.text(20, 24, title, size=14)
    for code, box in zip(countries, boxes):
        area = inner(box)
        if spec.scaling is Scaling.SHARED:
            (x_lo, x_hi), (y_lo, y_hi) = shared
        else:
            pts = panel_points(code)
            (x_lo, x_hi), (y_lo, y_hi) = _extent(p[0] for p in pts), padded(*_extent(p[1] for p in pts))
        xs = LinearScale((x_lo - 0.5, x_hi + 0.5), (area.x, area.x + area.w))
        ys = LinearScale((y_lo, y_hi), (area.y + area.h, area.y))
        group = grouping.group_of(code)
        color = highlight.get(code, colors[group])
        with svg.group(class_="panel", data_country=code):
            svg.text(area.x, box.y + 12, _names(names, code), size=11, fill=color)
            if notes and code in notes:
                svg.text(area.x + area.w - 4, area.y + area.h - 5, notes[code], size=9, anchor="end",
                         fill="#555555", class_="note")
            _axes(svg, area, xs, ys, _year_ticks(int(x_lo), int(x_hi)), nice_ticks(y_lo, y_hi, 4), size=8)
            for m in mates(code):
                svg.polyline([(xs(y), ys(v)) for y, v in model.series[m]], stroke=GREY, width=1.0,
                             class_="mate", data_country=m)
            if code in model:
                svg.polyline([(xs(y), ys(v)) for y, v in model.series[code]], stroke=color, width=1.8,
                             class_="model")
            for y, v in survey.series.get(code, ()):
                svg.circle(xs(y), ys(v), 2.8, fill=INK if code not in highlight else color,
                           class_="survey", data_year=y)
    return svg.render()


# --------------------------------------------------------------------------
# partition plot


@dataclass(frozen=True)
class PartitionBlock:
    group: str
    mean_value: Optional[float]
    members: tuple[tuple[str, float], ...]


def partition_order(items: Iterable, group_means: Sequence[GroupSummary], exclude_singletons: bool = True):
    """Order countries for a partition plot.

    ``items`` are SilhouetteResult-like (``country_code``, ``group``, ``s``).
    Returns ``(blocks, excluded_codes)``; groups follow ``group_means`` order
    and countries inside a group sort by descending value.
    """
    by_group: dict[str, list[tuple[str, float]]] = defaultdict(list)
    for it in items:
        by_group[it.group].append((it.country_code, it.s))
    means = {g.group: g for g in group_means}
    missing = set(by_group) - set(means)
    if missing:
        raise ValueError(f"no group mean for {sorted(missing)}")
    blocks, excluded = [], []
    for summary in group_means:
        members = by_group.get(summary.group)
        if not members:
            continue
        if exclude_singletons and len(members) == 1:
            excluded.append(members[0][0])
            continue
        members.sort(key=lambda m: (-m[1], m[0]))
        blocks.append(PartitionBlock(summary.group, summary.mean_value, tuple(members)))
    return blocks, sorted(excluded)


def emit_partition_plot(silhouettes: Iterable, group_means: Sequence[GroupSummary],
                        spec: Optional[FigureSpec] = None,
                        names: Optional[Mapping[str, str]] = None,
                        colors: Optional[Mapping[str, str]] = None,
                        title: str = "Silhouette width by country, grouped by sub-region",
                        exclude_singletons: bool = True) -> str:
    spec = spec or default_spec(FigureKind.PARTITION)
    blocks, _ = partition_order(silhouettes, group_means, exclude_singletons)
    colors = colors or spec.colors(b.group for b in blocks)
    row_h, gap, top, left, right = 14.0, 10.0, 50.0, 190.0, 200.0
    n_rows = sum(len(b.members) for b in blocks)
    height = max(spec.height_px, top + n_rows * row_h + len(blocks) * gap + 60)
    svg = Svg(spec.width_px, height, title)
    svg.text(20, 24, title, size=14)
    area = Box(left, top, spec.width_px - left - right, height - top - 50)
    xs = LinearScale((-1.0, 1.0), (area.x, area.x + area.w))
    for t in nice_ticks(-1, 1, 4):
        svg.line(xs(t), area.y, xs(t), area.y + area.h, stroke="#eeeeee", width=0.6)
        svg.text(xs(t), area.y + area.h + 14, f"{t:g}", size=9, anchor="middle", fill="#555555")
    svg.line(xs(0), area.y, xs(0), area.y + area.h, stroke="#666666", width=1.0, class_="zero")
    svg.text(area.x + area.w / 2, area.y + area.h + 32, "Silhouette width", size=11, anchor="middle")

    y = top
    for block in blocks:
        color = colors[block.group]
        block_h = len(block.members) * row_h
        with svg.group(class_="group", data_group=block.group):
            if block.mean_value is not None:
                svg.rect(xs(0), y, xs(block.mean_value) - xs(0), block_h, fill=lighten(color, 0.75),
                         class_="group-mean")
            label = block.group if block.mean_value is None else f"{block.group} ({fmt(block.mean_value)})"
            svg.text(area.x + area.w + 8, y + block_h / 2 + 4, label, size=10, fill=color)
            for k, (code, value) in enumerate(block.members):
                ry = y + k * row_h
                svg.rect(xs(0), ry + 2, xs(value) - xs(0), row_h - 4, fill=color, class_="bar",
                         data_country=code)
                svg.text(area.x - 6, ry + row_h - 3, _names(names, code), size=9, anchor="end", fill=color)
        y += block_h + gap
    return svg.render()


# --------------------------------------------------------------------------
# residual figures


def quadratic_overlay(years: Sequence[float], beta1: float, beta2: float, intercept: float = 0.0) -> np.ndarray:
    """Quadratic fit implied by the coefficients, at the given years."""
    return reconstruct(ortho_basis(years), beta1, beta2, intercept)


def _dense_quadratic(years, values_at_years, n=40):
    t = np.asarray(years, dtype=float)
    c = np.polyfit(t - t.mean(), values_at_years, 2)
    grid = np.linspace(t.min(), t.max(), n)
    return grid, np.polyval(c, grid - t.mean())


def residual_panel_order(diagnostics: Iterable[ResidualDiagnostic], extra: Iterable[str] = ()) -> list[str]:
    """Labelled countries by descending max(|beta1|, |beta2|), then any extras."""
    labelled = [d for d in diagnostics if Label.NONZERO_RESIDUAL_SHAPE in d.labels]
    labelled.sort(key=lambda d: (-max(abs(d.beta1), abs(d.beta2)), d.country_code))
    order = [d.country_code for d in labelled]
    order += [c for c in extra if c not in order]
    return order


def emit_residual_figures(diagnostics: Sequence[ResidualDiagnostic], residuals: Sequence[ResidualSeries],
                          survey_panel: Panel, model_panel: Panel,
                          spec: Optional[FigureSpec] = None,
                          names: Optional[Mapping[str, str]] = None,
                          colors: Optional[Mapping[str, str]] = None,
                          scale: float = 0.01,
                          extra: Iterable[str] = (),
                          scatter_spec: Optional[FigureSpec] = None) -> tuple[str, str]:
    """Residual curvature-vs-linearity scatter and the per-country residual panels."""
    diagnostics = list(diagnostics)
    if not diagnostics:
        raise EmptyInput("no residual diagnostics")
    grouping = survey_panel.grouping
    colors = colors or (spec or default_spec(FigureKind.RESIDUAL_SCATTER)).colors(grouping.sub_regions())
    defined = [d for d in diagnostics if d.beta1 is not None]

    sspec = scatter_spec or (spec if spec is not None and spec.kind is FigureKind.RESIDUAL_SCATTER
                             else default_spec(FigureKind.RESIDUAL_SCATTER))
    svg, area = _scatter_frame(sspec, "Residual curvature vs linearity")
    lim = max([abs(d.beta1) for d in defined] + [abs(d.beta2) for d in defined] + [0.01]) * 1.1
    xs = LinearScale((-lim, lim), (area.x, area.x + area.w))
    ys = LinearScale((-lim, lim), (area.y + area.h, area.y))
    ticks = nice_ticks(-lim, lim, 4)
    _axes(svg, area, xs, ys, ticks, ticks, "Linearity", "Curvature")
    svg.line(xs(0), area.y, xs(0), area.y + area.h, stroke="#666666", width=1.0, class_="zero")
    svg.line(area.x, ys(0), area.x + area.w, ys(0), stroke="#666666", width=1.0, class_="zero")
    labels = []
    for d in defined:
        g = grouping.group_of(d.country_code)
        cx, cy = xs(d.beta1), ys(d.beta2)
        svg.circle(cx, cy, 4, fill=colors[g], class_="point", data_country=d.country_code)
        if Label.NONZERO_RESIDUAL_SHAPE in d.labels:
            labels.append((cx + 6, cy - 4, _names(names, d.country_code)))
    _labels(svg, labels)
    _legend(svg, area.x + area.w + 20, area.y + 10, colors, (grouping.group_of(d.country_code) for d in defined))
    scatter = svg.render()

    pspec = spec if spec is not None and spec.kind is FigureKind.RESIDUAL_PANELS else default_spec(
        FigureKind.RESIDUAL_PANELS)
    res = {r.country_code: r for r in residuals}
    diag = {d.country_code: d for d in diagnostics}
    order = [c for c in residual_panel_order(diagnostics, extra) if c in res]
    ncol = max(1, min(len(order), int(pspec.width_px // 180)))
    width = pspec.width_px
    panel_h, band_gap = 150.0, 24.0
    n_bands = max(1, math.ceil(len(order) / ncol))
    height = max(pspec.height_px, 40 + n_bands * (2 * (panel_h + 12) + band_gap) + 20)
    title = "Residuals with quadratic fit (upper) and survey vs model (lower)"
    svg = Svg(width, height, title)
    svg.text(20, 24, title, size=14)
    if not order:
        svg.text(20, 60, "no countries with non-zero residual shape", size=12)
        return scatter, svg.render()
    top_row, bottom_row = [], []
    for b in range(n_bands):
        chunk = order[b * ncol:(b + 1) * ncol]
        y0 = 40 + b * (2 * (panel_h + 12) + band_gap)
        top_row += grid_layout(len(chunk), ncol, width, panel_h, top=y0)
        bottom_row += grid_layout(len(chunk), ncol, width, panel_h, top=y0 + panel_h + 12)
    for code, tbox, bbox in zip(order, top_row, bottom_row):
        color = colors[grouping.group_of(code)]
        r, d = res[code], diag.get(code)
        years, vals = r.years, r.values
        # residual panel
        area = inner(tbox)
        pts = [(y, v) for y, v in zip(years, vals)]
        curve = None
        if d is not None and d.beta1 is not None:
            fit = quadratic_overlay(years, d.beta1, d.beta2, float(np.mean(vals)) * scale) / scale
            curve = _dense_quadratic(years, fit)
            pts += list(zip(curve[0], curve[1]))
        x_lo, x_hi = _extent(p[0] for p in pts)
        y_lo, y_hi = padded(*_extent([p[1] for p in pts] + [0.0]))
        xs = LinearScale((x_lo - 0.5, x_hi + 0.5), (area.x, area.x + area.w))
        ys = LinearScale((y_lo, y_hi), (area.y + area.h, area.y))
        with svg.group(class_="residual-panel", data_country=code):
            svg.text(area.x, tbox.y + 12, _names(names, code), size=11, fill=color)
            if d is not None and d.beta1 is not None:
                svg.text(area.x + area.w - 4, area.y + 10, f"lin {d.beta1:.3f} curv {d.beta2:.3f}", size=8,
                         anchor="end", fill="#555555", class_="note")
            _axes(svg, area, xs, ys, _year_ticks(int(x_lo), int(x_hi)), nice_ticks(y_lo, y_hi, 4), size=8)
            svg.line(area.x, ys(0), area.x + area.w, ys(0), stroke="#888888", width=0.8, stroke_dasharray="3 3")
            if curve is not None:
                svg.polyline([(xs(x), ys(v)) for x, v in zip(*curve)], stroke=color, width=1.6, class_="quadratic")
            for y, v in zip(years, vals):
                svg.circle(xs(y), ys(v), 2.8, fill=INK, class_="residual", data_year=y)
        # data and model panel
        area = inner(bbox)
        s_pts = list(survey_panel.series.get(code, ()))
        lo_year = min(years)
        m_pts = [p for p in model_panel.series.get(code, ()) if lo_year <= p[0] <= max(years)]
        both = s_pts + m_pts
        x_lo, x_hi = _extent(p[0] for p in both)
        y_lo, y_hi = padded(*_extent(p[1] for p in both))
        xs = LinearScale((x_lo - 0.5, x_hi + 0.5), (area.x, area.x + area.w))
        ys = LinearScale((y_lo, y_hi), (area.y + area.h, area.y))
        with svg.group(class_="data-panel", data_country=code):
            _axes(svg, area, xs, ys, _year_ticks(int(x_lo), int(x_hi)), nice_ticks(y_lo, y_hi, 4), size=8)
            svg.polyline([(xs(y), ys(v)) for y, v in m_pts], stroke=color, width=1.8, class_="model")
            for y, v in s_pts:
                svg.circle(xs(y), ys(v), 2.8, fill=INK, class_="survey", data_year=y)
    return scatter, svg.render()
