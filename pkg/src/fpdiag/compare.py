"""Survey-versus-model comparison: trend-strength ratios, silhouette deltas, residuals."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Optional

from .decomp import DEFAULT_SPAN, MIN_DECOMP_POINTS
from .errors import TooShort
from .features import (
    Exclusion,
    Reason,
    SilhouetteResult,
    linearity_curvature,
    trend_strength,
)
from .ingest import GroupingMap, Panel


class Label(str, enum.Enum):
    TOP_RATIO = "TOP_RATIO"
    TOP_ABS_SIL_DIFF = "TOP_ABS_SIL_DIFF"
    TOP_SURVEY_SIL = "TOP_SURVEY_SIL"
    NONZERO_RESIDUAL_SHAPE = "NONZERO_RESIDUAL_SHAPE"


@dataclass(frozen=True)
class ResidualSeries:
    """Survey minus model at every survey year the model also covers."""

    country_code: str
    points: tuple[tuple[int, float], ...]

    @property
    def years(self) -> list[int]:
        return [y for y, _ in self.points]

    @property
    def values(self) -> list[float]:
        return [r for _, r in self.points]


@dataclass(frozen=True)
class ComparisonRecord:
    country_code: str
    group: str
    survey_metric: float
    model_metric: float
    ratio: Optional[float] = None
    diff: Optional[float] = None
    labels: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class ResidualDiagnostic:
    country_code: str
    beta1: Optional[float]
    beta2: Optional[float]
    smoothed: bool
    n_points: int
    labels: frozenset = field(default_factory=frozenset)


def align_residuals(survey_panel: Panel, model_panel: Panel, stage: str = "compare"):
    """Pair each survey country with the model.

    Returns ``(residual_series, exclusions)``; countries without any common
    year land in ``exclusions`` rather than disappearing.
    """
    out, missing = [], []
    for code in survey_panel.countries:
        if code not in model_panel:
            missing.append(Exclusion(code, stage, Reason.MISSING_MODEL, "no model series"))
            continue
        model = model_panel.as_dict(code)
        pts = tuple((y, v - model[y]) for y, v in survey_panel.series[code] if y in model)
        if not pts:
            missing.append(Exclusion(code, stage, Reason.NO_OVERLAP, "no survey year covered by model"))
            continue
        out.append(ResidualSeries(code, pts))
    return out, missing


def _top(items, key, k):
    return [c for c, _ in sorted(items, key=key)[:k]]


def ratio_records(
    survey_ts: Mapping[str, Optional[float]],
    model_ts: Mapping[str, Optional[float]],
    grouping: GroupingMap,
    k: int = 10,
    stage: str = "compare",
):
    """Build TOP_RATIO-labelled records from precomputed trend strengths.

    Returns ``(records sorted by descending ratio, exclusions)``.
    """
    recs, excluded = [], []
    for code in sorted(survey_ts):
        s, m = survey_ts[code], model_ts.get(code)
        if m is None:
            reason = Reason.MISSING_MODEL if code not in model_ts else Reason.CONSTANT_SERIES
            excluded.append(Exclusion(code, stage, reason, "model trend strength undefined"))
            continue
        if s is None:
            excluded.append(Exclusion(code, stage, Reason.TOO_SHORT, "survey trend strength undefined"))
            continue
        if s <= 0:
            excluded.append(Exclusion(code, stage, Reason.ZERO_SURVEY_TREND, "survey trend strength is 0"))
            continue
        recs.append(ComparisonRecord(code, grouping.group_of(code), s, m, ratio=m / s))
    recs.sort(key=lambda r: (-r.ratio, r.country_code))
    top = {r.country_code for r in recs[:k]}
    recs = [_with_labels(r, {Label.TOP_RATIO} if r.country_code in top else set()) for r in recs]
    return recs, excluded


def _with_labels(rec, labels):
    return ComparisonRecord(
        rec.country_code, rec.group, rec.survey_metric, rec.model_metric, rec.ratio, rec.diff,
        frozenset(labels),
    )


def _safe_ts(series, span, min_points):
    try:
        return trend_strength(series, span, min_points)
    except TooShort:
        return None


def trend_strength_ratio(
    survey_panel: Panel,
    model_panel: Panel,
    k: int = 10,
    span: float = DEFAULT_SPAN,
    min_points: int = MIN_DECOMP_POINTS,
):
    """Model-to-survey trend-strength ratio for each survey country."""
    survey_ts = {c: _safe_ts(survey_panel.series[c], span, min_points) for c in survey_panel.countries}
    model_ts = {
        c: _safe_ts(model_panel.series[c], span, min_points)
        for c in survey_panel.countries
        if c in model_panel
    }
    return ratio_records(survey_ts, model_ts, survey_panel.grouping, k)


def silhouette_delta(
    survey_sil: Iterable[SilhouetteResult],
    model_sil: Iterable[SilhouetteResult],
    k: int = 3,
    countries: Optional[Iterable[str]] = None,
) -> list[ComparisonRecord]:
    """``model_s - survey_s`` per country, with the two label sets used for annotation.

    TOP_ABS_SIL_DIFF marks the k largest ``|diff|``; TOP_SURVEY_SIL marks the k
    highest survey widths among the remaining countries.  Ties go to the
    lower country code.
    """
    keep = None if countries is None else set(countries)
    model = {r.country_code: r for r in model_sil}
    recs = []
    for r in sorted(survey_sil, key=lambda r: r.country_code):
        if r.country_code not in model or (keep is not None and r.country_code not in keep):
            continue
        m = model[r.country_code]
        recs.append(ComparisonRecord(r.country_code, r.group, r.s, m.s, diff=m.s - r.s))

    by_diff = _top([(r.country_code, r) for r in recs], lambda t: (-abs(t[1].diff), t[0]), k)
    rest = [(r.country_code, r) for r in recs if r.country_code not in by_diff]
    by_survey = _top(rest, lambda t: (-t[1].survey_metric, t[0]), k)
    out = []
    for r in recs:
        labels = set()
        if r.country_code in by_diff:
            labels.add(Label.TOP_ABS_SIL_DIFF)
        if r.country_code in by_survey:
            labels.add(Label.TOP_SURVEY_SIL)
        out.append(_with_labels(r, labels))
    return out


def residual_diagnostics(
    residuals: Iterable[ResidualSeries],
    radius: float = 0.015,
    scale: float = 0.01,
    span: float = DEFAULT_SPAN,
    min_points: int = MIN_DECOMP_POINTS,
) -> list[ResidualDiagnostic]:
    """Linearity and curvature of each residual series.

    Residuals are multiplied by ``scale`` first (0.01 turns percentage points
    into proportions).  Series with fewer than three points get ``None``
    coefficients.  NONZERO_RESIDUAL_SHAPE marks countries where either
    coefficient exceeds ``radius`` in magnitude.
    """
    out = []
    for res in residuals:
        pts = [(y, r * scale) for y, r in res.points]
        try:
            b1, b2, smoothed = linearity_curvature(pts, span, min_points)
        except TooShort:
            out.append(ResidualDiagnostic(res.country_code, None, None, False, len(pts)))
            continue
        labels = {Label.NONZERO_RESIDUAL_SHAPE} if abs(b1) > radius or abs(b2) > radius else set()
        out.append(ResidualDiagnostic(res.country_code, b1, b2, smoothed, len(pts), frozenset(labels)))
    return out


@dataclass(frozen=True)
class ComparisonRow:
    """One line of the combined comparison table."""

    country_code: str
    group: str
    survey_ts: Optional[float]
    model_ts: Optional[float]
    ratio: Optional[float]
    survey_s: Optional[float]
    model_s: Optional[float]
    s_diff: Optional[float]
    res_beta1: Optional[float]
    res_beta2: Optional[float]
    labels: frozenset


def combine(
    countries: Iterable[str],
    grouping: GroupingMap,
    survey_ts: Mapping[str, Optional[float]],
    model_ts: Mapping[str, Optional[float]],
    ratios: Iterable[ComparisonRecord],
    sil_deltas: Iterable[ComparisonRecord],
    diagnostics: Iterable[ResidualDiagnostic],
) -> list[ComparisonRow]:
    ratio = {r.country_code: r for r in ratios}
    sil = {r.country_code: r for r in sil_deltas}
    diag = {d.country_code: d for d in diagnostics}
    rows = []
    for code in sorted(countries):
        r, s, d = ratio.get(code), sil.get(code), diag.get(code)
        labels = set()
        for part in (r, s, d):
            if part is not None:
                labels |= part.labels
        rows.append(
            ComparisonRow(
                code,
                grouping.group_of(code),
                survey_ts.get(code),
                model_ts.get(code),
                r.ratio if r else None,
                s.survey_metric if s else None,
                s.model_metric if s else None,
                s.diff if s else None,
                d.beta1 if d else None,
                d.beta2 if d else None,
                frozenset(labels),
            )
        )
    return rows
