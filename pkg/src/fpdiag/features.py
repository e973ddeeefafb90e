"""Diagnostic indices over a :class:`~fpdiag.ingest.Panel`.

Dissimilarities between two countries only use the calendar years in which
both were observed, so sparse survey panels yield a partially filled matrix.
"""

from __future__ import annotations

import enum
import logging
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .decomp import (
    DEFAULT_SPAN,
    MIN_DECOMP_POINTS,
    decompose,
    ortho_basis,
    poly_coeffs,
)
from .errors import TooShort
from .ingest import GroupingMap, Panel

logger = logging.getLogger(__name__)

VAR_EPS = 1e-12


class Metric(str, enum.Enum):
    TREND_STRENGTH = "TREND_STRENGTH"
    SILHOUETTE = "SILHOUETTE"
    LINEARITY = "LINEARITY"
    CURVATURE = "CURVATURE"
    AVG_DISSIM = "AVG_DISSIM"
    WITHIN_GROUP_DISSIM = "WITHIN_GROUP_DISSIM"


class Reason(str, enum.Enum):
    """Machine-readable reason codes for excluded or undefined results."""

    TOO_SHORT = "TOO_SHORT"
    CONSTANT_SERIES = "CONSTANT_SERIES"
    NO_WITHIN_GROUP_OVERLAP = "NO_WITHIN_GROUP_OVERLAP"
    NO_OTHER_GROUP_OVERLAP = "NO_OTHER_GROUP_OVERLAP"
    NO_OVERLAP = "NO_OVERLAP"
    MISSING_MODEL = "MISSING_MODEL"
    MISSING_SURVEY = "MISSING_SURVEY"
    ZERO_SURVEY_TREND = "ZERO_SURVEY_TREND"
    SINGLETON_GROUP = "SINGLETON_GROUP"


@dataclass(frozen=True)
class Exclusion:
    country_code: str
    stage: str
    reason: Reason
    detail: str = ""


@dataclass(frozen=True)
class FeatureRecord:
    country_code: str
    metric: Metric
    value: Optional[float]
    n_points: int


class Shape(NamedTuple):
    beta1: float
    beta2: float
    smoothed: bool  # False when fitted to raw values (series too short to decompose)


# --------------------------------------------------------------------------
# per-series indices


def trend_strength(series, span: float = DEFAULT_SPAN, min_points: int = MIN_DECOMP_POINTS) -> Optional[float]:
    """``max(0, 1 - Var(remainder) / Var(trend + remainder))``; None for a flat series."""
    dec = decompose(series, span, min_points)
    total = np.var(dec.trend + dec.remainder, ddof=1)
    if total < VAR_EPS:
        return None
    return max(0.0, 1.0 - float(np.var(dec.remainder, ddof=1) / total))


def linearity_curvature(series, span: float = DEFAULT_SPAN, min_points: int = MIN_DECOMP_POINTS) -> Shape:
    """Orthonormal linear/quadratic coefficients of the series' trend.

    Series shorter than ``min_points`` cannot be decomposed and are fitted on
    their raw values instead (``smoothed`` is False).
    """
    pts = list(series)
    years = [p[0] for p in pts]
    if len(set(years)) < 3:
        raise TooShort(len(set(years)), 3)
    if len(pts) >= min_points:
        component = decompose(pts, span, min_points).trend
        smoothed = True
    else:
        component = np.array([p[1] for p in pts], dtype=float)
        smoothed = False
    b1, b2 = poly_coeffs(component, ortho_basis(years))
    return Shape(b1, b2, smoothed)


# --------------------------------------------------------------------------
# dissimilarities


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric year-matched dissimilarities.

    ``dist[i, j]`` is NaN where the pair has fewer common years than the
    overlap floor; the diagonal is always NaN.
    """

    codes: tuple[str, ...]
    dist: np.ndarray
    overlap: np.ndarray

    def index(self, code: str) -> int:
        return self.codes.index(code)

    def get(self, a: str, b: str) -> Optional[tuple[float, int]]:
        i, j = self.index(a), self.index(b)
        d = self.dist[i, j]
        return None if np.isnan(d) else (float(d), int(self.overlap[i, j]))

    def entries(self):
        """Yield ``(code_i, code_j, d, n_common)`` for each available pair, i < j."""
        n = len(self.codes)
        for i in range(n):
            for j in range(i + 1, n):
                if not np.isnan(self.dist[i, j]):
                    yield self.codes[i], self.codes[j], float(self.dist[i, j]), int(self.overlap[i, j])

    def neighbours(self, code: str) -> dict[str, float]:
        i = self.index(code)
        row = self.dist[i]
        return {c: float(row[j]) for j, c in enumerate(self.codes) if not np.isnan(row[j])}


def pairwise_dissimilarity(panel: Panel, min_overlap: int = 1) -> DissimilarityMatrix:
    """Mean absolute difference over the years both countries were observed."""
    codes = panel.countries
    years = sorted({y for c in codes for y in panel.years(c)})
    col = {y: k for k, y in enumerate(years)}
    vals = np.full((len(codes), len(years)), np.nan)
    for i, c in enumerate(codes):
        for y, v in panel.series[c]:
            vals[i, col[y]] = v

    seen = (~np.isnan(vals)).astype(float)
    overlap = (seen @ seen.T).astype(int)
    total = np.zeros((len(codes), len(codes)))
    for i in range(len(codes)):
        diff = np.abs(vals[i][None, :] - vals)
        total[i] = np.nansum(diff, axis=1)
    keep = overlap >= max(1, min_overlap)
    np.fill_diagonal(keep, False)
    dist = np.full_like(total, np.nan)
    dist[keep] = total[keep] / overlap[keep]
    dist.flags.writeable = False
    overlap.flags.writeable = False
    return DissimilarityMatrix(tuple(codes), dist, overlap)


# --------------------------------------------------------------------------
# silhouette


@dataclass(frozen=True)
class SilhouetteResult:
    country_code: str
    group: str
    a: Optional[float]
    b: Optional[float]
    s: float
    nearest_group: Optional[str]
    defined: bool
    n_within: int = 0
    n_other: int = 0


_AGGREGATORS = {"mean": np.mean, "median": np.median}


def silhouette_width(a: Optional[float], b: Optional[float]) -> tuple[float, bool]:
    if a is None or b is None:
        return 0.0, False
    m = max(a, b)
    return (0.0 if m == 0 else (b - a) / m), True


def silhouette(
    matrix: DissimilarityMatrix,
    grouping: GroupingMap,
    aggregation: str = "mean",
) -> list[SilhouetteResult]:
    """Silhouette width of every country in ``matrix`` against its pre-defined group.

    Only available (year-matched) dissimilarities contribute.  A group with no
    available comparison to a country is skipped when searching for the
    nearest other group; a country with no within-group comparison gets
    ``s = 0`` and ``defined = False``.
    """
    agg = _AGGREGATORS[aggregation]
    groups = [grouping.group_of(c) for c in matrix.codes]
    members: dict[str, list[int]] = defaultdict(list)
    for k, g in enumerate(groups):
        members[g].append(k)

    out = []
    for i, code in enumerate(matrix.codes):
        row = matrix.dist[i]
        own = groups[i]
        within = row[[k for k in members[own] if k != i]]
        within = within[~np.isnan(within)]
        a = float(agg(within)) if within.size else None

        b, nearest, n_other = None, None, 0
        for g in sorted(members):
            if g == own:
                continue
            d = row[members[g]]
            d = d[~np.isnan(d)]
            if not d.size:
                continue
            n_other += d.size
            m = float(agg(d))
            if b is None or m < b:
                b, nearest = m, g
        s, defined = silhouette_width(a, b)
        out.append(SilhouetteResult(code, own, a, b, s, nearest, defined, int(within.size), n_other))
    return out


# --------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class GroupSummary:
    group: str
    mean_value: Optional[float]
    n_members: int


def _value_of(item) -> Optional[float]:
    if isinstance(item, SilhouetteResult):
        return item.s if item.defined else None
    return item.value


def group_summaries(
    results: Iterable,
    grouping: GroupingMap,
    countries: Optional[Iterable[str]] = None,
) -> list[GroupSummary]:
    """Mean of defined values per group, sorted by descending mean.

    ``results`` holds SilhouetteResult or FeatureRecord items.  Groups with no
    defined value come last with ``mean_value=None``.
    """
    keep = None if countries is None else set(countries)
    vals: dict[str, list[float]] = defaultdict(list)
    for item in results:
        if keep is not None and item.country_code not in keep:
            continue
        g = grouping.group_of(item.country_code)
        v = _value_of(item)
        vals.setdefault(g, [])
        if v is not None:
            vals[g].append(v)
    out = [GroupSummary(g, float(np.mean(v)) if v else None, len(v)) for g, v in vals.items()]
    out.sort(key=lambda s: (s.mean_value is None, -(s.mean_value or 0.0), s.group))
    return out


def country_avg_dissimilarity(
    matrix: DissimilarityMatrix, grouping: Optional[GroupingMap] = None
) -> list[FeatureRecord]:
    """Average available dissimilarity per country (and within its own group if grouped)."""
    out = []
    for i, code in enumerate(matrix.codes):
        row = matrix.dist[i]
        avail = ~np.isnan(row)
        n = int(avail.sum())
        out.append(FeatureRecord(code, Metric.AVG_DISSIM, float(row[avail].mean()) if n else None, n))
        if grouping is not None:
            own = grouping.group_of(code)
            mask = avail & np.array([grouping.group_of(c) == own for c in matrix.codes])
            n = int(mask.sum())
            out.append(
                FeatureRecord(code, Metric.WITHIN_GROUP_DISSIM, float(row[mask].mean()) if n else None, n)
            )
    return out


# --------------------------------------------------------------------------
# whole-panel driver


@dataclass(frozen=True)
class PanelDiagnostics:
    features: list[FeatureRecord]
    silhouettes: list[SilhouetteResult]
    matrix: DissimilarityMatrix
    exclusions: list[Exclusion]

    def metric(self, metric: Metric) -> dict[str, Optional[float]]:
        return {f.country_code: f.value for f in self.features if f.metric is metric}


def diagnose_panel(
    panel: Panel,
    *,
    span: float = DEFAULT_SPAN,
    min_points: int = MIN_DECOMP_POINTS,
    min_overlap: int = 1,
    aggregation: str = "mean",
    stage: str = "diagnose",
) -> PanelDiagnostics:
    """Compute every index for every country of ``panel``."""
    features: list[FeatureRecord] = []
    exclusions: list[Exclusion] = []
    for code in panel.countries:
        pts = panel.series[code]
        n = len(pts)
        ts = None
        try:
            ts = trend_strength(pts, span, min_points)
            if ts is None:
                exclusions.append(Exclusion(code, stage, Reason.CONSTANT_SERIES, "trend strength"))
        except TooShort as exc:
            exclusions.append(Exclusion(code, stage, Reason.TOO_SHORT, f"trend strength: {exc}"))
        features.append(FeatureRecord(code, Metric.TREND_STRENGTH, ts, n))
        try:
            b1, b2, _ = linearity_curvature(pts, span, min_points)
        except TooShort as exc:
            b1 = b2 = None
            exclusions.append(Exclusion(code, stage, Reason.TOO_SHORT, f"linearity/curvature: {exc}"))
        features.append(FeatureRecord(code, Metric.LINEARITY, b1, n))
        features.append(FeatureRecord(code, Metric.CURVATURE, b2, n))

    matrix = pairwise_dissimilarity(panel, min_overlap)
    sils = silhouette(matrix, panel.grouping, aggregation)
    for r in sils:
        n = len(panel.series[r.country_code])
        features.append(FeatureRecord(r.country_code, Metric.SILHOUETTE, r.s if r.defined else None, n))
        if not r.defined:
            reason = Reason.NO_WITHIN_GROUP_OVERLAP if r.a is None else Reason.NO_OTHER_GROUP_OVERLAP
            exclusions.append(Exclusion(r.country_code, stage, reason, "silhouette set to 0"))
    features.extend(country_avg_dissimilarity(matrix, panel.grouping))
    features.sort(key=lambda f: (f.country_code, list(Metric).index(f.metric)))
    for e in exclusions:
        logger.info("excluded %s [%s] %s: %s", e.country_code, e.stage, e.reason.value, e.detail)
    return PanelDiagnostics(features, sils, matrix, exclusions)
