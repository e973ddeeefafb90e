"""CSV ingestion, survey de-duplication and panel construction.

Three canonical CSV layouts are read here (survey observations, model
estimates and the country grouping map).  Everything downstream works on
:class:`Panel` objects, which are immutable and carry their grouping map.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Optional

from .errors import (
    BadValue,
    EmptyFile,
    EmptyPanel,
    IngestError,
    MissingColumn,
    MissingFile,
    MissingSlice,
    MixedCountryYear,
    UngroupedCountry,
)

logger = logging.getLogger(__name__)

SURVEY_COLUMNS = (
    "country_code",
    "country_name",
    "sub_region",
    "region",
    "year",
    "survey_type",
    "population_group",
    "modern_pct",
    "traditional_pct",
    "se_modern",
)
ESTIMATE_COLUMNS = (
    "country_code",
    "country_name",
    "year",
    "variant",
    "indicator",
    "population_group",
    "estimate_method",
    "value",
)
GROUP_COLUMNS = ("country_code", "country_name", "sub_region", "region", "is_focus")

MIN_YEAR, MAX_YEAR = 1950, 2100


class SurveyType(str, enum.Enum):
    DHS = "DHS"
    MICS = "MICS"
    PMA = "PMA"
    NATIONAL = "NATIONAL"
    OTHER = "OTHER"

    @property
    def priority(self) -> int:
        """Lower is preferred."""
        return _PRIORITY[self]


_PRIORITY = {t: i for i, t in enumerate(SurveyType)}

_SURVEY_ALIASES = {
    "DEMOGRAPHIC AND HEALTH SURVEY": SurveyType.DHS,
    "MULTIPLE INDICATOR CLUSTER SURVEY": SurveyType.MICS,
    "PERFORMANCE MONITORING FOR ACTION": SurveyType.PMA,
    "PMA2020": SurveyType.PMA,
    "NATIONAL SURVEY": SurveyType.NATIONAL,
}


class PopulationGroup(str, enum.Enum):
    MARRIED_IN_UNION = "MARRIED_IN_UNION"
    UNMARRIED = "UNMARRIED"
    ALL = "ALL"


class Variant(str, enum.Enum):
    P95_LO = "P95_LO"
    P80_LO = "P80_LO"
    MEDIAN = "MEDIAN"
    P80_HI = "P80_HI"
    P95_HI = "P95_HI"


class EstimateMethod(str, enum.Enum):
    INTERPOLATED = "INTERPOLATED"
    PROJECTED = "PROJECTED"


class PanelKind(str, enum.Enum):
    SURVEY = "SURVEY"
    MODEL = "MODEL"


# The estimates file carries many indicator levels; these are the ones the
# pipeline knows by name.  Any upper-case token is accepted on parse.
MODERN_PCT = "MODERN_PCT"
TRADITIONAL_PCT = "TRADITIONAL_PCT"
ANY_PCT = "ANY_PCT"
UNMET_PCT = "UNMET_PCT"


@dataclass(frozen=True)
class SurveyRecord:
    country_code: str
    country_name: str
    year: int
    survey_type: SurveyType
    population_group: PopulationGroup
    modern_pct: float
    traditional_pct: Optional[float] = None
    se_modern: Optional[float] = None
    sub_region: str = ""
    region: str = ""


@dataclass(frozen=True)
class EstimateRecord:
    country_code: str
    year: int
    variant: Variant
    indicator: str
    population_group: PopulationGroup
    estimate_method: EstimateMethod
    value: float
    country_name: str = ""


@dataclass(frozen=True)
class GroupInfo:
    country_name: str
    sub_region: str
    region: str
    is_focus: bool


class GroupingMap(Mapping):
    """Read-only ``country_code -> GroupInfo`` map.

    Raises :class:`IngestError` if a sub-region is assigned to more than one
    region.
    """

    def __init__(self, entries: Mapping[str, GroupInfo]):
        self._entries = dict(sorted(entries.items()))
        regions: dict[str, str] = {}
        for code, info in self._entries.items():
            prev = regions.setdefault(info.sub_region, info.region)
            if prev != info.region:
                raise IngestError(
                    f"sub-region {info.sub_region!r} mapped to both {prev!r} and "
                    f"{info.region!r} (at {code})"
                )

    def __getitem__(self, code: str) -> GroupInfo:
        return self._entries[code]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"GroupingMap({len(self)} countries)"

    def group_of(self, code: str) -> str:
        try:
            return self._entries[code].sub_region
        except KeyError:
            raise UngroupedCountry(code) from None

    def name_of(self, code: str) -> str:
        info = self._entries.get(code)
        return info.country_name if info and info.country_name else code

    def sub_regions(self) -> list[str]:
        return sorted({i.sub_region for i in self._entries.values()})

    def members(self, sub_region: str, focus_only: bool = False) -> list[str]:
        return [
            c
            for c, i in self._entries.items()
            if i.sub_region == sub_region and (i.is_focus or not focus_only)
        ]

    def focus_codes(self) -> frozenset[str]:
        return frozenset(c for c, i in self._entries.items() if i.is_focus)

    def region_of_sub_region(self, sub_region: str) -> str:
        for info in self._entries.values():
            if info.sub_region == sub_region:
                return info.region
        raise KeyError(sub_region)

    def subset(self, codes: Iterable[str]) -> "GroupingMap":
        return GroupingMap({c: self[c] for c in codes})


Series = tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class Panel:
    """Per-country ordered ``(year, value)`` series plus grouping metadata."""

    series: Mapping[str, Series]
    grouping: GroupingMap
    kind: PanelKind = PanelKind.SURVEY

    def __post_init__(self):
        object.__setattr__(self, "kind", PanelKind(self.kind))
        clean = {}
        for code in sorted(self.series):
            pts = tuple((int(y), float(v)) for y, v in self.series[code])
            years = [y for y, _ in pts]
            if any(b <= a for a, b in zip(years, years[1:])):
                raise IngestError(f"{code}: years must be strictly increasing")
            if self.kind is PanelKind.MODEL and any(b - a != 1 for a, b in zip(years, years[1:])):
                raise IngestError(f"{code}: model series must be annual with no gaps")
            if code not in self.grouping:
                raise UngroupedCountry(code)
            clean[code] = pts
        object.__setattr__(self, "series", MappingProxyType(clean))

    @property
    def countries(self) -> tuple[str, ...]:
        return tuple(self.series)

    def __len__(self) -> int:
        return len(self.series)

    def __contains__(self, code: str) -> bool:
        return code in self.series

    def years(self, code: str) -> list[int]:
        return [y for y, _ in self.series[code]]

    def values(self, code: str) -> list[float]:
        return [v for _, v in self.series[code]]

    def as_dict(self, code: str) -> dict[int, float]:
        return dict(self.series[code])

    def restrict(self, codes: Iterable[str]) -> "Panel":
        keep = set(codes)
        return Panel({c: s for c, s in self.series.items() if c in keep}, self.grouping, self.kind)

    def window(self, min_year: Optional[int] = None, max_year: Optional[int] = None) -> "Panel":
        lo = -math.inf if min_year is None else min_year
        hi = math.inf if max_year is None else max_year
        out = {}
        for code, pts in self.series.items():
            kept = tuple(p for p in pts if lo <= p[0] <= hi)
            if kept:
                out[code] = kept
        return Panel(out, self.grouping, self.kind)

    def last_year(self) -> int:
        return max(pts[-1][0] for pts in self.series.values())

    def n_points(self) -> int:
        return sum(len(s) for s in self.series.values())

    def to_rows(self) -> list[tuple[str, int, float]]:
        return [(c, y, v) for c, pts in self.series.items() for y, v in pts]


# --------------------------------------------------------------------------
# CSV parsing


def _open_rows(path, columns, optional=()):
    path = Path(path)
    if not path.exists():
        raise MissingFile(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyFile(path) from None
        for col in columns:
            if col not in header:
                raise MissingColumn(col, path)
        idx = {c: header.index(c) for c in (*columns, *optional) if c in header}
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) < len(header):
                raw = raw + [""] * (len(header) - len(raw))
            row = {c: "" for c in optional}
            row.update({c: raw[i].strip() for c, i in idx.items()})
            rows.append((lineno, row))
    if not rows:
        raise EmptyFile(path)
    return rows


def _num(row, lineno, column, path, *, required=True, lo=None, hi=None):
    text = row[column]
    if text == "":
        if required:
            raise BadValue(lineno, column, "missing value", path)
        return None
    try:
        value = float(text)
    except ValueError:
        raise BadValue(lineno, column, f"not a number: {text!r}", path) from None
    if not math.isfinite(value):
        raise BadValue(lineno, column, f"not finite: {text!r}", path)
    if lo is not None and value < lo or hi is not None and value > hi:
        raise BadValue(lineno, column, f"{value} outside [{lo}, {hi}]", path)
    return value


def _year(row, lineno, path):
    text = row["year"]
    try:
        year = int(text)
    except ValueError:
        try:
            f = float(text)
        except ValueError:
            raise BadValue(lineno, "year", f"not an integer: {text!r}", path) from None
        if not f.is_integer():
            raise BadValue(lineno, "year", f"not an integer: {text!r}", path)
        year = int(f)
    if not MIN_YEAR <= year <= MAX_YEAR:
        raise BadValue(lineno, "year", f"{year} outside [{MIN_YEAR}, {MAX_YEAR}]", path)
    return year


def _enum(cls, row, lineno, column, path):
    text = row[column].upper()
    try:
        return cls(text)
    except ValueError:
        raise BadValue(lineno, column, f"unknown {cls.__name__} {row[column]!r}", path) from None


def parse_survey_type(text: str) -> SurveyType:
    """Map a survey-source label to a :class:`SurveyType`, defaulting to OTHER."""
    key = text.strip().upper()
    try:
        return SurveyType(key)
    except ValueError:
        pass
    if key in _SURVEY_ALIASES:
        return _SURVEY_ALIASES[key]
    logger.warning("unknown survey type %r mapped to OTHER", text)
    return SurveyType.OTHER


SURVEY_OPTIONAL = ("sub_region", "region")


def parse_survey_csv(path, columns=SURVEY_COLUMNS) -> list[SurveyRecord]:
    """One record per data row, in file order.

    ``sub_region`` and ``region`` may be absent; grouping normally comes from
    the separate groups file.
    """
    required = [c for c in columns if c not in SURVEY_OPTIONAL]
    records = []
    for lineno, row in _open_rows(path, required, SURVEY_OPTIONAL):
        code = row["country_code"].upper()
        if not code:
            raise BadValue(lineno, "country_code", "missing value", path)
        modern = _num(row, lineno, "modern_pct", path, lo=0.0, hi=100.0)
        trad = _num(row, lineno, "traditional_pct", path, required=False, lo=0.0, hi=100.0)
        if trad is not None and modern + trad > 100.0 + 1e-9:
            raise BadValue(lineno, "traditional_pct", "modern + traditional exceeds 100", path)
        records.append(
            SurveyRecord(
                country_code=code,
                country_name=row["country_name"],
                year=_year(row, lineno, path),
                survey_type=parse_survey_type(row["survey_type"]),
                population_group=_enum(PopulationGroup, row, lineno, "population_group", path),
                modern_pct=modern,
                traditional_pct=trad,
                se_modern=_num(row, lineno, "se_modern", path, required=False, lo=0.0),
                sub_region=row["sub_region"],
                region=row["region"],
            )
        )
    return records


def parse_estimates_csv(path) -> list[EstimateRecord]:
    records = []
    seen = set()
    for lineno, row in _open_rows(path, ESTIMATE_COLUMNS):
        rec = EstimateRecord(
            country_code=row["country_code"].upper(),
            year=_year(row, lineno, path),
            variant=_enum(Variant, row, lineno, "variant", path),
            indicator=row["indicator"].upper(),
            population_group=_enum(PopulationGroup, row, lineno, "population_group", path),
            estimate_method=_enum(EstimateMethod, row, lineno, "estimate_method", path),
            value=_num(row, lineno, "value", path, lo=0.0, hi=100.0),
            country_name=row["country_name"],
        )
        key = (rec.country_code, rec.year, rec.variant, rec.indicator, rec.population_group)
        if key in seen:
            raise BadValue(lineno, "value", f"duplicate estimate for {key}", path)
        seen.add(key)
        records.append(rec)
    return records


def parse_groups_csv(path) -> GroupingMap:
    entries = {}
    for lineno, row in _open_rows(path, GROUP_COLUMNS):
        code = row["country_code"].upper()
        if row["is_focus"] not in ("0", "1"):
            raise BadValue(lineno, "is_focus", f"expected 0 or 1, got {row['is_focus']!r}", path)
        if not row["sub_region"]:
            raise BadValue(lineno, "sub_region", "missing value", path)
        if code in entries:
            raise BadValue(lineno, "country_code", f"duplicate country {code}", path)
        entries[code] = GroupInfo(
            row["country_name"], row["sub_region"], row["region"], row["is_focus"] == "1"
        )
    return GroupingMap(entries)


# --------------------------------------------------------------------------
# De-duplication and panel building


def select_preferred_observation(
    records: Iterable[SurveyRecord], value: str = "modern_pct"
) -> tuple[int, float]:
    """Reduce all records of one country-year to a single value.

    The highest-priority survey type present wins (DHS, MICS, PMA, NATIONAL,
    OTHER); several records of that type are averaged.
    """
    records = list(records)
    if not records:
        raise MixedCountryYear("no records given")
    keys = {(r.country_code, r.year) for r in records}
    if len(keys) != 1:
        raise MixedCountryYear(f"records span several country-years: {sorted(keys)}")
    best = min(r.survey_type.priority for r in records)
    vals = sorted(getattr(r, value) for r in records if r.survey_type.priority == best)
    # fsum is correctly rounded, so the mean does not depend on input order
    return records[0].year, math.fsum(vals) / len(vals)


def grouping_from_survey(records: Iterable[SurveyRecord], focus: Iterable[str] = ()) -> GroupingMap:
    focus = set(focus)
    entries = {}
    for r in records:
        if r.country_code not in entries:
            entries[r.country_code] = GroupInfo(
                r.country_name, r.sub_region, r.region, r.country_code in focus
            )
    return GroupingMap(entries)


def filter_panel(
    records: Iterable[SurveyRecord],
    focus_list: Iterable[str],
    min_year: int = 1990,
    population_group: PopulationGroup = PopulationGroup.MARRIED_IN_UNION,
    *,
    focus_only: bool = True,
    grouping: Optional[GroupingMap] = None,
    value: str = "modern_pct",
) -> Panel:
    """Filter survey records and de-duplicate them into a SURVEY panel.

    Population-group and year filters run before de-duplication.  Records
    with a missing ``value`` field are skipped.
    """
    focus = {c.upper() for c in focus_list}
    if not focus:
        raise ValueError("focus_list must not be empty")
    if not MIN_YEAR <= min_year <= MAX_YEAR:
        raise ValueError(f"min_year {min_year} outside [{MIN_YEAR}, {MAX_YEAR}]")
    population_group = PopulationGroup(population_group)
    records = list(records)
    if grouping is None:
        grouping = grouping_from_survey(records, focus)

    buckets: dict[tuple[str, int], list[SurveyRecord]] = defaultdict(list)
    for r in records:
        if r.population_group is not population_group or r.year < min_year:
            continue
        if focus_only and r.country_code not in focus:
            continue
        if getattr(r, value) is None:
            continue
        buckets[(r.country_code, r.year)].append(r)
    if not buckets:
        raise EmptyPanel(
            f"no survey records left after filtering (min_year={min_year}, "
            f"population_group={population_group.value}, focus_only={focus_only})"
        )

    series: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for (code, _year), recs in sorted(buckets.items()):
        series[code].append(select_preferred_observation(recs, value))
    return Panel(series, grouping, PanelKind.SURVEY)


def build_model_panel(
    records: Iterable[EstimateRecord],
    indicator: str = MODERN_PCT,
    variant: Variant = Variant.MEDIAN,
    population_group: PopulationGroup = PopulationGroup.MARRIED_IN_UNION,
    grouping: Optional[GroupingMap] = None,
) -> Panel:
    variant = Variant(variant)
    population_group = PopulationGroup(population_group)
    indicator = indicator.upper()
    series: dict[str, list[tuple[int, float]]] = defaultdict(list)
    names = {}
    for r in records:
        if r.indicator == indicator and r.variant is variant and r.population_group is population_group:
            series[r.country_code].append((r.year, r.value))
            names.setdefault(r.country_code, r.country_name)
    if not series:
        raise MissingSlice(indicator, variant.value, population_group.value)
    for pts in series.values():
        pts.sort()
        for (a, _), (b, _) in zip(pts, pts[1:]):
            if a == b:
                raise IngestError(f"duplicate model estimate in year {a}")
    if grouping is None:
        raise UngroupedCountry(sorted(series)[0])
    return Panel(series, grouping, PanelKind.MODEL)


@dataclass(frozen=True)
class AvailabilityRow:
    country_code: str
    country_name: str
    sub_region: str
    n_observations: int
    last_year: int


def panel_availability_summary(panel: Panel) -> list[AvailabilityRow]:
    rows = []
    for code, pts in panel.series.items():
        info = panel.grouping.get(code)
        rows.append(
            AvailabilityRow(
                code,
                panel.grouping.name_of(code),
                info.sub_region if info else "",
                len(pts),
                pts[-1][0],
            )
        )
    rows.sort(key=lambda r: (r.country_name, r.country_code))
    return rows
