"""CSV exports and the matching readers used between pipeline stages."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Optional

from ..compare import ComparisonRecord, ComparisonRow, Label, ResidualDiagnostic, ResidualSeries
from ..errors import BadValue, MissingFile
from ..features import Exclusion, FeatureRecord, Metric, Reason, SilhouetteResult
from ..ingest import AvailabilityRow, GroupingMap, Panel, PanelKind

PANEL_COLUMNS = ("country_code", "year", "value")
AVAILABILITY_COLUMNS = ("country_code", "country_name", "sub_region", "n_observations", "last_year")
FEATURE_COLUMNS = ("country_code", "group", "metric", "value", "n_points")
COMBINED_FEATURE_COLUMNS = FEATURE_COLUMNS + ("panel",)
SILHOUETTE_COLUMNS = ("country_code", "group", "a", "b", "s", "nearest_group", "defined")
COMPARISON_COLUMNS = (
    "country_code", "group", "survey_ts", "model_ts", "ratio", "survey_s", "model_s", "s_diff",
    "res_beta1", "res_beta2", "labels",
)
EXCLUSION_COLUMNS = ("country_code", "stage", "reason", "detail")
RESIDUAL_COLUMNS = ("country_code", "year", "residual")
RESIDUAL_DIAG_COLUMNS = ("country_code", "beta1", "beta2", "smoothed", "n_points", "labels")


def num(x) -> str:
    """Lossless, deterministic float text; empty for missing."""
    return "" if x is None else repr(float(x))


def _opt(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def _labels(labels) -> str:
    return ";".join(sorted(l.value for l in labels))


def _parse_labels(text: str) -> frozenset:
    return frozenset(Label(t) for t in text.split(";") if t)


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    atomic_write(path, render_csv(header, rows))


def read_csv(path, columns) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or ())]
        if missing:
            raise BadValue(1, missing[0], "missing column", path)
        return list(reader)


# ---- rows ----------------------------------------------------------------


def panel_rows(panel: Panel):
    return [(c, y, num(v)) for c, y, v in panel.to_rows()]


def availability_rows(rows: Iterable[AvailabilityRow]):
    return [(r.country_code, r.country_name, r.sub_region, r.n_observations, r.last_year) for r in rows]


def feature_rows(features: Iterable[FeatureRecord], grouping: GroupingMap, panel: Optional[str] = None):
    extra = () if panel is None else (panel,)
    return [
        (f.country_code, grouping.group_of(f.country_code), f.metric.value, num(f.value), f.n_points, *extra)
        for f in features
    ]


def silhouette_rows(results: Iterable[SilhouetteResult]):
    return [
        (r.country_code, r.group, num(r.a), num(r.b), num(r.s), r.nearest_group or "", int(r.defined))
        for r in sorted(results, key=lambda r: r.country_code)
    ]


def comparison_rows(rows: Iterable[ComparisonRow]):
    return [
        (r.country_code, r.group, num(r.survey_ts), num(r.model_ts), num(r.ratio), num(r.survey_s),
         num(r.model_s), num(r.s_diff), num(r.res_beta1), num(r.res_beta2), _labels(r.labels))
        for r in rows
    ]


def exclusion_rows(exclusions: Iterable[Exclusion]):
    rows = {(e.country_code, e.stage, e.reason.value, e.detail) for e in exclusions}
    return sorted(rows)


def residual_rows(residuals: Iterable[ResidualSeries]):
    return [(r.country_code, y, num(v)) for r in residuals for y, v in r.points]


def residual_diag_rows(diags: Iterable[ResidualDiagnostic]):
    return [
        (d.country_code, num(d.beta1), num(d.beta2), int(d.smoothed), d.n_points, _labels(d.labels))
        for d in diags
    ]


# ---- readers -------------------------------------------------------------


def read_panel(path, grouping: GroupingMap, kind: PanelKind) -> Panel:
    series = defaultdict(list)
    for row in read_csv(path, PANEL_COLUMNS):
        series[row["country_code"]].append((int(row["year"]), float(row["value"])))
    return Panel(series, grouping, kind)


def read_features(path) -> list[FeatureRecord]:
    return [
        FeatureRecord(row["country_code"], Metric(row["metric"]), _opt(row["value"]), int(row["n_points"]))
        for row in read_csv(path, FEATURE_COLUMNS)
    ]


def read_silhouettes(path) -> list[SilhouetteResult]:
    out = []
    for row in read_csv(path, SILHOUETTE_COLUMNS):
        out.append(
            SilhouetteResult(
                row["country_code"], row["group"], _opt(row["a"]), _opt(row["b"]), float(row["s"]),
                row["nearest_group"] or None, row["defined"] == "1",
            )
        )
    return out


def read_comparison(path) -> list[ComparisonRow]:
    out = []
    for row in read_csv(path, COMPARISON_COLUMNS):
        out.append(
            ComparisonRow(
                row["country_code"], row["group"],
                *(_opt(row[c]) for c in COMPARISON_COLUMNS[2:10]),
                _parse_labels(row["labels"]),
            )
        )
    return out


def ratio_records_from(rows: Iterable[ComparisonRow]) -> list[ComparisonRecord]:
    recs = [
        ComparisonRecord(r.country_code, r.group, r.survey_ts, r.model_ts, ratio=r.ratio,
                         labels=r.labels & {Label.TOP_RATIO})
        for r in rows
        if r.ratio is not None
    ]
    recs.sort(key=lambda r: (-r.ratio, r.country_code))
    return recs


def sil_records_from(rows: Iterable[ComparisonRow]) -> list[ComparisonRecord]:
    return [
        ComparisonRecord(r.country_code, r.group, r.survey_s, r.model_s, diff=r.s_diff,
                         labels=r.labels & {Label.TOP_ABS_SIL_DIFF, Label.TOP_SURVEY_SIL})
        for r in rows
        if r.s_diff is not None
    ]


def read_residuals(path) -> list[ResidualSeries]:
    series = defaultdict(list)
    for row in read_csv(path, RESIDUAL_COLUMNS):
        series[row["country_code"]].append((int(row["year"]), float(row["residual"])))
    return [ResidualSeries(c, tuple(sorted(p))) for c, p in sorted(series.items())]


def read_residual_diagnostics(path) -> list[ResidualDiagnostic]:
    return [
        ResidualDiagnostic(
            row["country_code"], _opt(row["beta1"]), _opt(row["beta2"]), row["smoothed"] == "1",
            int(row["n_points"]), _parse_labels(row["labels"]),
        )
        for row in read_csv(path, RESIDUAL_DIAG_COLUMNS)
    ]


def read_exclusions(path) -> list[Exclusion]:
    return [
        Exclusion(row["country_code"], row["stage"], Reason(row["reason"]), row["detail"])
        for row in read_csv(path, EXCLUSION_COLUMNS)
    ]
