"""Stage runner: ingest -> diagnose -> compare -> report, with content-hash caching.

Every stage reads its inputs from files (the raw CSVs or earlier stage
outputs in ``out_dir``), renders all of its outputs in memory and only then
writes them, each atomically.  A stage is skipped when the hash of its
inputs and parameters matches the cache record and its outputs on disk
still carry the recorded hashes; editing or deleting an output forces the
stage to run again.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from collections.abc import Callable, Mapping
from pathlib import Path

from . import __version__
from . import compare as cmp
from .config import ConfigError, RunConfig
from .errors import EmptyPanel, MissingFile, MissingStageOutput
from .features import Exclusion, Metric, Reason, diagnose_panel, group_summaries
from .ingest import (
    GROUP_COLUMNS,
    MODERN_PCT,
    GroupingMap,
    Panel,
    PanelKind,
    Variant,
    build_model_panel,
    filter_panel,
    panel_availability_summary,
    parse_estimates_csv,
    parse_groups_csv,
    parse_survey_csv,
)
from .report import figures as fig
from .report import tables as tab

logger = logging.getLogger(__name__)

CACHE_FILE = ".fpdiag-cache.json"
MANIFEST = "manifest.json"

GROUPS = "groups_used.csv"
PANEL_SURVEY = "panel_survey.csv"
PANEL_TRADITIONAL = "panel_traditional.csv"
PANEL_MODEL = "panel_model.csv"
AVAILABILITY = "availability.csv"
COMPARISON = "comparison.csv"
RESIDUALS = "residuals.csv"
RESIDUAL_DIAGNOSTICS = "residual_diagnostics.csv"

FIGURES = {
    "fig1_stacked.svg": fig.FigureKind.STACKED_BARS,
    "fig2_ratio.svg": fig.FigureKind.RATIO_SCATTER,
    "fig3_trajectories.svg": fig.FigureKind.TRAJECTORY_GRID,
    "fig4_partition_survey.svg": fig.FigureKind.PARTITION,
    "fig5_partition_model.svg": fig.FigureKind.PARTITION,
    "fig6_sil_scatter.svg": fig.FigureKind.SIL_SCATTER,
    "fig8_residual_scatter.svg": fig.FigureKind.RESIDUAL_SCATTER,
    "fig9_residual_panels.svg": fig.FigureKind.RESIDUAL_PANELS,
}
TABLES = ("features.csv", "silhouette_survey.csv", "silhouette_model.csv", COMPARISON, "exclusions.csv")
KINDS = (PanelKind.SURVEY, PanelKind.MODEL)


def features_file(kind: PanelKind) -> str:
    return f"features_{kind.value.lower()}.csv"


def silhouette_file(kind: PanelKind) -> str:
    return f"silhouette_{kind.value.lower()}.csv"


def exclusions_file(stage: str) -> str:
    return f"exclusions_{stage}.csv"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# --------------------------------------------------------------------------
# cache


class Runner:
    """Runs stages against one output directory and keeps the cache record."""

    def __init__(self, cfg: RunConfig, force: bool = False):
        self.cfg = cfg
        self.out = Path(cfg.paths.out_dir)
        self.force = force
        self.ran: list[str] = []
        self.skipped: list[str] = []

    def _cache_path(self) -> Path:
        return self.out / CACHE_FILE

    def _load_cache(self) -> dict:
        try:
            return json.loads(self._cache_path().read_text(encoding="utf-8"))
        except (OSError, ValueError):
            return {}

    def _save_cache(self, cache: dict) -> None:
        tab.atomic_write(self._cache_path(), json.dumps(cache, indent=2, sort_keys=True) + "\n")

    def _outputs_intact(self, outputs: Mapping[str, str]) -> bool:
        for name, digest in outputs.items():
            p = self.out / name
            if not p.is_file() or sha256_file(p) != digest:
                return False
        return True

    def run(self, key: str, inputs: Mapping[str, Path], params: dict,
            produce: Callable[[], Mapping[str, str]]) -> bool:
        """Run ``produce`` unless cached; returns True when the stage ran."""
        for stage_of, path in inputs.items():
            if not Path(path).is_file():
                stage = stage_of.split(":")[0]
                if stage == "input":
                    raise MissingFile(path)
                raise MissingStageOutput(stage, path)
        fingerprint = hashlib.sha256(
            json.dumps(
                {
                    "stage": key,
                    "version": __version__,
                    "params": params,
                    "inputs": {Path(p).name: sha256_file(p) for p in inputs.values()},
                },
                sort_keys=True,
            ).encode()
        ).hexdigest()
        cache = self._load_cache()
        entry = cache.get(key)
        if (not self.force and entry and entry.get("fingerprint") == fingerprint
                and self._outputs_intact(entry.get("outputs", {}))):
            logger.info("stage %s: cached", key)
            self.skipped.append(key)
            return False

        logger.info("stage %s: running", key)
        rendered = produce()
        self.out.mkdir(parents=True, exist_ok=True)
        for name, text in rendered.items():
            tab.atomic_write(self.out / name, text)
        cache = self._load_cache()
        cache[key] = {
            "fingerprint": fingerprint,
            "outputs": {name: sha256_file(self.out / name) for name in sorted(rendered)},
        }
        self._save_cache(cache)
        self.ran.append(key)
        return True

    def path(self, name: str) -> Path:
        return self.out / name


# --------------------------------------------------------------------------
# stages


def _exclusion_csv(exclusions) -> str:
    return tab.render_csv(tab.EXCLUSION_COLUMNS, tab.exclusion_rows(exclusions))


def _focus(cfg: RunConfig, grouping: GroupingMap, present) -> list[str]:
    present = list(present)
    if not cfg.filters.focus_only:
        return sorted(present)
    focus = grouping.focus_codes()
    return sorted(c for c in present if c in focus)


def _read_groups(runner: Runner) -> GroupingMap:
    return parse_groups_csv(runner.path(GROUPS))


def run_ingest(runner: Runner) -> bool:
    cfg = runner.cfg
    p, f = cfg.paths, cfg.filters
    inputs = {"input:survey": Path(p.survey_csv), "input:estimates": Path(p.estimates_csv),
              "input:groups": Path(p.groups_csv)}

    def produce():
        grouping = parse_groups_csv(p.groups_csv)
        focus = grouping.focus_codes()
        if not focus:
            raise EmptyPanel(f"{p.groups_csv}: no country has is_focus=1")
        records = parse_survey_csv(p.survey_csv)
        estimates = parse_estimates_csv(p.estimates_csv)

        survey = filter_panel(records, focus, f.min_year, f.population_group, focus_only=False,
                              grouping=grouping)
        try:
            trad = tab.panel_rows(filter_panel(records, focus, f.min_year, f.population_group,
                                               focus_only=False, grouping=grouping,
                                               value="traditional_pct"))
        except EmptyPanel:
            trad = []
        model = build_model_panel(estimates, MODERN_PCT, Variant.MEDIAN, f.population_group, grouping)

        shown = survey.restrict(_focus(cfg, grouping, survey.countries))
        excluded = [
            Exclusion(c, "ingest", Reason.MISSING_SURVEY, "no survey record after filtering")
            for c in sorted(focus) if c not in survey
        ]
        for e in excluded:
            logger.info("excluded %s [%s] %s: %s", e.country_code, e.stage, e.reason.value, e.detail)
        logger.info("survey panel: %d countries, %d observations", len(survey), survey.n_points())
        return {
            GROUPS: tab.render_csv(
                GROUP_COLUMNS,
                [(c, i.country_name, i.sub_region, i.region, int(i.is_focus)) for c, i in sorted(grouping.items())],
            ),
            PANEL_SURVEY: tab.render_csv(tab.PANEL_COLUMNS, tab.panel_rows(survey)),
            PANEL_TRADITIONAL: tab.render_csv(tab.PANEL_COLUMNS, trad),
            PANEL_MODEL: tab.render_csv(tab.PANEL_COLUMNS, tab.panel_rows(model)),
            AVAILABILITY: tab.render_csv(tab.AVAILABILITY_COLUMNS,
                                         tab.availability_rows(panel_availability_summary(shown))),
            exclusions_file("ingest"): _exclusion_csv(excluded),
        }

    return runner.run("ingest", inputs, cfg.section("filters"), produce)


def model_window(cfg: RunConfig, survey: Panel, model: Panel) -> Panel:
    """Model panel on the survey countries, cut to the survey analysis window."""
    model = model.restrict(c for c in survey.countries if c in model)
    if cfg.filters.model_window == "full":
        return model
    return model.window(cfg.filters.min_year, survey.last_year())


def _load_panels(runner: Runner):
    grouping = _read_groups(runner)
    survey = tab.read_panel(runner.path(PANEL_SURVEY), grouping, PanelKind.SURVEY)
    model = tab.read_panel(runner.path(PANEL_MODEL), grouping, PanelKind.MODEL)
    return grouping, survey, model


# only these numeric settings change diagnose outputs
DIAGNOSE_PARAMS = ("span", "min_decomp_points", "min_overlap_years", "sil_aggregation")


def run_diagnose(runner: Runner, kind: PanelKind) -> bool:
    cfg = runner.cfg
    kind = PanelKind(kind)
    inputs = {f"ingest:{n}": runner.path(n) for n in (GROUPS, PANEL_SURVEY, PANEL_MODEL)}
    stage = f"diagnose_{kind.value.lower()}"

    def produce():
        grouping, survey, model = _load_panels(runner)
        panel = survey if kind is PanelKind.SURVEY else model_window(cfg, survey, model)
        n = cfg.numeric
        d = diagnose_panel(panel, span=n.span, min_points=n.min_decomp_points,
                           min_overlap=n.min_overlap_years, aggregation=n.sil_aggregation, stage=stage)
        return {
            features_file(kind): tab.render_csv(tab.FEATURE_COLUMNS, tab.feature_rows(d.features, grouping)),
            silhouette_file(kind): tab.render_csv(tab.SILHOUETTE_COLUMNS, tab.silhouette_rows(d.silhouettes)),
            exclusions_file(stage): _exclusion_csv(d.exclusions),
        }

    n = cfg.numeric
    params = {
        **cfg.section("filters"),
        "numeric": {k: getattr(n, k) for k in DIAGNOSE_PARAMS},
    }
    return runner.run(stage, inputs, params, produce)


def _metric(records, metric: Metric) -> dict:
    return {r.country_code: r.value for r in records if r.metric is metric}


def run_compare(runner: Runner) -> bool:
    cfg = runner.cfg
    inputs = {f"ingest:{n}": runner.path(n) for n in (GROUPS, PANEL_SURVEY, PANEL_MODEL)}
    for kind in KINDS:
        stage = f"diagnose_{kind.value.lower()}"
        inputs[f"{stage}:f"] = runner.path(features_file(kind))
        inputs[f"{stage}:s"] = runner.path(silhouette_file(kind))

    def produce():
        n = cfg.numeric
        grouping, survey, model = _load_panels(runner)
        focus = _focus(cfg, grouping, survey.countries)
        survey_ts = _metric(tab.read_features(runner.path(features_file(PanelKind.SURVEY))), Metric.TREND_STRENGTH)
        model_ts = _metric(tab.read_features(runner.path(features_file(PanelKind.MODEL))), Metric.TREND_STRENGTH)
        survey_ts = {c: survey_ts.get(c) for c in focus}
        model_ts = {c: v for c, v in model_ts.items() if c in set(focus)}

        ratios, excluded = cmp.ratio_records(survey_ts, model_ts, grouping, n.label_k_ratio)
        deltas = cmp.silhouette_delta(
            tab.read_silhouettes(runner.path(silhouette_file(PanelKind.SURVEY))),
            tab.read_silhouettes(runner.path(silhouette_file(PanelKind.MODEL))),
            n.label_k_sil, countries=focus,
        )
        residuals, missing = cmp.align_residuals(survey.restrict(focus), model)
        excluded += missing
        diags = cmp.residual_diagnostics(residuals, n.residual_label_radius, n.residual_scale, n.span,
                                         n.min_decomp_points)
        for d in diags:
            if d.beta1 is None:
                excluded.append(Exclusion(d.country_code, "compare", Reason.TOO_SHORT,
                                          f"residual shape needs 3 years, has {d.n_points}"))
        for e in excluded:
            logger.info("excluded %s [%s] %s: %s", e.country_code, e.stage, e.reason.value, e.detail)
        rows = cmp.combine(focus, grouping, survey_ts, model_ts, ratios, deltas, diags)
        return {
            COMPARISON: tab.render_csv(tab.COMPARISON_COLUMNS, tab.comparison_rows(rows)),
            RESIDUALS: tab.render_csv(tab.RESIDUAL_COLUMNS, tab.residual_rows(residuals)),
            RESIDUAL_DIAGNOSTICS: tab.render_csv(tab.RESIDUAL_DIAG_COLUMNS, tab.residual_diag_rows(diags)),
            exclusions_file("compare"): _exclusion_csv(excluded),
        }

    return runner.run("compare", inputs, cfg.section("filters", "numeric"), produce)


def figure_spec(cfg: RunConfig, name: str) -> fig.FigureSpec:
    spec = fig.default_spec(FIGURES[name])
    changes = {}
    if cfg.figures.palette:
        changes["palette"] = tuple(cfg.figures.palette)
    ov = cfg.figures.overrides
    for key, value in (ov.get(name) or ov.get(Path(name).stem) or {}).items():
        if key == "ordering":
            value = fig.Ordering(value)
        elif key == "scaling":
            value = fig.Scaling(value)
        elif key not in ("width_px", "height_px"):
            raise ConfigError(f"figure override {name}.{key} is not supported")
        changes[key] = value
    return dataclasses.replace(spec, **changes)


REPORT_EXCLUSION_STAGES = ("ingest", "diagnose_survey", "diagnose_model", "compare")


def run_report(runner: Runner) -> bool:
    cfg = runner.cfg
    names_in = [GROUPS, PANEL_SURVEY, PANEL_TRADITIONAL, PANEL_MODEL, COMPARISON, RESIDUALS,
                RESIDUAL_DIAGNOSTICS]
    names_in += [features_file(k) for k in KINDS] + [silhouette_file(k) for k in KINDS]
    names_in += [exclusions_file(s) for s in REPORT_EXCLUSION_STAGES]
    inputs = {f"upstream:{n}": runner.path(n) for n in names_in}

    def produce():
        grouping, survey, model = _load_panels(runner)
        trad = tab.read_panel(runner.path(PANEL_TRADITIONAL), grouping, PanelKind.SURVEY)
        focus = _focus(cfg, grouping, survey.countries)
        names = {c: grouping.name_of(c) for c in grouping}
        palette = cfg.figures.palette or fig.DEFAULT_PALETTE
        colors = {g: palette[k % len(palette)] for k, g in enumerate(grouping.sub_regions())}
        rows = tab.read_comparison(runner.path(COMPARISON))
        ratios = tab.ratio_records_from(rows)
        out: dict[str, str] = {}
        excluded = []
        for s in REPORT_EXCLUSION_STAGES:
            excluded += tab.read_exclusions(runner.path(exclusions_file(s)))

        shown = survey.restrict(focus)
        out["fig1_stacked.svg"] = fig.emit_stacked_bars(
            shown, trad.restrict(c for c in focus if c in trad), figure_spec(cfg, "fig1_stacked.svg"),
            names, colors)
        out["fig2_ratio.svg"] = fig.emit_ratio_scatter(ratios, figure_spec(cfg, "fig2_ratio.svg"), names, colors)
        top = [r.country_code for r in ratios if cmp.Label.TOP_RATIO in r.labels]
        windowed = model_window(cfg, survey, model)
        out["fig3_trajectories.svg"] = fig.emit_trajectory_grid(
            survey, windowed, top, figure_spec(cfg, "fig3_trajectories.svg"), names=names, colors=colors,
            notes={r.country_code: f"ratio {r.ratio:.2f}" for r in ratios if r.country_code in top},
        )
        for kind, fname, title in (
            (PanelKind.SURVEY, "fig4_partition_survey.svg", "Survey silhouette width by country"),
            (PanelKind.MODEL, "fig5_partition_model.svg", "Model silhouette width by country"),
        ):
            sils = [r for r in tab.read_silhouettes(runner.path(silhouette_file(kind))) if r.country_code in set(focus)]
            means = group_summaries(sils, grouping, focus)
            _, singles = fig.partition_order(sils, means)
            excluded += [Exclusion(c, f"report_{kind.value.lower()}", Reason.SINGLETON_GROUP,
                                   "only country of its group in the partition plot") for c in singles]
            out[fname] = fig.emit_partition_plot(sils, means, figure_spec(cfg, fname), names, colors, title)
        out["fig6_sil_scatter.svg"] = fig.emit_sil_scatter(
            tab.sil_records_from(rows), figure_spec(cfg, "fig6_sil_scatter.svg"), names, colors)
        scatter, panels = fig.emit_residual_figures(
            tab.read_residual_diagnostics(runner.path(RESIDUAL_DIAGNOSTICS)),
            tab.read_residuals(runner.path(RESIDUALS)), survey, windowed,
            figure_spec(cfg, "fig9_residual_panels.svg"), names, colors, cfg.numeric.residual_scale,
            cfg.figures.residual_extra_countries, figure_spec(cfg, "fig8_residual_scatter.svg"),
        )
        out["fig8_residual_scatter.svg"] = scatter
        out["fig9_residual_panels.svg"] = panels

        feats = []
        for kind in KINDS:
            recs = tab.read_features(runner.path(features_file(kind)))
            feats += tab.feature_rows(recs, grouping, kind.value)
        feats.sort(key=lambda r: (r[0], r[5], r[2]))
        out["features.csv"] = tab.render_csv(tab.COMBINED_FEATURE_COLUMNS, feats)
        out["exclusions.csv"] = _exclusion_csv(excluded)
        return out

    ran = runner.run("report", inputs, cfg.to_dict() | {"paths": None}, produce)
    write_manifest(runner)
    return ran


def manifest_files() -> list[str]:
    return sorted([*FIGURES, *TABLES])


def write_manifest(runner: Runner) -> Path:
    files = {}
    for name in manifest_files():
        p = runner.path(name)
        if not p.is_file():
            raise MissingStageOutput("report", p)
        files[name] = sha256_file(p)
    path = runner.path(MANIFEST)
    tab.atomic_write(path, json.dumps({"files": files}, indent=2, sort_keys=True) + "\n")
    return path


def run_all(cfg: RunConfig, force: bool = False) -> Runner:
    runner = Runner(cfg, force)
    run_ingest(runner)
    for kind in KINDS:
        run_diagnose(runner, kind)
    run_compare(runner)
    run_report(runner)
    return runner
