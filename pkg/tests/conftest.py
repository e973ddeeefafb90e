from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import pytest

from fpdiag import config, synthetic
from fpdiag.ingest import GroupInfo, GroupingMap, Panel, PanelKind

FIXTURES = Path(__file__).parent / "fixtures"

_criteria: dict[int, str] = {}
_criterion_of: dict[str, int] = {}
_outcomes: dict[int, list[str]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m:
            _criteria[m.args[0]] = m.args[1]
            _criterion_of[item.nodeid] = m.args[0]


def pytest_runtest_logreport(report):
    n = _criterion_of.get(report.nodeid)
    if n is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes[n].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_criteria):
        outs = _outcomes.get(n, [])
        if not outs:
            status = "NOT RUN"
        elif "failed" in outs:
            status = "FAIL"
        elif all(o == "skipped" for o in outs):
            status = "SKIP"
        else:
            status = "PASS"
        tr.write_line(f"criterion {n}: {status:7s} {_criteria[n]}")


# ---- shared fixtures ------------------------------------------------------


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory) -> Path:
    d = tmp_path_factory.mktemp("synth")
    synthetic.generate(d)
    return d


@pytest.fixture(scope="session")
def synth_run(synth_dir, tmp_path_factory):
    """One full pipeline run on the synthetic data; returns its output dir."""
    from fpdiag import pipeline

    out = tmp_path_factory.mktemp("run")
    cfg = make_config(synth_dir, out)
    pipeline.run_all(cfg)
    return out


def make_config(data_dir: Path, out_dir: Path, **overrides) -> config.RunConfig:
    cfg = config.build(overrides={
        "paths.survey_csv": str(data_dir / "survey.csv"),
        "paths.estimates_csv": str(data_dir / "estimates.csv"),
        "paths.groups_csv": str(data_dir / "groups.csv"),
        "paths.out_dir": str(out_dir),
        **overrides,
    })
    return cfg


def grouping_of(groups: dict, focus=()) -> GroupingMap:
    """GroupingMap from code -> sub-region, all regions set to 'R'."""
    return GroupingMap({c: GroupInfo(c, g, "R", c in focus) for c, g in groups.items()})


def panel_of(series: dict, groups: dict, kind=PanelKind.SURVEY) -> Panel:
    """Panel from code -> {year: value} (or list of pairs)."""
    norm = {c: sorted(s.items()) if isinstance(s, dict) else list(s) for c, s in series.items()}
    return Panel(norm, grouping_of(groups), kind)
