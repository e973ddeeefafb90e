import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import grouping_of, panel_of
from oracles import random_toy_panel
from fpdiag.compare import (
    ComparisonRecord,
    Label,
    ResidualSeries,
    align_residuals,
    combine,
    ratio_records,
    residual_diagnostics,
    silhouette_delta,
    trend_strength_ratio,
)
from fpdiag.features import Reason, SilhouetteResult, pairwise_dissimilarity, silhouette
from fpdiag.ingest import PanelKind

YEARS = range(1990, 2021)


def model_of(series: dict, groups: dict):
    return panel_of(series, groups, PanelKind.MODEL)


def smooth(level, slope, curve=0.0):
    return {y: level + slope * (y - 2000) + curve * (y - 2000) ** 2 for y in YEARS}


# ---- residuals --------------------------------------------------------------


def test_identical_panels_give_zero_residuals():
    m = {"A": smooth(20, 0.8), "B": smooth(40, 0.3)}
    groups = {"A": "G", "B": "G"}
    survey = panel_of({c: {y: s[y] for y in (1992, 2001, 2010)} for c, s in m.items()}, groups)
    res, missing = align_residuals(survey, model_of(m, groups))
    assert not missing
    assert all(v == 0.0 for r in res for v in r.values)


def test_model_below_survey_gives_positive_residuals():
    m = smooth(20, 0.8)
    survey = panel_of({"S": {y: m[y] + 2.0 for y in (1995, 2003, 2014)}}, {"S": "G"})
    res, _ = align_residuals(survey, model_of({"S": m}, {"S": "G"}))
    assert res[0].values == pytest.approx([2.0, 2.0, 2.0], abs=1e-12)
    assert res[0].years == [1995, 2003, 2014]


def test_toy_residuals_match_hand_subtraction():
    survey = panel_of({"A": {1990: 10.0, 1995: 14.5, 2030: 1.0}, "B": {2000: 3.0}}, {"A": "G", "B": "G"})
    model = model_of({"A": {y: 12.0 + 0.1 * (y - 1990) for y in YEARS}}, {"A": "G"})
    res, missing = align_residuals(survey, model)
    # 2030 falls outside the model window and is dropped
    assert res == [ResidualSeries("A", ((1990, -2.0), (1995, 14.5 - 12.5)))]
    assert [(e.country_code, e.reason) for e in missing] == [("B", Reason.MISSING_MODEL)]


def test_no_overlap_is_reported():
    survey = panel_of({"A": {1980: 1.0}}, {"A": "G"})
    res, missing = align_residuals(survey, model_of({"A": smooth(1, 0)}, {"A": "G"}))
    assert res == [] and missing[0].reason is Reason.NO_OVERLAP


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_antisymmetry_and_conservation(seed):
    rng = np.random.default_rng(seed)
    sparse, groups = random_toy_panel(rng, 5, 2, years=range(1990, 2021), p_obs=0.3)
    dense = {c: {y: float(rng.uniform(0, 80)) for y in YEARS} for c in sparse}
    s_panel, m_panel = panel_of(sparse, groups), model_of(dense, groups)
    fwd, _ = align_residuals(s_panel, m_panel)
    # the reverse direction only sees years present in the sparse panel
    back_model = panel_of({c: {y: dense[c][y] for y in sparse[c]} for c in sparse}, groups)
    rev, _ = align_residuals(back_model, panel_of(sparse, groups))
    for f, r in zip(fwd, rev):
        assert f.years == r.years
        assert all(a == -b for a, b in zip(f.values, r.values))
    assert sum(len(r.points) for r in fwd) == sum(len(set(sparse[c]) & set(dense[c])) for c in sparse)

    d_f = residual_diagnostics(fwd)
    d_r = residual_diagnostics(rev)
    for a, b in zip(d_f, d_r):
        if a.beta1 is None:
            assert b.beta1 is None
            continue
        assert a.beta1 == pytest.approx(-b.beta1, abs=1e-12)
        assert a.beta2 == pytest.approx(-b.beta2, abs=1e-12)
        assert a.labels == b.labels


# ---- trend-strength ratios ---------------------------------------------------


def test_identical_panels_have_unit_ratio():
    rng = np.random.default_rng(1)
    series = {c: {y: float(v) for y, v in zip(YEARS, rng.normal(30, 4, len(YEARS)))} for c in "ABC"}
    groups = {c: "G" for c in series}
    recs, excl = trend_strength_ratio(model_of(series, groups), model_of(series, groups))
    assert not excl
    assert [r.ratio for r in recs] == pytest.approx([1.0] * 3, abs=1e-12)


def test_smooth_model_exceeds_noisy_survey():
    rng = np.random.default_rng(4)
    groups = {c: "G" for c in "ABCD"}
    model = {c: smooth(10 + 5 * k, 0.6, 0.01) for k, c in enumerate(groups)}
    survey = {
        c: {y: model[c][y] + float(rng.normal(0, 3)) for y in sorted(rng.choice(list(YEARS), 7, replace=False))}
        for c in groups
    }
    recs, _ = trend_strength_ratio(panel_of(survey, groups), model_of(model, groups), k=2)
    assert all(r.ratio > 1 for r in recs)
    assert [r.ratio for r in recs] == sorted((r.ratio for r in recs), reverse=True)
    assert [bool(r.labels) for r in recs] == [True, True, False, False]


def test_ratio_exclusions():
    g = grouping_of({c: "G" for c in "ABCDE"})
    recs, excl = ratio_records(
        {"A": 0.5, "B": 0.0, "C": None, "D": 0.4, "E": 0.2},
        {"A": 0.9, "B": 0.9, "C": 0.9, "D": None},
        g,
    )
    assert [r.country_code for r in recs] == ["A"]
    assert {(e.country_code, e.reason) for e in excl} == {
        ("B", Reason.ZERO_SURVEY_TREND),
        ("C", Reason.TOO_SHORT),
        ("D", Reason.CONSTANT_SERIES),
        ("E", Reason.MISSING_MODEL),
    }


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_ratio_decreasing_in_survey_metric(m, s1, s2):
    if s1 == s2:
        return
    g = grouping_of({"A": "G", "B": "G"})
    recs, _ = ratio_records({"A": s1, "B": s2}, {"A": m, "B": m}, g)
    by = {r.country_code: r.ratio for r in recs}
    assert (by["A"] > by["B"]) == (s1 < s2)


def test_ratio_ties_break_by_code():
    g = grouping_of({c: "G" for c in "DCBA"})
    recs, _ = ratio_records({c: 0.5 for c in "DCBA"}, {c: 0.7 for c in "DCBA"}, g, k=2)
    assert [r.country_code for r in recs] == ["A", "B", "C", "D"]
    assert [Label.TOP_RATIO in r.labels for r in recs] == [True, True, False, False]


# ---- silhouette deltas ---------------------------------------------------


def sil(code, s, group="G"):
    return SilhouetteResult(code, group, None, None, s, None, True)


def test_identical_silhouettes():
    survey = [sil(c, v) for c, v in zip("EDCBA", (0.1, 0.5, -0.2, 0.5, 0.3))]
    recs = silhouette_delta(survey, survey)
    assert all(r.diff == 0.0 for r in recs)
    labels = {r.country_code: r.labels for r in recs}
    # all |diff| tie: lowest codes win; then highest survey s among the rest
    assert {c for c, l in labels.items() if Label.TOP_ABS_SIL_DIFF in l} == {"A", "B", "C"}
    assert {c for c, l in labels.items() if Label.TOP_SURVEY_SIL in l} == {"D", "E"}


def test_silhouette_labels_match_brute_ranking():
    rng = np.random.default_rng(12)
    codes = [f"C{k:02d}" for k in range(12)]
    sv = dict(zip(codes, rng.uniform(-1, 1, 12)))
    mv = dict(zip(codes, rng.uniform(-1, 1, 12)))
    recs = silhouette_delta([sil(c, sv[c]) for c in codes], [sil(c, mv[c]) for c in codes])
    diffs = sorted(codes, key=lambda c: (-abs(mv[c] - sv[c]), c))[:3]
    rest = sorted((c for c in codes if c not in diffs), key=lambda c: (-sv[c], c))[:3]
    got = {r.country_code: r.labels for r in recs}
    assert {c for c in codes if Label.TOP_ABS_SIL_DIFF in got[c]} == set(diffs)
    assert {c for c in codes if Label.TOP_SURVEY_SIL in got[c]} == set(rest)
    for r in recs:
        assert r.diff == mv[r.country_code] - sv[r.country_code]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000), st.randoms())
def test_label_stability_under_permutation(seed, rnd):
    rng = np.random.default_rng(seed)
    series, groups = random_toy_panel(rng, 8, 3)
    p = panel_of(series, groups)
    s = silhouette(pairwise_dissimilarity(p), p.grouping)
    m = [sil(r.country_code, float(np.round(rng.uniform(-1, 1), 1)), r.group) for r in s]
    base = {r.country_code: r.labels for r in silhouette_delta(s, m)}
    s2, m2 = list(s), list(m)
    rnd.shuffle(s2)
    rnd.shuffle(m2)
    assert {r.country_code: r.labels for r in silhouette_delta(s2, m2)} == base


def test_silhouette_delta_restricted_to_countries():
    survey = [sil(c, 0.1 * k) for k, c in enumerate("ABCD")]
    recs = silhouette_delta(survey, survey, countries=["B", "D"])
    assert [r.country_code for r in recs] == ["B", "D"]


# ---- residual diagnostics --------------------------------------------------


def test_zero_residuals_have_zero_shape():
    d = residual_diagnostics([ResidualSeries("Z", tuple((y, 0.0) for y in range(2000, 2008)))])[0]
    assert (d.beta1, d.beta2) == (0.0, 0.0)
    assert not d.labels


def test_short_residuals_are_missing():
    d = residual_diagnostics([ResidualSeries("S", ((2000, 1.0), (2005, 2.0)))])[0]
    assert d.beta1 is None and d.beta2 is None and d.n_points == 2


def test_residual_label_radius():
    # a linear drift of 1 point per year over 5 surveys: |beta1| well above 0.015
    steep = ResidualSeries("A", tuple((2000 + k, float(k)) for k in range(5)))
    flat = ResidualSeries("B", tuple((2000 + k, 0.1 * (k % 2)) for k in range(5)))
    out = {d.country_code: d for d in residual_diagnostics([steep, flat])}
    assert Label.NONZERO_RESIDUAL_SHAPE in out["A"].labels
    assert not out["B"].labels
    # beta1 of 0..4 scaled to proportions: |p1| norm is sqrt(10) * 0.01
    assert out["A"].beta1 == pytest.approx(np.sqrt(10) * 0.01, abs=1e-12)


def test_combine_merges_labels():
    g = grouping_of({"A": "G", "B": "H"})
    ratios = [ComparisonRecord("A", "G", 0.5, 0.9, ratio=1.8, labels=frozenset({Label.TOP_RATIO}))]
    sils = [ComparisonRecord("A", "G", 0.1, 0.3, diff=0.2, labels=frozenset({Label.TOP_SURVEY_SIL}))]
    rows = combine(["B", "A"], g, {"A": 0.5}, {"A": 0.9}, ratios, sils, [])
    assert [r.country_code for r in rows] == ["A", "B"]
    assert rows[0].labels == {Label.TOP_RATIO, Label.TOP_SURVEY_SIL}
    assert rows[0].s_diff == 0.2 and rows[0].res_beta1 is None
    assert rows[1].ratio is None and rows[1].labels == frozenset()
