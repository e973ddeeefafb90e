import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_ortho, naive_local_linear, normal_equation_betas
from fpdiag.decomp import (
    decompose,
    local_linear_smooth,
    ortho_basis,
    poly_coeffs,
    reconstruct,
    window_size,
)
from fpdiag.errors import DegenerateTimes, LengthMismatch, TooShort


def series(years, values):
    return list(zip(years, values))


def test_linear_series_has_zero_remainder():
    years = list(range(2000, 2010))
    dec = decompose(series(years, [2 + 0.5 * y for y in years]))
    assert np.abs(dec.remainder).max() < 1e-9


def test_constant_series():
    dec = decompose(series(range(2000, 2008), [7.5] * 8))
    assert np.allclose(dec.trend, 7.5, atol=1e-12)
    assert np.abs(dec.remainder).max() < 1e-12


def test_noisy_quadratic_matches_naive_smoother():
    rng = np.random.default_rng(11)
    years = np.sort(rng.choice(np.arange(1980, 2021), 23, replace=False))
    y = 0.02 * (years - 2000) ** 2 + rng.normal(0, 1.5, years.size)
    dec = decompose(series(years, y))
    assert np.abs(dec.trend - naive_local_linear(years, y)).max() < 1e-6


@pytest.mark.parametrize("n", [8, 12, 20, 40])
def test_matches_statsmodels_lowess_when_window_is_exact(n):
    # with span * n integral both pick the same neighbourhood size
    sm = pytest.importorskip("statsmodels.nonparametric.smoothers_lowess")
    rng = np.random.default_rng(n)
    x = np.sort(rng.choice(np.arange(1960, 2031), n, replace=False)).astype(float)
    y = rng.normal(size=n) + 0.01 * (x - 1995) ** 2
    ref = sm.lowess(y, x, frac=0.75, it=0, delta=0.0, return_sorted=False)
    assert np.abs(local_linear_smooth(x, y) - ref).max() < 1e-9


def test_window_size():
    assert window_size(5, 0.75) == 4
    assert window_size(10, 0.75) == 8
    assert window_size(3, 0.75) == 3
    assert window_size(40, 0.75) == 30


def test_decompose_errors():
    with pytest.raises(TooShort) as e:
        decompose(series(range(4), [1, 2, 3, 4]))
    assert (e.value.n, e.value.minimum) == (4, 5)
    with pytest.raises(ValueError):
        decompose(series([1, 3, 2, 4, 5], [1, 2, 3, 4, 5]))


def test_result_is_read_only():
    dec = decompose(series(range(6), [1, 3, 2, 5, 4, 6]))
    with pytest.raises(ValueError):
        dec.trend[0] = 0.0


# ---- orthonormal basis ---------------------------------------------------


def test_basis_on_three_points():
    b = ortho_basis([1, 2, 3])
    assert np.allclose(b.p1, np.array([-1, 0, 1]) / math.sqrt(2), atol=1e-12)
    assert np.allclose(b.p2, np.array([1, -2, 1]) / math.sqrt(6), atol=1e-12)


def test_irregular_basis_against_exact_rationals():
    times = [1990, 1993, 2000, 2006]
    b = ortho_basis(times)
    v1, v2, dot = exact_ortho(times)
    assert dot(v1, v2) == 0
    n1, n2 = math.sqrt(dot(v1, v1)), math.sqrt(dot(v2, v2))
    assert np.allclose(b.p1, [float(v) / n1 for v in v1], atol=1e-12)
    assert np.allclose(b.p2, [float(v) / n2 for v in v2], atol=1e-12)
    assert abs(b.p1 @ b.p2) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1950, 2100), min_size=3, max_size=40, unique=True))
def test_basis_invariants(years):
    years = sorted(years)
    b = ortho_basis(years)
    assert abs(b.p1 @ b.p2) < 1e-12
    assert abs(np.linalg.norm(b.p1) - 1) < 1e-12 and abs(np.linalg.norm(b.p2) - 1) < 1e-12
    assert abs(b.p1.sum()) < 1e-10 and abs(b.p2.sum()) < 1e-10
    # positive leading power: p1 increases with time, p2 is convex
    assert b.p1[-1] > b.p1[0]
    t = np.array(years, dtype=float)
    assert np.polyfit(t - t.mean(), b.p2, 2)[0] > 0


def test_degenerate_times():
    with pytest.raises(DegenerateTimes):
        ortho_basis([2000, 2000, 2001])
    with pytest.raises(DegenerateTimes):
        ortho_basis([2000, 2001])


def test_symmetric_parabola_and_affine():
    t = np.arange(2000, 2011)
    b = ortho_basis(t)
    b1, b2 = poly_coeffs((t - 2005.0) ** 2, b)
    assert abs(b1) < 1e-12 and b2 > 0
    b1, b2 = poly_coeffs(3.0 + 0.7 * t, b)
    assert b1 > 0 and abs(b2) < 1e-12


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        poly_coeffs([1, 2, 3, 4], ortho_basis([1, 2, 3]))


def test_reconstruct_is_least_squares_quadratic():
    rng = np.random.default_rng(5)
    t = np.sort(rng.choice(np.arange(1990, 2020), 9, replace=False))
    y = rng.normal(size=9)
    b = ortho_basis(t)
    fit = reconstruct(b, *poly_coeffs(y, b), intercept=y.mean())
    ref = np.polyval(np.polyfit(t - t.mean(), y, 2), t - t.mean())
    assert np.abs(fit - ref).max() < 1e-9


def test_random_vectors_match_normal_equations():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n = int(rng.integers(3, 41))
        t = np.sort(rng.choice(np.arange(1960, 2031), n, replace=False))
        y = rng.normal(0, 10, n)
        got = poly_coeffs(y, ortho_basis(t))
        assert np.allclose(got, normal_equation_betas(t, y), atol=1e-9)


# ---- decomposition properties -------------------------------------------

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


@st.composite
def irregular_series(draw, min_size=5, max_size=30):
    years = sorted(draw(st.lists(st.integers(1970, 2030), min_size=min_size, max_size=max_size, unique=True)))
    vals = draw(st.lists(finite, min_size=len(years), max_size=len(years)))
    return years, vals


@settings(max_examples=60, deadline=None)
@given(irregular_series(), st.floats(-50, 50), st.floats(0.1, 10))
def test_decomposition_properties(s, c, k):
    years, vals = s
    y = np.array(vals)
    dec = decompose(series(years, y))
    # additivity holds exactly by construction
    assert np.array_equal(dec.trend + dec.remainder, dec.trend + (y - dec.trend))
    assert np.allclose(dec.trend + dec.remainder, y, atol=1e-9)
    shifted = decompose(series(years, y + c))
    assert np.allclose(shifted.trend, dec.trend + c, atol=1e-8)
    assert np.allclose(shifted.remainder, dec.remainder, atol=1e-8)
    scaled = decompose(series(years, y * k))
    assert np.allclose(scaled.trend, dec.trend * k, atol=1e-8)
    b = ortho_basis(years)
    assert np.allclose(poly_coeffs(y * k, b), np.array(poly_coeffs(y, b)) * k, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1970, 2030), min_size=5, max_size=30, unique=True), finite, finite)
def test_affine_reproduction(years, a, slope):
    years = sorted(years)
    y = a + slope * (np.array(years) - 2000.0) / 10
    dec = decompose(series(years, y))
    assert np.abs(dec.remainder).max() < 1e-8
    assert abs(poly_coeffs(dec.trend, ortho_basis(years))[1]) < 1e-8
