"""Slow, obviously-correct reference implementations used only by tests."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def naive_local_linear(x, y, span=0.75, min_window=4):
    """Loop-per-point weighted least squares with tricube weights."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    q = min(n, max(min_window, math.ceil(span * n - 1e-9)))
    out = []
    for i in range(n):
        d = sorted(abs(x[j] - x[i]) for j in range(n))
        h = d[q - 1]
        w = []
        for j in range(n):
            u = min(abs(x[j] - x[i]) / h, 1.0)
            w.append((1 - u**3) ** 3)
        sw = np.sqrt(np.array(w))
        design = np.column_stack([np.ones(n), np.array(x) - x[i]])
        coef, *_ = np.linalg.lstsq(design * sw[:, None], np.array(y) * sw, rcond=None)
        out.append(coef[0])
    return np.array(out)


def qr_basis(times):
    """Orthonormal linear/quadratic columns via QR of the Vandermonde matrix.

    Times are affinely rescaled first (same column span) to keep the
    factorisation well conditioned; columns are signed so the leading power
    enters positively.
    """
    t = np.asarray(times, dtype=float)
    u = (t - t.min()) / (t.max() - t.min()) * 2 - 1
    V = np.column_stack([np.ones_like(u), u, u * u])
    Q, R = np.linalg.qr(V)
    q1 = Q[:, 1] * np.sign(R[1, 1])
    q2 = Q[:, 2] * np.sign(R[2, 2])
    return q1, q2


def normal_equation_betas(times, values):
    """Full quadratic fit by the 3x3 normal equations, projected onto the QR basis."""
    t = np.asarray(times, dtype=float)
    u = (t - t.min()) / (t.max() - t.min()) * 2 - 1
    X = np.column_stack([np.ones_like(u), u, u * u])
    y = np.asarray(values, dtype=float)
    c = np.linalg.solve(X.T @ X, X.T @ y)
    fitted = X @ c
    q1, q2 = qr_basis(times)
    return float(fitted @ q1), float(fitted @ q2)


def exact_ortho(times):
    """Unnormalised orthogonal linear/quadratic vectors in exact rationals."""
    t = [Fraction(v) for v in times]
    n = len(t)

    def dot(a, b):
        return sum(x * y for x, y in zip(a, b))

    def center(v):
        m = sum(v) / n
        return [x - m for x in v]

    v1 = center(t)
    v2 = center([x * x for x in t])
    k = dot(v2, v1) / dot(v1, v1)
    v2 = [a - k * b for a, b in zip(v2, v1)]
    return v1, v2, dot


def brute_dissimilarity(series_a: dict, series_b: dict):
    common = sorted(set(series_a) & set(series_b))
    if not common:
        return None
    return sum(abs(series_a[y] - series_b[y]) for y in common) / len(common)


def brute_silhouette(panel: dict, groups: dict, agg="mean"):
    """Direct enumeration of a, b and s for every country.

    ``panel`` maps code -> {year: value}; ``groups`` maps code -> group.
    Returns code -> (a, b, s, defined).
    """
    reduce = (lambda v: sum(v) / len(v)) if agg == "mean" else (lambda v: float(np.median(v)))
    out = {}
    for i in panel:
        within = []
        others: dict = {}
        for j in panel:
            if j == i:
                continue
            d = brute_dissimilarity(panel[i], panel[j])
            if d is None:
                continue
            if groups[j] == groups[i]:
                within.append(d)
            else:
                others.setdefault(groups[j], []).append(d)
        a = reduce(within) if within else None
        b = min(reduce(v) for v in others.values()) if others else None
        if a is None or b is None:
            out[i] = (a, b, 0.0, False)
        elif max(a, b) == 0:
            out[i] = (a, b, 0.0, True)
        else:
            out[i] = (a, b, (b - a) / max(a, b), True)
    return out


def random_toy_panel(rng, n_countries, n_groups, years=range(2000, 2012), p_obs=0.6):
    """Random sparse panel: code -> {year: value} and code -> group."""
    panel, groups = {}, {}
    for k in range(n_countries):
        code = f"C{k:02d}"
        obs = {y: float(np.round(rng.uniform(0, 80), 3)) for y in years if rng.random() < p_obs}
        if not obs:
            obs = {years[0]: float(rng.uniform(0, 80))}
        panel[code] = obs
        groups[code] = f"G{k % n_groups}"
    return panel, groups
