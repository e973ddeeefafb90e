"""Trend/remainder decomposition and orthonormal polynomial basis.

Annual series carry no seasonal term, so a decomposition here is just a
trend (a tricube-weighted local linear smooth on calendar year) plus the
remainder ``value - trend``.  Years may be irregularly spaced.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTimes, LengthMismatch, TooShort

DEFAULT_SPAN = 0.75
MIN_WINDOW = 4
MIN_DECOMP_POINTS = 5


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DecompositionResult:
    times: np.ndarray
    trend: np.ndarray
    remainder: np.ndarray
    span: float

    @property
    def values(self) -> np.ndarray:
        return self.trend + self.remainder


@dataclass(frozen=True)
class OrthoBasis:
    times: np.ndarray
    p1: np.ndarray
    p2: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


def tricube(u: np.ndarray) -> np.ndarray:
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**3) ** 3


def window_size(n: int, span: float, min_window: int = MIN_WINDOW) -> int:
    """Number of nearest neighbours defining each local bandwidth."""
    return min(n, max(min_window, math.ceil(span * n - 1e-9)))


def local_linear_smooth(x, y, span: float = DEFAULT_SPAN, min_window: int = MIN_WINDOW) -> np.ndarray:
    """Tricube-weighted local linear regression of ``y`` on ``x``, evaluated at ``x``.

    The bandwidth at each point is the distance to its q-th nearest neighbour
    (the point itself counts as the first), so that neighbour gets zero weight.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    q = window_size(n, span, min_window)
    dist = np.abs(x[:, None] - x[None, :])
    h = np.partition(dist, q - 1, axis=1)[:, q - 1]
    w = tricube(dist / h[:, None])

    sw = w.sum(axis=1)
    xm = (w @ x) / sw
    ym = (w @ y) / sw
    dx = x[None, :] - xm[:, None]
    sxx = (w * dx * dx).sum(axis=1)
    sxy = (w * dx * (y[None, :] - ym[:, None])).sum(axis=1)
    slope = np.divide(sxy, sxx, out=np.zeros(n), where=sxx > 0)
    return ym + slope * (x - xm)


def decompose(series, span: float = DEFAULT_SPAN, min_points: int = MIN_DECOMP_POINTS) -> DecompositionResult:
    """Split an ordered ``(year, value)`` series into trend and remainder."""
    pts = list(series)
    if len(pts) < min_points:
        raise TooShort(len(pts), min_points)
    t = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("years must be strictly increasing")
    trend = local_linear_smooth(t, y, span)
    return DecompositionResult(_frozen(t), _frozen(trend), _frozen(y - trend), span)


def ortho_basis(times: Sequence[float]) -> OrthoBasis:
    """Orthonormal linear and quadratic columns over ``times``.

    Both columns are orthogonal to the constant vector and to each other under
    the plain dot product, and the leading power has a positive coefficient.
    """
    t = np.asarray(times, dtype=float)
    if len(np.unique(t)) < 3:
        raise DegenerateTimes(f"need at least 3 distinct times, got {len(np.unique(t))}")
    u = t - t.mean()
    u /= np.abs(u).max()
    p1 = u / np.linalg.norm(u)

    v = u * u
    for _ in range(2):  # second pass cleans up cancellation error
        v = v - v.mean()
        v = v - (v @ p1) * p1
    p2 = v / np.linalg.norm(v)
    return OrthoBasis(_frozen(t), _frozen(p1), _frozen(p2))


def poly_coeffs(component, basis: OrthoBasis) -> tuple[float, float]:
    """Linear and quadratic coefficients of ``component`` on ``basis``."""
    y = np.asarray(component, dtype=float)
    if y.shape != basis.p1.shape:
        raise LengthMismatch(f"component has {y.size} values, basis has {len(basis)}")
    return float(y @ basis.p1), float(y @ basis.p2)


def reconstruct(basis: OrthoBasis, beta1: float, beta2: float, intercept: float = 0.0) -> np.ndarray:
    """Quadratic curve ``intercept + beta1*p1 + beta2*p2`` on the basis times."""
    return intercept + beta1 * basis.p1 + beta2 * basis.p2
