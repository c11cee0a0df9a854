"""
Ground-truth brute-force search and floating-point distance kernels.

``brute_force_loop`` visits every point with the same expanded comparison the
index uses, so its hit set is the reference every other query path is checked
against. ``brute_force_matvec`` does the same work vectorized over all
points; both take the inner products through ``row_dots`` like the index does.

``distance_sq`` and friends exist for the rounding-error analysis: both the
direct form ``sum((x_k - y_k)**2)`` and the expanded form
``x @ x + y @ y - 2 x @ y`` are accumulated strictly left to right, and
``distance_sq_reference`` provides an almost exactly rounded value built from
error-free transformations.
"""

import math
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from snn_search.dataset import as_points, as_vector, center, column_mean
from snn_search.errors import DimensionMismatchError
from snn_search.indexer import half_norms, row_dots
from snn_search.query import QueryResult, check_radius, squared_norms

UNIT_ROUNDOFF = 2.0**-53
# Dekker's splitting constant for binary64, 2**27 + 1
_SPLITTER = 134217729.0


class DistanceFormula(Enum):
    DIRECT = "direct"
    EXPANDED = "expanded"


def gamma(k: int) -> float:
    """Relative error envelope ``k u / (1 - k u)`` of a length-``k`` accumulation."""
    ku = k * UNIT_ROUNDOFF
    return ku / (1 - ku)


def _prepare(points: ArrayLike, query: ArrayLike):
    pts = as_points(points)
    q = as_vector(query, pts.shape[1])
    if pts.shape[0] == 0:
        return pts, None
    mean = column_mean(pts)
    return center(pts, mean), q - mean


def _empty(candidates: int = 0) -> QueryResult:
    return QueryResult(np.empty(0, dtype=np.int64), np.empty(0), candidates)


def brute_force_loop(points: ArrayLike, query: ArrayLike, radius: float) -> QueryResult:
    """
    Exhaustive scan, one point at a time.

    Points are centered on their column mean and compared with
    ``x @ x / 2 - x @ x_q <= (R**2 - x_q @ x_q) / 2``.
    """
    radius = check_radius(radius)
    centered, xq = _prepare(points, query)
    if xq is None:
        return _empty()
    hn = half_norms(centered)
    sq_norm = float(squared_norms(xq[np.newaxis])[0])
    threshold = (radius * radius - sq_norm) / 2
    ids: list[int] = []
    dists: list[float] = []
    for i in range(centered.shape[0]):
        lhs = float(hn[i]) - float(row_dots(centered[i : i + 1], xq)[0])
        if lhs <= threshold:
            ids.append(i)
            dists.append(math.sqrt(max(0.0, 2.0 * lhs + sq_norm)))
    return QueryResult(
        np.array(ids, dtype=np.int64),
        np.array(dists, dtype=np.float64),
        centered.shape[0],
    )


def brute_force_matvec(
    points: ArrayLike, query: ArrayLike, radius: float
) -> QueryResult:
    """Exhaustive scan with all inner products taken in one vectorized call."""
    radius = check_radius(radius)
    centered, xq = _prepare(points, query)
    if xq is None:
        return _empty()
    lhs = half_norms(centered) - row_dots(centered, xq)
    sq_norm = float(squared_norms(xq[np.newaxis])[0])
    mask = lhs <= (radius * radius - sq_norm) / 2
    dists = np.sqrt(np.maximum(0.0, 2.0 * lhs[mask] + sq_norm))
    return QueryResult(np.flatnonzero(mask).astype(np.int64), dists, centered.shape[0])


def brute_force_l1(points: ArrayLike, query: ArrayLike, radius: float) -> QueryResult:
    """Exhaustive Manhattan-distance scan on the raw (uncentered) points."""
    radius = check_radius(radius)
    pts = as_points(points)
    q = as_vector(query, pts.shape[1])
    dist = np.abs(pts - q).sum(axis=1)
    mask = dist <= radius
    return QueryResult(np.flatnonzero(mask).astype(np.int64), dist[mask], pts.shape[0])


def _pair_arrays(x: ArrayLike, y: ArrayLike) -> tuple[NDArray, NDArray]:
    xs = np.atleast_2d(np.asarray(x, dtype=np.float64))
    ys = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if xs.shape != ys.shape:
        raise DimensionMismatchError(xs.shape[-1], ys.shape[-1])
    # column-major so that each coordinate is contiguous across pairs
    return np.ascontiguousarray(xs.T), np.ascontiguousarray(ys.T)


def _dot_left_to_right(xt: NDArray, yt: NDArray) -> NDArray:
    acc = xt[0] * yt[0]
    for k in range(1, xt.shape[0]):
        acc = acc + xt[k] * yt[k]
    return acc


def distance_sq_pairs(x: ArrayLike, y: ArrayLike, variant: DistanceFormula) -> NDArray:
    """
    Squared distance between row pairs ``x[i]``, ``y[i]``.

    Vectorized over pairs only; every pair sees exactly the left-to-right
    operation sequence of the scalar formula (numpy ufuncs do not contract
    multiply-add).
    """
    xt, yt = _pair_arrays(x, y)
    if variant is DistanceFormula.DIRECT:
        acc = np.zeros(xt.shape[1])
        for k in range(xt.shape[0]):
            diff = xt[k] - yt[k]
            acc = acc + diff * diff
        return acc
    xx = _dot_left_to_right(xt, xt)
    yy = _dot_left_to_right(yt, yt)
    xy = _dot_left_to_right(xt, yt)
    return (xx + yy) - 2.0 * xy


def distance_sq(x: ArrayLike, y: ArrayLike, variant: DistanceFormula) -> float:
    """
    Squared distance of two vectors by the given formula. The expanded form
    may come out slightly negative for (nearly) identical inputs; the raw
    value is returned.
    """
    xv = as_vector(x)
    yv = as_vector(y, xv.shape[0])
    return float(distance_sq_pairs(xv, yv, variant)[0])


def _split(a: NDArray) -> tuple[NDArray, NDArray]:
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_sum(a: NDArray, b: NDArray) -> tuple[NDArray, NDArray]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_product(a: NDArray, b: NDArray) -> tuple[NDArray, NDArray]:
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def distance_sq_reference_parts(x: ArrayLike, y: ArrayLike) -> tuple[NDArray, NDArray]:
    """
    Squared distances per row pair as unevaluated sums ``hi + lo`` with
    ``|lo| <= ulp(hi) / 2``, accurate to far below one rounding of ``hi``.

    Each difference is split exactly into ``diff + err``; ``diff**2`` is
    split exactly into a product and its error, the products are accumulated
    with a cascaded two-sum and every error term is collected separately.
    """
    xt, yt = _pair_arrays(x, y)
    total = np.zeros(xt.shape[1])
    carry = np.zeros(xt.shape[1])
    for k in range(xt.shape[0]):
        diff, diff_err = _two_sum(xt[k], -yt[k])
        sq, sq_err = _two_product(diff, diff)
        total, sum_err = _two_sum(total, sq)
        diff_sq_err = 2.0 * diff * diff_err + diff_err * diff_err
        carry = carry + (sum_err + sq_err + diff_sq_err)
    return _two_sum(total, carry)


def distance_sq_reference(x: ArrayLike, y: ArrayLike) -> NDArray:
    """Squared distances per row pair, rounded once from the compensated value."""
    hi, _ = distance_sq_reference_parts(x, y)
    return hi
