"""
Fixed-radius queries against an ``SnnIndex``.

A query is scored like an indexed point, the candidate band
``|score - query score| <= R`` is located by binary search, and the band is
filtered with the expanded distance form

    half_norm[j] - x_j @ x_q <= (R**2 - x_q @ x_q) / 2

over the contiguous block. That comparison is the only radius test; reported
distances are derived from the same inner products. Every path takes those
products through ``row_dots``, so single, batched and chunked queries agree
bit for bit.
"""

import logging
import math
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from snn_search.dataset import as_points, as_vector
from snn_search.errors import ParameterError
from snn_search.indexer import SnnIndex, half_norms, row_dots

log = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 256
# relative widening of the candidate band
BAND_SLACK = 1e-12


@dataclass(frozen=True)
class CandidateRange:
    """Half-open range ``[lo, hi)`` of sorted positions inside the score band."""

    lo: int
    hi: int

    def __len__(self) -> int:
        return self.hi - self.lo


@dataclass(frozen=True, eq=False)
class QueryResult:
    """
    Points within the radius, by ascending original id.

    ``candidates`` is the size of the score band that was examined.
    """

    ids: NDArray[np.int64]
    dists: NDArray[np.float64]
    candidates: int = 0

    @property
    def hits(self) -> list[tuple[int, float]]:
        return [(int(i), float(dist)) for i, dist in zip(self.ids, self.dists)]

    def id_set(self) -> set[int]:
        return set(self.ids.tolist())

    def __len__(self) -> int:
        return self.ids.shape[0]


def check_radius(radius: float) -> float:
    radius = float(radius)
    if not radius >= 0:
        raise ParameterError(f"negative radius: {radius}")
    if not np.isfinite(radius):
        raise ParameterError(f"radius must be finite, got {radius}")
    return radius


def squared_norms(rows: NDArray[np.float64]) -> NDArray[np.float64]:
    """``x @ x`` per row, computed exactly like the stored half norms."""
    return 2.0 * half_norms(rows)


def candidate_range(
    idx: SnnIndex, score: float, radius: float, query_norm: float = 0.0
) -> CandidateRange:
    """
    Locate the sorted positions ``j`` with ``|scores[j] - score| <= radius``.

    Both band edges are inclusive. The band is widened by
    ``BAND_SLACK * (radius + query_norm + idx.max_norm)``, which bounds the
    rounding error of computed scores, so a neighbor lying exactly on the
    sphere is never pruned. The returned range is therefore a superset of the
    exact score band: it may also hold positions whose score differs from
    ``score`` by up to ``radius`` plus that slack. Such extra candidates are
    rejected by the radius test that follows.
    """
    radius = check_radius(radius)
    reach = radius + BAND_SLACK * (radius + query_norm + idx.max_norm)
    lo = int(np.searchsorted(idx.scores, score - reach, side="left"))
    hi = int(np.searchsorted(idx.scores, score + reach, side="right"))
    return CandidateRange(lo, max(lo, hi))


def filter_band(
    idx: SnnIndex,
    band: CandidateRange,
    lhs: NDArray[np.float64],
    query_sq_norm: float,
    radius: float,
) -> QueryResult:
    """
    Apply the expanded-form radius test to ``lhs = half_norm - x @ x_q`` over
    ``band`` and assemble the result.
    """
    mask = lhs <= (radius * radius - query_sq_norm) / 2
    positions = band.lo + np.flatnonzero(mask)
    ids = idx.perm[positions]
    dists = np.sqrt(np.maximum(0.0, 2.0 * lhs[mask] + query_sq_norm))
    order = np.argsort(ids, kind="stable")
    return QueryResult(ids[order], dists[order], len(band))


def query_radius(idx: SnnIndex, query: ArrayLike, radius: float) -> QueryResult:
    """
    All indexed points within Euclidean distance ``radius`` of ``query``
    (boundary included).
    """
    radius = check_radius(radius)
    xq = as_vector(query, idx.d) - idx.mean
    return _query_centered_batch(idx, xq[np.newaxis], radius)[0]


def _query_centered_batch(
    idx: SnnIndex, centered: NDArray[np.float64], radius: float
) -> list[QueryResult]:
    """
    Batch query for already centered query rows.

    The block of the union of all candidate bands is multiplied with every
    query column by ``row_dots``; each query then filters its own band.
    """
    if centered.shape[0] == 0:
        return []
    scores = row_dots(centered, idx.direction)
    sq_norms = squared_norms(centered)
    bands = [
        candidate_range(idx, float(score), radius, math.sqrt(sq_norm))
        for score, sq_norm in zip(scores, sq_norms)
    ]
    lo = min(band.lo for band in bands)
    hi = max(band.hi for band in bands)
    if hi <= lo:
        return [QueryResult(*_empty_arrays(), 0) for _ in bands]
    block = idx.sorted_points[lo:hi]
    products = np.column_stack([row_dots(block, xq) for xq in centered])
    lhs_all = idx.half_norms[lo:hi, np.newaxis] - products
    return [
        filter_band(
            idx,
            band,
            lhs_all[band.lo - lo : band.hi - lo, k],
            float(sq_norms[k]),
            radius,
        )
        for k, band in enumerate(bands)
    ]


def _empty_arrays() -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    return np.empty(0, dtype=np.int64), np.empty(0)


def query_radius_batch(
    idx: SnnIndex, queries: ArrayLike, radius: float
) -> list[QueryResult]:
    """
    Answer every row of ``queries``; element ``k`` matches
    ``query_radius(idx, queries[k], radius)`` exactly.

    One union candidate range serves the whole batch, so callers with widely
    dispersed queries are better served by ``query_radius_many`` or single
    queries.
    """
    radius = check_radius(radius)
    q = as_points(queries, idx.d)
    return _query_centered_batch(idx, q - idx.mean, radius)


def _chunks(n: int, chunk_size: int) -> Iterator[slice]:
    for start in range(0, n, chunk_size):
        yield slice(start, min(n, start + chunk_size))


def map_chunks[T](
    run: Callable[[slice], list[T]], n: int, chunk_size: int, workers: int
) -> list[T]:
    """
    Call ``run`` on consecutive slices of ``range(n)`` and concatenate the
    results in slice order. With ``workers > 1`` the slices are handed to a
    thread pool.

    Raises:
        ParameterError: For a chunk size or worker count below one.
    """
    if chunk_size < 1:
        raise ParameterError(f"chunk size must be at least 1, got {chunk_size}")
    if workers < 1:
        raise ParameterError(f"workers must be at least 1, got {workers}")
    slices = list(_chunks(n, chunk_size))
    log.debug("Running %d rows in %d chunks on %d workers", n, len(slices), workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunk_results = list(pool.map(run, slices))
    else:
        chunk_results = [run(part) for part in slices]
    return [res for chunk in chunk_results for res in chunk]


def _run_sorted_chunks(
    idx: SnnIndex,
    centered: NDArray[np.float64],
    order: NDArray[np.int64],
    radius: float,
    chunk_size: int,
    workers: int,
) -> list[QueryResult]:
    """
    Batch-query ``centered`` in chunks of consecutive score order and return
    results in the original row order.
    """

    def run(part: slice) -> list[QueryResult]:
        return _query_centered_batch(idx, centered[order[part]], radius)

    flat = map_chunks(run, order.shape[0], chunk_size, workers)
    results: list[QueryResult | None] = [None] * centered.shape[0]
    for row, res in zip(order, flat):
        results[row] = res
    return results


def query_radius_many(
    idx: SnnIndex,
    queries: ArrayLike,
    radius: float,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int = 1,
) -> list[QueryResult]:
    """
    Answer many, possibly dispersed queries: they are ordered by score, cut
    into chunks that are each answered as one batch, optionally on a thread
    pool. The output order always follows the input rows.
    """
    radius = check_radius(radius)
    q = as_points(queries, idx.d)
    centered = q - idx.mean
    order = np.argsort(row_dots(centered, idx.direction), kind="stable")
    return _run_sorted_chunks(idx, centered, order, radius, chunk_size, workers)


def query_radius_all(
    idx: SnnIndex,
    radius: float,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int = 1,
) -> list[QueryResult]:
    """
    Query every indexed point against the index (self join).

    Returns:
        List indexed by original point id.
    """
    radius = check_radius(radius)
    in_sorted_order = _run_sorted_chunks(
        idx,
        idx.sorted_points,
        np.arange(idx.n),
        radius,
        chunk_size,
        workers,
    )
    results: list[QueryResult | None] = [None] * idx.n
    for pos, res in enumerate(in_sorted_order):
        results[idx.perm[pos]] = res
    return results
