"""
Return-ratio benchmark on synthetic data.

For every radius the benchmark reports the fraction of points returned per
query, the fraction of points inside the candidate band and mean timings.
Self-query runs (every indexed point queried against the index) do not count
a query's match with itself: the ratio is ``sum(hits - 1) / (n * (n - 1))``.
Out-of-sample runs draw ``n_queries`` fresh points from the same distribution
(seed + 1) and report ``sum(hits) / (n_queries * n)``.
"""

import logging
import time
from typing import Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from snn_search.dataset import PointMatrix
from snn_search.indexer import build_index
from snn_search.oracle import brute_force_matvec
from snn_search.query import (
    DEFAULT_CHUNK_SIZE,
    QueryResult,
    query_radius_all,
    query_radius_many,
)
from snn_search.synthetic import blob_points, uniform_points

log = logging.getLogger(__name__)


class BenchConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    synthetic: Literal["uniform", "blob"] = "uniform"
    n: int = Field(ge=1)
    d: int = Field(ge=1)
    s: float = Field(default=1.0, gt=0, le=1)
    seed: int = Field(default=0, ge=0)
    radii: tuple[float, ...] = Field(min_length=1)
    self_query: bool = False
    n_queries: int = Field(default=1000, ge=1)
    bruteforce: bool = False
    workers: int = Field(default=1, ge=1)
    chunk_size: int = Field(default=DEFAULT_CHUNK_SIZE, ge=1)

    @field_validator("radii")
    @classmethod
    def _nonnegative(cls, radii: tuple[float, ...]) -> tuple[float, ...]:
        for radius in radii:
            if radius < 0:
                raise ValueError(f"negative radius: {radius}")
        return radii

    @model_validator(mode="after")
    def _self_query_size(self) -> Self:
        if self.self_query and self.n < 2:
            raise ValueError("self-query benchmark needs at least 2 points")
        return self


class BenchRow(BaseModel):
    """
    Result for one radius. ``hits`` and ``candidates`` are totals over all
    queries (self matches included); timings are in seconds, query times per query.
    """

    radius: float
    queries: int
    hits: int
    candidates: int
    return_ratio: float
    candidate_ratio: float
    index_time_s: float
    query_time_s: float
    bruteforce_time_s: float | None = None


def generate(config: BenchConfig, n: int, seed: int) -> PointMatrix:
    if config.synthetic == "blob":
        return blob_points(n, config.d, config.s, seed)
    return uniform_points(n, config.d, seed)


def _other_hits(qid: int, res: QueryResult) -> int:
    pos = int(np.searchsorted(res.ids, qid))
    is_self = pos < len(res) and res.ids[pos] == qid
    return len(res) - int(is_self)


def return_ratio(results: list[QueryResult], n: int, self_query: bool) -> float:
    """
    Mean fraction of points returned per query. With ``self_query`` the
    result for id ``i`` is ``results[i]`` and its own match is not counted.
    """
    if self_query:
        hits = sum(_other_hits(qid, res) for qid, res in enumerate(results))
        return hits / (len(results) * (n - 1))
    return sum(len(res) for res in results) / (len(results) * n)


def run_bench(config: BenchConfig) -> list[BenchRow]:
    """Run the benchmark described by ``config``, one row per radius."""
    points = generate(config, config.n, config.seed)
    start = time.perf_counter()
    idx = build_index(points)
    index_time = time.perf_counter() - start
    queries = None
    if not config.self_query:
        queries = generate(config, config.n_queries, config.seed + 1)
    n_queries = config.n if config.self_query else config.n_queries

    rows = []
    for radius in config.radii:
        start = time.perf_counter()
        if queries is None:
            results = query_radius_all(
                idx, radius, chunk_size=config.chunk_size, workers=config.workers
            )
        else:
            results = query_radius_many(
                idx,
                queries,
                radius,
                chunk_size=config.chunk_size,
                workers=config.workers,
            )
        query_time = (time.perf_counter() - start) / n_queries

        bruteforce_time = None
        if config.bruteforce:
            query_rows = points if queries is None else queries
            start = time.perf_counter()
            for q in query_rows:
                brute_force_matvec(points, q, radius)
            bruteforce_time = (time.perf_counter() - start) / n_queries

        candidates = sum(res.candidates for res in results)
        row = BenchRow(
            radius=radius,
            queries=n_queries,
            hits=sum(len(res) for res in results),
            candidates=candidates,
            return_ratio=return_ratio(results, config.n, config.self_query),
            candidate_ratio=candidates / (n_queries * config.n),
            index_time_s=index_time,
            query_time_s=query_time,
            bruteforce_time_s=bruteforce_time,
        )
        log.debug("Bench R=%g: %s", radius, row)
        rows.append(row)
    return rows
