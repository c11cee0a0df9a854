"""
Reductions from other similarity measures to Euclidean radius queries.

* cosine distance on unit vectors: ``1 - u @ v <= rc``  iff  ``|u - v| <= sqrt(2 rc)``
* angle on unit vectors: ``angle <= theta``  iff  ``|u - v| <= sqrt(2 - 2 cos theta)``
* maximum inner product: append ``sqrt(xi**2 - |p|**2)`` as a leading
  coordinate (``xi`` the largest row norm) and a leading zero to queries;
  the nearest augmented point then has the largest inner product.
* Manhattan: ``|x|_2 <= |x|_1``, so the Euclidean score band is still a
  superset; candidates are filtered by their exact L1 distance.

Normalization is never applied silently, use ``normalize_rows``.
"""

import math
from enum import StrEnum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from snn_search.dataset import PointMatrix, Vector, as_points, as_vector
from snn_search.errors import DataError, ParameterError
from snn_search.indexer import SnnIndex, append_point, row_dots
from snn_search.query import (
    DEFAULT_CHUNK_SIZE,
    QueryResult,
    candidate_range,
    check_radius,
    map_chunks,
    query_radius,
)

UNIT_NORM_TOLERANCE = 1e-6


class MetricKind(StrEnum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"
    ANGULAR = "angular"
    MIPS = "mips"
    MANHATTAN = "manhattan"

    @property
    def needs_unit_rows(self) -> bool:
        return self in (MetricKind.COSINE, MetricKind.ANGULAR)


class MetricSpec(BaseModel):
    """
    A similarity measure together with a radius in its native unit
    (cosine distance in ``[0, 2]``, angle in ``[0, pi]``, L1/L2 radius ``>= 0``).
    ``xi`` is the largest row norm of a MIPS-transformed dataset.
    """

    model_config = ConfigDict(frozen=True)

    kind: MetricKind = MetricKind.EUCLIDEAN
    parameter: float = Field(default=0.0, ge=0)
    xi: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_native_range(self) -> "MetricSpec":
        if self.kind is MetricKind.COSINE and self.parameter > 2:
            raise ValueError(
                f"cosine radius must lie in [0, 2], got {self.parameter}"
            )
        if self.kind is MetricKind.ANGULAR and self.parameter > math.pi:
            raise ValueError(
                f"angular radius must lie in [0, pi], got {self.parameter}"
            )
        return self


def cosine_radius_to_euclidean(rc: float) -> float:
    """Euclidean radius equivalent to cosine distance ``rc`` on unit vectors."""
    if not 0 <= rc <= 2:
        raise ParameterError(f"cosine radius must lie in [0, 2], got {rc}")
    return math.sqrt(2 * rc)


def angular_radius_to_euclidean(theta: float) -> float:
    """
    Euclidean radius equivalent to angle ``theta`` on unit vectors. Evaluated
    as ``2 sin(theta / 2)``, which equals ``sqrt(2 - 2 cos theta)`` without
    the cancellation near 0.
    """
    if not 0 <= theta <= math.pi:
        raise ParameterError(f"angular radius must lie in [0, pi], got {theta}")
    return 2 * math.sin(theta / 2)


def normalize_rows(points: ArrayLike) -> PointMatrix:
    """Scale every row to unit Euclidean norm."""
    pts = as_points(points)
    norms = np.linalg.norm(pts, axis=1)
    if (norms == 0).any():
        row = int(np.flatnonzero(norms == 0)[0])
        raise DataError(f"cannot normalize zero vector (row {row})")
    return as_points(pts / norms[:, np.newaxis])


def require_unit_rows(
    points: PointMatrix, tol: float = UNIT_NORM_TOLERANCE
) -> PointMatrix:
    """Raise ``DataError`` unless every row norm is within ``tol`` of 1."""
    deviation = np.abs(np.linalg.norm(points, axis=1) - 1)
    if deviation.shape[0] and deviation.max() > tol:
        row = int(np.argmax(deviation))
        raise DataError(
            f"row {row} has norm {1 + deviation[row]:g} (±{tol:g} required); "
            "normalize the data for cosine/angular search"
        )
    return points


def mips_transform(points: ArrayLike) -> tuple[PointMatrix, float]:
    """
    Lift points into ``d + 1`` dimensions so that every row has norm ``xi``.

    Returns:
        Tuple of the augmented points and ``xi = max_i |p_i|``.
    """
    pts = as_points(points)
    if pts.shape[0] == 0:
        raise DataError("empty dataset")
    sq_norms = np.einsum("ij,ij->i", pts, pts)
    xi = math.sqrt(float(sq_norms.max()))
    lead = np.sqrt(np.maximum(0.0, xi * xi - sq_norms))
    return as_points(np.hstack((lead[:, np.newaxis], pts))), xi


def mips_query_transform(query: ArrayLike) -> Vector:
    """Prepend a zero coordinate."""
    q = as_vector(query)
    return as_vector(np.concatenate(([0.0], q)))


def append_mips_point(idx: SnnIndex, point: ArrayLike, xi: float) -> SnnIndex:
    """
    Append a raw point to an index over MIPS-transformed data.

    Raises:
        DataError: If the point is longer than ``xi``; it could not be lifted
                   onto the sphere of radius ``xi``.
    """
    p = as_vector(point, idx.d - 1)
    sq_norm = float(p @ p)
    if math.sqrt(sq_norm) > xi:
        raise DataError(
            f"point norm {math.sqrt(sq_norm):g} exceeds xi={xi:g} of the MIPS index"
        )
    lead = math.sqrt(max(0.0, xi * xi - sq_norm))
    return append_point(idx, np.concatenate(([lead], p)))


def _manhattan_centered(
    idx: SnnIndex, xq: NDArray[np.float64], radius: float
) -> QueryResult:
    score = float(row_dots(xq[np.newaxis], idx.direction)[0])
    band = candidate_range(idx, score, radius, float(np.linalg.norm(xq)))
    block = idx.sorted_points[band.lo : band.hi]
    dist = np.abs(block - xq).sum(axis=1)
    mask = dist <= radius
    ids = idx.perm[band.lo + np.flatnonzero(mask)]
    order = np.argsort(ids, kind="stable")
    return QueryResult(ids[order], dist[mask][order], len(band))


def manhattan_query(idx: SnnIndex, query: ArrayLike, radius: float) -> QueryResult:
    """
    All indexed points within L1 distance ``radius`` of ``query``.

    The Euclidean score band for ``radius`` is a superset of the L1 ball;
    its members are filtered by their exact L1 distance.
    """
    radius = check_radius(radius)
    return _manhattan_centered(idx, as_vector(query, idx.d) - idx.mean, radius)


def manhattan_query_many(
    idx: SnnIndex,
    queries: ArrayLike,
    radius: float,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int = 1,
) -> list[QueryResult]:
    """``manhattan_query`` for every row, in chunks and optionally threaded."""
    radius = check_radius(radius)
    centered = as_points(queries, idx.d) - idx.mean

    def run(part: slice) -> list[QueryResult]:
        return [_manhattan_centered(idx, xq, radius) for xq in centered[part]]

    return map_chunks(run, centered.shape[0], chunk_size, workers)


def euclidean_radius(spec: MetricSpec) -> float:
    """The Euclidean search radius matching ``spec``'s native radius."""
    match spec.kind:
        case MetricKind.EUCLIDEAN | MetricKind.MANHATTAN:
            return check_radius(spec.parameter)
        case MetricKind.COSINE:
            return cosine_radius_to_euclidean(spec.parameter)
        case MetricKind.ANGULAR:
            return angular_radius_to_euclidean(spec.parameter)
        case MetricKind.MIPS:
            raise ParameterError(
                "maximum inner product search has no radius semantics; "
                "use the transformed data with a nearest point scan"
            )


def prepare_points(
    points: ArrayLike, spec: MetricSpec
) -> tuple[PointMatrix, MetricSpec]:
    """
    Turn a dataset into the Euclidean dataset to index for ``spec``.

    Returns:
        Tuple of the points to index and the spec (with ``xi`` filled in for MIPS).
    """
    pts = as_points(points)
    if spec.kind.needs_unit_rows:
        return require_unit_rows(pts), spec
    if spec.kind is MetricKind.MIPS:
        lifted, xi = mips_transform(pts)
        return lifted, spec.model_copy(update={"xi": xi})
    return pts, spec


def prepare_query(query: ArrayLike, spec: MetricSpec) -> Vector:
    q = as_vector(query)
    if spec.kind.needs_unit_rows:
        require_unit_rows(q[np.newaxis])
    if spec.kind is MetricKind.MIPS:
        return mips_query_transform(q)
    return q


def to_native_distance(
    dists: NDArray[np.float64], kind: MetricKind
) -> NDArray[np.float64]:
    """Convert Euclidean distances between unit vectors into ``kind``'s unit."""
    match kind:
        case MetricKind.COSINE:
            return dists * dists / 2
        case MetricKind.ANGULAR:
            return 2 * np.arcsin(np.minimum(1.0, dists / 2))
    return dists


def metric_query(idx: SnnIndex, query: ArrayLike, spec: MetricSpec) -> QueryResult:
    """
    Radius query in ``spec``'s metric against an index built from
    ``prepare_points``. Distances are reported in the native unit.
    """
    if spec.kind is MetricKind.MANHATTAN:
        return manhattan_query(idx, query, spec.parameter)
    radius = euclidean_radius(spec)
    res = query_radius(idx, prepare_query(query, spec), radius)
    native = to_native_distance(res.dists, spec.kind)
    return QueryResult(res.ids, native, res.candidates)


def brute_force_cosine(points: ArrayLike, query: ArrayLike, rc: float) -> set[int]:
    """Ids with cosine distance ``1 - p @ q <= rc`` (unit rows assumed)."""
    pts = as_points(points)
    q = as_vector(query, pts.shape[1])
    return set(np.flatnonzero(1 - pts @ q <= rc).tolist())


def unit_angles(points: ArrayLike, query: ArrayLike) -> NDArray[np.float64]:
    """Angles between unit rows and a unit query, ``2 atan2(|p - q|, |p + q|)``."""
    pts = as_points(points)
    q = as_vector(query, pts.shape[1])
    chord = np.linalg.norm(pts - q, axis=1)
    return 2 * np.arctan2(chord, np.linalg.norm(pts + q, axis=1))


def brute_force_angular(points: ArrayLike, query: ArrayLike, theta: float) -> set[int]:
    """Ids whose angle to ``query`` is at most ``theta`` (unit rows assumed)."""
    return set(np.flatnonzero(unit_angles(points, query) <= theta).tolist())
