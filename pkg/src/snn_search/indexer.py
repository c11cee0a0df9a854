"""
Index construction: center the data, find the first principal direction,
score every point by its projection onto it and store the points sorted by
score together with their squared-and-halved norms.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from snn_search.dataset import (
    PointMatrix,
    Vector,
    as_points,
    as_vector,
    center,
    column_mean,
)
from snn_search.errors import DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SnnIndex:
    """
    Immutable search structure.

    ``sorted_points[i]`` is the centered point with original id ``perm[i]``;
    ``scores`` is nondecreasing and
    ``half_norms[i] = sorted_points[i] @ sorted_points[i] / 2``.
    ``sigma`` holds the singular values of the centered data (zero padded to
    ``d``), or ``None`` when the index was built along a caller-supplied
    direction.
    """

    mean: Vector
    direction: Vector
    sorted_points: PointMatrix
    scores: NDArray[np.float64]
    half_norms: NDArray[np.float64]
    perm: NDArray[np.int64]
    sigma: NDArray[np.float64] | None = None

    @property
    def n(self) -> int:
        return self.sorted_points.shape[0]

    @property
    def d(self) -> int:
        return self.sorted_points.shape[1]

    @property
    def sigma1(self) -> float:
        return float(self.sigma[0]) if self.sigma is not None else float("nan")

    @property
    def sigma2(self) -> float:
        if self.sigma is None:
            return float("nan")
        return float(self.sigma[1]) if self.sigma.shape[0] > 1 else 0.0

    @cached_property
    def max_norm(self) -> float:
        """Largest Euclidean norm of a centered point."""
        if self.n == 0:
            return 0.0
        return math.sqrt(2.0 * float(self.half_norms.max()))

    def __repr__(self) -> str:
        return f"SnnIndex(n={self.n}, d={self.d})"


def _readonly(*arrays: NDArray) -> None:
    for arr in arrays:
        if arr is not None:
            arr.setflags(write=False)


def half_norms(rows: PointMatrix) -> NDArray[np.float64]:
    """``x @ x / 2`` for every row ``x``."""
    return 0.5 * np.einsum("ij,ij->i", rows, rows)


def row_dots(rows: PointMatrix, v: Vector) -> NDArray[np.float64]:
    """
    ``x @ v`` for every row ``x``.

    All inner products between stored points and queries go through here. The
    value for a row is bit-identical no matter which other rows are passed
    along, so every query path makes the same decision on the sphere itself.
    """
    return np.einsum("ij,j->i", rows, v)


def principal_direction(centered: PointMatrix) -> tuple[Vector, NDArray[np.float64]]:
    """
    First right singular vector of the (mean-centered) data matrix.

    Uses the tall-skinny route: the triangular factor of a QR decomposition has
    the same singular values and right singular vectors as the data, so only
    a ``d x d`` SVD is needed.

    The sign is fixed so that the entry with the largest magnitude is positive
    (lowest index on ties). Data that is identically zero has no preferred
    direction; the first canonical unit vector is returned instead.

    Returns:
        Tuple of the unit direction and all ``d`` singular values (zero padded).
    """
    n, d = centered.shape
    if n == 0:
        raise DataError("empty dataset")
    sigma = np.zeros(d)
    if not centered.any():
        log.warning("Centered data is identically zero, falling back to e_1")
        direction = np.zeros(d)
        direction[0] = 1.0
        return direction, sigma

    r = np.linalg.qr(centered, mode="r")
    _, singular, vt = np.linalg.svd(r, full_matrices=False)
    sigma[: singular.shape[0]] = singular
    direction = vt[0] / np.linalg.norm(vt[0])
    if direction[int(np.argmax(np.abs(direction)))] < 0:
        direction = -direction
    return direction, sigma


def build_index(points: ArrayLike, direction: ArrayLike | None = None) -> SnnIndex:
    """
    Build the search index.

    Args:
        points: Dataset, one point per row.
        direction: Optional fixed sort direction (normalized here). Query results
                   do not depend on it, only the pruning efficiency does.
                   If omitted, the first principal direction is used.

    Returns:
        The index. Ties in score keep ascending original id order.

    Raises:
        DataError: For an empty or non-finite dataset.
    """
    points = as_points(points)
    mean = column_mean(points)
    centered = center(points, mean)
    if direction is None:
        v1, sigma = principal_direction(centered)
    else:
        v = as_vector(direction, points.shape[1])
        norm = np.linalg.norm(v)
        if norm == 0:
            raise DataError("sort direction must be nonzero")
        v1, sigma = v / norm, None

    scores = row_dots(centered, v1)
    order = np.argsort(scores, kind="stable")
    sorted_points = np.ascontiguousarray(centered[order])
    idx = SnnIndex(
        mean=mean,
        direction=v1,
        sorted_points=sorted_points,
        scores=scores[order],
        half_norms=half_norms(sorted_points),
        perm=order.astype(np.int64),
        sigma=sigma,
    )
    _readonly(v1, sorted_points, idx.scores, idx.half_norms, idx.perm, sigma)
    log.debug(
        "Built index over %d x %d points (sigma1=%g, sigma2=%g)",
        idx.n,
        idx.d,
        idx.sigma1,
        idx.sigma2,
    )
    return idx


def append_point(idx: SnnIndex, point: ArrayLike) -> SnnIndex:
    """
    Return a new index that also contains ``point`` with id ``idx.n``.

    The mean and direction stay frozen; the new point is centered with the
    stored mean and inserted after all points of equal score.
    """
    p = as_vector(point, idx.d)
    x = p - idx.mean
    score = float(row_dots(x[np.newaxis], idx.direction)[0])
    pos = int(np.searchsorted(idx.scores, score, side="right"))
    sorted_points = np.ascontiguousarray(np.insert(idx.sorted_points, pos, x, axis=0))
    new = SnnIndex(
        mean=idx.mean,
        direction=idx.direction,
        sorted_points=sorted_points,
        scores=np.insert(idx.scores, pos, score),
        half_norms=np.insert(idx.half_norms, pos, half_norms(x[np.newaxis])[0]),
        perm=np.insert(idx.perm, pos, idx.n),
        sigma=idx.sigma,
    )
    _readonly(new.sorted_points, new.scores, new.half_norms, new.perm)
    return new
