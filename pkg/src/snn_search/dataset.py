"""
In-memory point matrices and the column statistics every other module needs.

A point matrix is a read-only, C-contiguous ``float64`` numpy array of shape
``(n, d)`` with ``d >= 1``; row ``i`` is the point with original id ``i``.
Vectors are read-only ``float64`` arrays of shape ``(d,)``.
"""

import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.preprocessing import StandardScaler

from snn_search.errors import DataError, DimensionMismatchError, ParameterError

log = logging.getLogger(__name__)

type PointMatrix = NDArray[np.float64]
type Vector = NDArray[np.float64]


def _freeze(arr: NDArray) -> NDArray:
    arr.setflags(write=False)
    return arr


def as_points(values: ArrayLike, d: int | None = None) -> PointMatrix:
    """
    Validate and convert ``values`` into a point matrix.

    Args:
        values: Anything numpy can turn into a 2-D array of reals.
        d: Required feature dimension, if known.

    Returns:
        Read-only ``float64`` array of shape ``(n, d)``. ``n`` may be 0.

    Raises:
        DataError: If the array is not 2-D, has no columns or contains NaN/Inf.
        DimensionMismatchError: If ``d`` is given and does not match.
    """
    arr = np.array(values, dtype=np.float64, order="C", copy=True)
    if arr.ndim == 1 and arr.size == 0 and d is not None:
        arr = arr.reshape(0, d)
    if arr.ndim != 2:
        raise DataError(f"point matrix must be 2-D, got {arr.ndim}-D")
    if arr.shape[1] < 1:
        raise DataError("point matrix must have at least one column")
    if d is not None and arr.shape[1] != d:
        raise DimensionMismatchError(d, arr.shape[1], "points")
    if not np.isfinite(arr).all():
        raise DataError("point matrix contains NaN or infinite entries")
    return _freeze(arr)


def as_vector(values: ArrayLike, d: int | None = None) -> Vector:
    """Validate and convert ``values`` into a finite 1-D vector."""
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise DataError(f"vector must be 1-D, got {arr.ndim}-D")
    if d is not None and arr.shape[0] != d:
        raise DimensionMismatchError(d, arr.shape[0])
    if not np.isfinite(arr).all():
        raise DataError("vector contains NaN or infinite entries")
    return _freeze(arr)


def column_mean(points: PointMatrix) -> Vector:
    """Mean of every column. Raises ``DataError("empty dataset")`` for ``n = 0``."""
    if points.shape[0] == 0:
        raise DataError("empty dataset")
    return _freeze(points.mean(axis=0))


def center(points: PointMatrix, mean: Vector) -> PointMatrix:
    """Subtract ``mean`` from every row, keeping row order."""
    if mean.shape[0] != points.shape[1]:
        raise DimensionMismatchError(points.shape[1], mean.shape[0], "mean")
    return _freeze(np.ascontiguousarray(points - mean))


def zscore_standardize(points: PointMatrix) -> PointMatrix:
    """
    Shift every column to zero mean and scale it to unit population variance.

    Columns with zero variance are only centered, so they end up all zero.

    Raises:
        ParameterError: If there are fewer than two points.
    """
    if points.shape[0] < 2:
        raise ParameterError(
            "z-score standardization needs at least 2 points, "
            f"got {points.shape[0]}"
        )
    scaled = StandardScaler(with_mean=True, with_std=True).fit_transform(points)
    log.debug("Standardized %d x %d matrix", *points.shape)
    return _freeze(np.ascontiguousarray(scaled, dtype=np.float64))
