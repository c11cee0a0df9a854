"""
Seeded synthetic datasets.

All generators draw from ``numpy.random.Generator(PCG64(seed))``. PCG64's
bit stream is documented and platform independent, so ratios measured on
these datasets reproduce across machines.
"""

import numpy as np

from snn_search.dataset import PointMatrix, Vector, as_points, as_vector
from snn_search.errors import ParameterError


def seeded_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def uniform_points(n: int, d: int, seed: int) -> PointMatrix:
    """``n`` points drawn i.i.d. from the uniform distribution on ``[0, 1]^d``."""
    return as_points(seeded_rng(seed).random((n, d)))


def blob_points(n: int, d: int, s: float, seed: int) -> PointMatrix:
    """
    ``n`` points from the elongated Gaussian with mean 0 and standard deviation
    ``(1, s, ..., s)``.
    """
    if not s > 0:
        raise ParameterError(f"blob elongation must be positive, got {s}")
    scale = np.full(d, s)
    scale[0] = 1.0
    return as_points(seeded_rng(seed).standard_normal((n, d)) * scale)


def blob_query(c: float, d: int) -> Vector:
    """The deterministic query point ``[c, 0, ..., 0]``."""
    q = np.zeros(d)
    q[0] = c
    return as_vector(q)
