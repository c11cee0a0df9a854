"""
DBSCAN on top of a radius-query backend, plus NMI scoring.

Neighborhoods are closed balls that contain the point itself. The scan order
is fixed (ascending id, FIFO seed expansion), so the labeling only depends on
the neighborhoods, and the SNN and brute-force backends agree exactly.
"""

import logging
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field
from sklearn.metrics import normalized_mutual_info_score

from snn_search.dataset import as_points
from snn_search.errors import DataError
from snn_search.indexer import build_index
from snn_search.oracle import brute_force_matvec
from snn_search.query import query_radius_all

log = logging.getLogger(__name__)

NOISE = -1
_UNVISITED = -2


class Backend(StrEnum):
    SNN = "snn"
    BRUTEFORCE = "bruteforce"


class DbscanParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    eps: float = Field(gt=0)
    min_samples: int = Field(default=5, ge=1)
    backend: Backend = Backend.SNN


@dataclass(frozen=True, eq=False)
class Labeling:
    """
    Cluster id per point (``NOISE`` for noise); ids are dense in
    ``[0, n_clusters)``.
    """

    labels: NDArray[np.int64]
    n_clusters: int

    @property
    def n_noise(self) -> int:
        return int((self.labels == NOISE).sum())

    def __len__(self) -> int:
        return self.labels.shape[0]


def neighborhoods(
    points: ArrayLike, eps: float, backend: Backend
) -> list[NDArray[np.int64]]:
    """Ids within ``eps`` of every point (itself included), ascending."""
    pts = as_points(points)
    if backend is Backend.SNN:
        return [res.ids for res in query_radius_all(build_index(pts), eps)]
    return [brute_force_matvec(pts, pts[i], eps).ids for i in range(pts.shape[0])]


def cluster_neighborhoods(
    nbrs: Sequence[NDArray[np.int64]],
    min_samples: int,
    order: Sequence[int] | None = None,
) -> Labeling:
    """
    Label points given their neighborhoods.

    Args:
        nbrs: Neighborhood of every point, the point itself included.
        min_samples: Neighborhood size that makes a point a core point.
        order: Order in which points are considered as cluster seeds.
               Defaults to ascending id. Only border assignments depend on it.
    """
    n = len(nbrs)
    core = np.fromiter((len(nb) >= min_samples for nb in nbrs), dtype=bool, count=n)
    labels = np.full(n, _UNVISITED, dtype=np.int64)
    cluster = 0
    for i in (range(n) if order is None else order):
        if labels[i] != _UNVISITED:
            continue
        if not core[i]:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        seeds = deque(nbrs[i].tolist())
        while seeds:
            j = seeds.popleft()
            if labels[j] == NOISE:
                # only non-core points are ever marked noise: border point
                labels[j] = cluster
                continue
            if labels[j] != _UNVISITED:
                continue
            labels[j] = cluster
            if core[j]:
                seeds.extend(nbrs[j].tolist())
        cluster += 1
    return Labeling(labels, cluster)


def dbscan(points: ArrayLike, params: DbscanParams) -> Labeling:
    """Cluster ``points`` with the neighborhood queries of ``params.backend``."""
    pts = as_points(points)
    if pts.shape[0] == 0:
        raise DataError("empty dataset")
    nbrs = neighborhoods(pts, params.eps, params.backend)
    labeling = cluster_neighborhoods(nbrs, params.min_samples)
    log.debug(
        "DBSCAN(eps=%g, min_samples=%d, backend=%s): %d clusters, %d noise points",
        params.eps,
        params.min_samples,
        params.backend,
        labeling.n_clusters,
        labeling.n_noise,
    )
    return labeling


def _labels(labeling: Labeling | ArrayLike) -> NDArray[np.int64]:
    if isinstance(labeling, Labeling):
        return labeling.labels
    return np.asarray(labeling, dtype=np.int64)


def nmi(a: Labeling | ArrayLike, b: Labeling | ArrayLike) -> float:
    """
    Normalized mutual information ``I(a; b) / sqrt(H(a) H(b))``.

    Noise is scored as an ordinary category. Two single-cluster labelings score
    1; otherwise a zero entropy on either side scores 0.
    """
    la, lb = _labels(a), _labels(b)
    if la.shape != lb.shape:
        raise DataError(f"labelings differ in length: {la.shape[0]} vs {lb.shape[0]}")
    if la.shape[0] == 0:
        raise DataError("cannot score empty labelings")
    score = normalized_mutual_info_score(la, lb, average_method="geometric")
    return min(1.0, max(0.0, float(score)))
