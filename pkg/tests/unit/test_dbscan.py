import numpy as np
import pytest
from pydantic import ValidationError

from snn_search.dbscan import (
    NOISE,
    Backend,
    DbscanParams,
    cluster_neighborhoods,
    dbscan,
    neighborhoods,
    nmi,
)
from snn_search.errors import DataError
from snn_search.indexer import build_index
from snn_search.query import query_radius


@pytest.fixture
def two_blobs():
    gen = np.random.default_rng(5)
    pts = np.vstack(
        [
            gen.normal(loc=(0.0, 0.0), scale=0.5, size=(500, 2)),
            gen.normal(loc=(10.0, 10.0), scale=0.5, size=(500, 2)),
        ]
    )
    truth = np.repeat([0, 1], 500)
    return pts, truth


@pytest.mark.parametrize("backend", Backend)
def test_two_blobs(two_blobs, backend):
    pts, truth = two_blobs
    labeling = dbscan(pts, DbscanParams(eps=1.0, min_samples=5, backend=backend))
    assert labeling.n_clusters == 2
    assert nmi(labeling, truth) >= 0.95
    assert set(labeling.labels.tolist()) <= {NOISE, 0, 1}


def test_sparse_grid_is_noise():
    xs, ys = np.meshgrid(np.arange(5) * 10.0, np.arange(5) * 10.0)
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    labeling = dbscan(pts, DbscanParams(eps=0.1, min_samples=5))
    assert labeling.n_clusters == 0
    assert labeling.n_noise == 25


def test_single_cluster_with_min_samples_one(rng):
    labeling = dbscan(rng.normal(size=(50, 3)), DbscanParams(eps=1e6, min_samples=1))
    assert labeling.n_clusters == 1
    assert not labeling.labels.any()


def test_backends_agree():
    for seed in range(50):
        gen = np.random.default_rng(seed)
        centers = gen.uniform(-5, 5, size=(3, 3))
        pts = np.vstack([gen.normal(loc=c, scale=0.6, size=(60, 3)) for c in centers])
        for eps in (0.3, 0.6, 1.0):
            snn = dbscan(pts, DbscanParams(eps=eps, min_samples=5, backend="snn"))
            brute = dbscan(pts, DbscanParams(eps=eps, min_samples=5, backend="bruteforce"))
            assert np.array_equal(snn.labels, brute.labels)
            assert snn.n_clusters == brute.n_clusters


def test_backends_agree_with_eps_on_a_reported_distance(rng):
    pts = rng.normal(size=(300, 6))
    eps = float(np.median(query_radius(build_index(pts), pts[0], 1.0).dists))
    from_index = neighborhoods(pts, eps, Backend.SNN)
    from_scan = neighborhoods(pts, eps, Backend.BRUTEFORCE)
    for a, b in zip(from_index, from_scan):
        assert np.array_equal(a, b)
    params = DbscanParams(eps=eps, min_samples=4)
    bruteforce = params.model_copy(update={"backend": Backend.BRUTEFORCE})
    assert np.array_equal(dbscan(pts, params).labels, dbscan(pts, bruteforce).labels)


def test_neighborhoods_include_self(rng):
    pts = rng.uniform(size=(100, 2))
    for backend in Backend:
        nbrs = neighborhoods(pts, 0.05, backend)
        assert all(i in nb.tolist() for i, nb in enumerate(nbrs))


def test_labels_are_dense(rng):
    pts = rng.uniform(size=(400, 2))
    labeling = dbscan(pts, DbscanParams(eps=0.05, min_samples=4))
    clusters = set(labeling.labels.tolist()) - {NOISE}
    assert clusters == set(range(labeling.n_clusters))


def test_core_partition_ignores_scan_order(rng):
    pts = rng.uniform(size=(300, 2))
    nbrs = neighborhoods(pts, 0.07, Backend.SNN)
    core = np.array([len(nb) >= 4 for nb in nbrs])
    forward = cluster_neighborhoods(nbrs, 4)
    backward = cluster_neighborhoods(nbrs, 4, order=range(len(nbrs) - 1, -1, -1))
    assert forward.n_clusters == backward.n_clusters
    assert nmi(forward.labels[core], backward.labels[core]) == pytest.approx(1.0)
    assert np.array_equal(forward.labels == NOISE, backward.labels == NOISE)


def test_border_point_joins_first_cluster():
    # two dense groups that share the border point 3
    nbrs = [
        np.array([0, 1, 2, 3]),
        np.array([0, 1, 2]),
        np.array([0, 1, 2]),
        np.array([0, 3, 4]),
        np.array([3, 4, 5, 6]),
        np.array([4, 5, 6]),
        np.array([4, 5, 6]),
    ]
    assert cluster_neighborhoods(nbrs, 4).labels.tolist() == [0, 0, 0, 0, 1, 1, 1]
    reversed_order = range(6, -1, -1)
    assert cluster_neighborhoods(nbrs, 4, order=reversed_order).labels.tolist() == [1, 1, 1, 0, 0, 0, 0]


def test_params_validation():
    with pytest.raises(ValidationError):
        DbscanParams(eps=0.0)
    with pytest.raises(ValidationError):
        DbscanParams(eps=1.0, min_samples=0)
    with pytest.raises(ValidationError):
        DbscanParams(eps=1.0, backend="kdtree")
    assert DbscanParams(eps=1.0).min_samples == 5


def test_empty_dataset():
    with pytest.raises(DataError):
        dbscan(np.empty((0, 2)), DbscanParams(eps=1.0))


@pytest.mark.parametrize(
    "a,b,expected",
    (
        ([0, 0, 1, 1], [0, 0, 1, 1], 1.0),
        ([0, 0, 1, 1], [1, 1, 0, 0], 1.0),
        ([0, 0, 1, 1], [0, 1, 0, 1], 0.0),
        ([3, 3, 3], [0, 0, 0], 1.0),
        ([0, 0, 0, 0], [0, 0, 1, 1], 0.0),
    ),
)
def test_nmi(a, b, expected):
    assert nmi(a, b) == pytest.approx(expected, abs=1e-12)


def test_nmi_symmetric(rng):
    a = rng.integers(-1, 4, size=200)
    b = rng.integers(-1, 6, size=200)
    assert nmi(a, b) == pytest.approx(nmi(b, a), abs=1e-12)
    assert 0 <= nmi(a, b) <= 1


def test_nmi_length_mismatch():
    with pytest.raises(DataError, match="differ in length"):
        nmi([0, 1], [0, 1, 1])
