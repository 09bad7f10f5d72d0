from runtests.mpi import MPITest
from mpi4py import MPI

import itertools
import numpy
import pytest
from numpy.testing import assert_array_equal, assert_allclose

from auec import clustering
from auec.dataset import make_blobs
from auec.errors import ClusteringError
from auec.metrics import accuracy

def two_moons(n, noise=0.05, seed=0):
    rng = numpy.random.RandomState(seed)
    t = numpy.linspace(0, numpy.pi, n)
    upper = numpy.column_stack([numpy.cos(t), numpy.sin(t)])
    lower = numpy.column_stack([1 - numpy.cos(t), 0.5 - numpy.sin(t)])
    return numpy.concatenate([upper, lower]) + rng.normal(scale=noise, size=(2 * n, 2))

def dbscan_oracle(Z, eps, min_pts):
    """ components of the core points, borders to the lowest adjacent cluster """
    N = len(Z)
    d = numpy.sqrt(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(axis=-1))
    adjacent = d <= eps
    core = adjacent.sum(axis=1) >= min_pts
    component = numpy.arange(N)
    changed = True
    while changed:
        changed = False
        for i in numpy.nonzero(core)[0]:
            for j in numpy.nonzero(adjacent[i] & core)[0]:
                low = min(component[i], component[j])
                if component[i] != low or component[j] != low:
                    component[i] = component[j] = low
                    changed = True
    labels = numpy.full(N, -1)
    roots = sorted(set(component[core]))
    for k, root in enumerate(roots):
        labels[core & (component == root)] = k
    for i in numpy.nonzero(~core)[0]:
        near = labels[adjacent[i] & core]
        if len(near):
            labels[i] = near.min()
    return labels

def test_wcss():
    assert clustering.wcss([[0.], [2.]], [0, 0]) == 2.0
    assert clustering.wcss([[0.], [2.], [5.]], [0, 1, 2]) == 0.0

    Z = numpy.random.RandomState(0).normal(size=(20, 3))
    labels = numpy.arange(20) % 3
    # empty clusters contribute nothing
    a = clustering.ClusterAssignment(labels, 5)
    assert_allclose(clustering.wcss(Z, a), clustering.wcss(Z, labels))
    assert_allclose(clustering.wcss(Z + 1000., labels), clustering.wcss(Z, labels), rtol=1e-9)

    with pytest.raises(ValueError):
        clustering.wcss(Z, labels[:-1])
    with pytest.raises(ValueError):
        clustering.wcss([[0.], [1.]], [0, -1])

def test_assignment():
    with pytest.raises(ValueError):
        clustering.ClusterAssignment([0, 2], 2)
    with pytest.raises(ValueError):
        clustering.ClusterAssignment([0, -1], 2)
    a = clustering.ClusterAssignment([0, -1, 1, 1], 2, allow_noise=True)
    assert a.noise == 1
    assert_array_equal(a.sizes(), [1, 2])

def test_kmeans_exhaustive():
    rng = numpy.random.RandomState(1)
    Z = numpy.concatenate([rng.normal(size=(4, 2)), rng.normal(size=(4, 2)) + 5])
    best = numpy.inf
    for labels in itertools.product([0, 1], repeat=8):
        labels = numpy.array(labels)
        if labels.min() == labels.max():
            continue
        best = min(best, clustering.wcss(Z, labels))
    a = clustering.kmeans(Z, 2, restarts=10, seed=0)
    assert_allclose(clustering.wcss(Z, a), best, rtol=1e-12)

    # never below the optimum on unstructured data
    for i in range(5):
        Z = rng.uniform(size=(8, 2))
        a = clustering.kmeans(Z, 2, restarts=3, seed=i)
        best = min(clustering.wcss(Z, numpy.array(l)) for l in itertools.product([0, 1], repeat=8)
                   if min(l) != max(l))
        assert clustering.wcss(Z, a) >= best - 1e-12

def test_kmeans_singletons():
    Z = numpy.random.RandomState(2).normal(size=(6, 3))
    a = clustering.kmeans(Z, 6, restarts=2)
    assert clustering.wcss(Z, a) == 0
    assert_array_equal(numpy.sort(a.labels), numpy.arange(6))

def test_kmeans_duplicates():
    # fewer distinct points than clusters are filled by moving points
    Z = numpy.zeros((5, 2))
    a = clustering.kmeans(Z, 3, restarts=1)
    assert (a.sizes() > 0).all()

def test_kmeans_blobs():
    data = make_blobs(3, 50, 4, spread=1.0, separation=20.0, seed=3)
    a = clustering.kmeans(data, 3, restarts=5, seed=1)
    assert accuracy(data.labels, a.labels) == 1.0
    assert a.centroids.shape == (3, 4)
    assert (numpy.diff(a.wcss_history) <= 0).all()

def test_kmeans_preconditions():
    with pytest.raises(ValueError):
        clustering.kmeans(numpy.zeros((3, 2)), 4)
    with pytest.raises(ValueError):
        clustering.kmeans(numpy.zeros((3, 2)), 2, restarts=0)

@MPITest(commsize=(1, 2, 3))
def test_kmeans_ranks(comm):
    Z = numpy.random.RandomState(4).normal(size=(60, 3))
    a = clustering.kmeans(Z, 4, restarts=5, seed=2, comm=comm)
    b = clustering.kmeans(Z, 4, restarts=5, seed=2, comm=MPI.COMM_SELF)
    assert_array_equal(a.labels, b.labels)
    assert_array_equal(a.centroids, b.centroids)

def test_dbscan_trivial():
    a = clustering.dbscan(numpy.zeros((5, 2)), 0.1, 5)
    assert a.K == 1
    assert_array_equal(a.labels, 0)

    Z = numpy.array([[0.], [0.1], [0.2], [50.]])
    a = clustering.dbscan(Z, 0.5, 2)
    assert_array_equal(a.labels, [0, 0, 0, -1])

    with pytest.raises(ValueError):
        clustering.dbscan(Z, 0, 2)
    with pytest.raises(ValueError):
        clustering.dbscan(Z, 1., 0)

def test_dbscan_oracle():
    Z = two_moons(100, noise=0.08, seed=5)
    for eps, min_pts in [(0.1, 4), (0.15, 5), (0.3, 10)]:
        a = clustering.dbscan(Z, eps, min_pts)
        assert_array_equal(a.labels, dbscan_oracle(Z, eps, min_pts))

def test_dbscan_moons():
    Z = two_moons(100, noise=0.03, seed=6)
    a = clustering.dbscan(Z, 0.2, 4)
    assert a.K == 2
    assert a.noise == 0
    assert accuracy(numpy.repeat([0, 1], 100), a.labels) == 1.0

def test_dbscan_core_permutation():
    Z = two_moons(60, noise=0.05, seed=7)
    perm = numpy.random.RandomState(8).permutation(len(Z))
    a = clustering.dbscan(Z, 0.2, 5)
    b = clustering.dbscan(Z[perm], 0.2, 5)
    neighbors = (((Z[:, None] - Z[None, :]) ** 2).sum(axis=-1) <= 0.04).sum(axis=1)
    core = neighbors >= 5
    # same partition of the core points
    pairs_a = a.labels[core][:, None] == a.labels[core][None, :]
    inverse = numpy.argsort(perm)
    lb = b.labels[inverse]
    pairs_b = lb[core][:, None] == lb[core][None, :]
    assert_array_equal(pairs_a, pairs_b)

def test_mdbscan_passthrough():
    Z = numpy.array([[0.], [0.5], [1.], [10.], [10.5]])
    a = clustering.mdbscan(Z, 2, 0.6, 1)
    assert_array_equal(a.labels, [0, 0, 0, 1, 1])
    assert_allclose(a.centroids, [[0.5], [10.25]])

def test_mdbscan_merge_small():
    # sizes 5, 4, 1; the singleton is nearer to the cluster of four
    Z = numpy.array([0., 1., 2., 3., 4., 20., 21., 22., 23., 26.])[:, None]
    raw = clustering.dbscan(Z, 1.5, 1)
    assert_array_equal(raw.sizes(), [5, 4, 1])
    a = clustering.mdbscan(Z, 2, 1.5, 1)
    assert_array_equal(a.labels, [0] * 5 + [1] * 5)
    assert (a.sizes() > 0).all()

def test_mdbscan_noise():
    Z = numpy.array([0., 1., 2., 3., 4., 6., 20., 21., 22.])[:, None]
    raw = clustering.dbscan(Z, 1.5, 2)
    assert raw.labels[5] == -1
    a = clustering.mdbscan(Z, 2, 1.5, 2)
    assert_array_equal(a.labels, [0] * 6 + [1] * 3)
    assert a.noise == 0

def test_mdbscan_relabels_by_size():
    Z = numpy.array([0., 1., 10., 11., 12.])[:, None]
    a = clustering.mdbscan(Z, 2, 1.5, 1)
    assert_array_equal(a.labels, [1, 1, 0, 0, 0])

def test_mdbscan_insufficient():
    Z = numpy.array([[0.], [0.5], [1.]])
    with pytest.raises(ClusteringError, match='insufficient clusters'):
        clustering.mdbscan(Z, 2, 1.0, 1)

def test_mdbscan_blobs():
    data = make_blobs(3, 40, 2, spread=1.0, separation=20.0, seed=9)
    a = clustering.mdbscan(data, 3, 3.0, 5)
    assert accuracy(data.labels, a.labels) == 1.0
    # the knee lies on the scale of the blobs, not of their separation
    assert clustering.knee_eps(data, 10) < 5.0

def test_knee_eps():
    Z = numpy.concatenate([numpy.arange(20.)[:, None] * 0.1, [[10.], [30.]]])
    eps = clustering.knee_eps(Z, 2)
    assert_allclose(eps, 0.1)
    assert clustering.knee_eps(numpy.zeros((4, 2)), 2) > 0
    with pytest.raises(ValueError):
        clustering.knee_eps(Z, 40)

def test_save(tmp_path):
    a = clustering.ClusterAssignment([1, 0, 1], 2, centroids=numpy.array([[0.5], [0.25]]))
    clustering.save_assignment(str(tmp_path / 'labels.csv'), a)
    with open(str(tmp_path / 'labels.csv')) as ff:
        assert ff.read() == '0,1\n1,0\n2,1\n'
    clustering.save_centroids(str(tmp_path / 'centroids.csv'), a)
    assert_array_equal(numpy.loadtxt(str(tmp_path / 'centroids.csv'), delimiter=',', ndmin=2), a.centroids)
    with pytest.raises(ValueError):
        clustering.save_centroids(str(tmp_path / 'x.csv'), clustering.ClusterAssignment([0], 1))
