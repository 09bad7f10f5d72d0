import numpy
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from auec import spectral
from auec.dataset import make_blobs
from auec.errors import DegenerateSpectrumError, DataError, NumericalError

def jacobi_eigenvalues(A, sweeps=100):
    """ cyclic Jacobi rotations until the off-diagonal part vanishes. """
    A = numpy.array(A, dtype='f8')
    n = len(A)
    V = numpy.eye(n)
    for sweep in range(sweeps):
        off = numpy.sqrt((numpy.tril(A, -1) ** 2).sum())
        if off < 1e-14 * numpy.sqrt((A ** 2).sum()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = numpy.sign(theta) / (abs(theta) + numpy.sqrt(theta ** 2 + 1))
                if theta == 0:
                    t = 1.0
                c = 1 / numpy.sqrt(t ** 2 + 1)
                s = t * c
                J = numpy.eye(n)
                J[p, p] = c
                J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T.dot(A).dot(J)
                V = V.dot(J)
    w = numpy.diag(A)
    order = numpy.argsort(w)
    return w[order], V[:, order]

def test_similarity():
    graph = spectral.similarity([[0., 0.], [0., 0.]], 1.0)
    assert graph.S[0, 1] == 1.0
    assert_array_equal(numpy.diag(graph.S), 0)

    graph = spectral.similarity([[0.], [1.]], 1.0)
    assert_allclose(graph.S[0, 1], 0.367879441171, rtol=1e-10)
    assert_allclose(graph.degrees, graph.S[0, 1])

    graph = spectral.similarity([[0.], [10.], [20.]], 50.)
    assert graph.S.max() < 1e-300
    Y = numpy.random.RandomState(0).normal(size=(10, 3))
    S = spectral.similarity(Y, 0.3).S
    assert_array_equal(S, S.T)
    assert ((S >= 0) & (S <= 1)).all()

    with pytest.raises(ValueError):
        spectral.similarity(Y, 0)
    with pytest.raises(ValueError):
        spectral.similarity([[numpy.nan], [0.]], 1.0)
    with pytest.raises(ValueError):
        spectral.similarity([[0.]], 1.0)

def test_median_gamma():
    # a regular simplex: every squared distance is 2
    assert spectral.median_gamma(numpy.eye(4)) == 0.25
    assert spectral.median_gamma(numpy.eye(40), sample_pairs=100, seed=3) == 0.25

    with pytest.raises(DataError):
        spectral.median_gamma(numpy.ones((5, 2)))

    Y = make_blobs(2, 30, 3, seed=1).values
    gamma = spectral.median_gamma(Y)
    assert gamma > 0 and numpy.isfinite(gamma)

def test_normalized_laplacian():
    graph = spectral.SimilarityGraph(numpy.array([[0., 1.], [1., 0.]]))
    L = spectral.normalized_laplacian(graph)
    assert_allclose(L, [[1, -1], [-1, 1]])
    assert_allclose(numpy.linalg.eigvalsh(L), [0, 2], atol=1e-15)

    S = numpy.zeros((4, 4))
    S[0, 1] = S[1, 0] = 0.5
    S[2, 3] = S[3, 2] = 0.7
    L = spectral.normalized_laplacian(spectral.SimilarityGraph(S))
    assert_allclose(numpy.linalg.eigvalsh(L)[:2], 0, atol=1e-14)

    Y = numpy.random.RandomState(1).normal(size=(12, 3))
    graph = spectral.similarity(Y, 0.5)
    L = spectral.normalized_laplacian(graph)
    assert_array_equal(L, L.T)
    assert_allclose(L.dot(graph.degrees ** 0.5), 0, atol=1e-12)

    with pytest.raises(NumericalError):
        spectral.normalized_laplacian(spectral.SimilarityGraph(numpy.zeros((3, 3))))

def test_smallest_eigenpairs():
    spectrum = spectral.smallest_eigenpairs(numpy.eye(4), 3)
    assert_allclose(spectrum.eigenvalues, [1, 1, 1])

    spectrum = spectral.smallest_eigenpairs(numpy.diag([0., 1., 2.]), 2)
    assert_allclose(spectrum.eigenvalues, [0, 1], atol=1e-15)
    assert_allclose(abs(spectrum.eigenvectors), [[1, 0], [0, 1], [0, 0]], atol=1e-12)
    assert spectrum.eigenvalue(1) == spectrum.eigenvalues[0]

    with pytest.raises(ValueError):
        spectral.smallest_eigenpairs(numpy.eye(3), 4)
    with pytest.raises(ValueError):
        spectral.smallest_eigenpairs([[0., 1.], [0., 0.]], 1)

def test_eigenpairs_jacobi_oracle():
    rng = numpy.random.RandomState(42)
    for i in range(100):
        n = rng.randint(2, 9)
        A = rng.normal(size=(n, n))
        A = A + A.T
        count = rng.randint(1, n + 1)
        w, V = jacobi_eigenvalues(A)
        spectrum = spectral.smallest_eigenpairs(A, count)
        assert_allclose(spectrum.eigenvalues, w[:count], rtol=0, atol=1e-9)
        U = spectrum.eigenvectors
        assert abs(U.T.dot(U) - numpy.eye(count)).max() < 1e-9

def test_spectrum_check():
    Y = numpy.random.RandomState(2).normal(size=(20, 2))
    L = spectral.normalized_laplacian(spectral.similarity(Y, 1.0))
    spectrum = spectral.smallest_eigenpairs(L, 20)
    spectrum.check(L)
    assert spectrum.eigenvalues[-1] <= 2 + 1e-8

    bad = spectral.LaplacianSpectrum(numpy.array([-0.5, 0.2]), numpy.eye(2))
    with pytest.raises(NumericalError):
        bad.check()
    bad = spectral.LaplacianSpectrum(numpy.array([0., 0.2]), numpy.ones((2, 2)))
    with pytest.raises(NumericalError):
        bad.check()

def test_psi_from_eigenvalues():
    assert spectral.psi_from_eigenvalues([0, 0, 0.5, 1.2], 2) == 0
    assert spectral.psi_from_eigenvalues([0, 0.2, 0.4], 2) == 0.5
    with pytest.raises(DegenerateSpectrumError):
        spectral.psi_from_eigenvalues([0, 0, 0, 0.5], 2)

def test_clustering_loss_blobs():
    data = make_blobs(2, 40, 3, spread=1.0, separation=20.0, seed=0)
    # kernel width on the scale of the clusters
    gamma = 1. / (2 * 3)
    psi, spectrum = spectral.clustering_loss(data, 2, gamma)
    assert psi < 0.05
    assert len(spectrum) == 3

def test_clustering_loss_degenerate():
    Y = numpy.array([[0.], [0.], [10.], [10.], [20.], [20.]])
    with pytest.raises(DegenerateSpectrumError):
        spectral.clustering_loss(Y, 2, 1.0)

def test_clustering_loss_separation_monotone():
    psis = []
    for separation in [2., 5., 10., 20.]:
        data = make_blobs(2, 30, 2, spread=1.0, separation=separation, seed=4)
        psis.append(spectral.clustering_loss(data, 2, 0.1)[0])
    assert (numpy.diff(psis) < 0).all()

def test_clustering_loss_scale_coupling():
    Y = numpy.random.RandomState(5).normal(size=(30, 4))
    psi, spectrum = spectral.clustering_loss(Y, 3, 0.5)
    psi2, spectrum2 = spectral.clustering_loss(2 * Y, 3, 0.5 / 4)
    assert psi == psi2
    assert_array_equal(spectrum.eigenvalues, spectrum2.eigenvalues)

def numerical_gradient(Y, K, gamma, h=1e-5):
    g = numpy.zeros_like(Y)
    for i in numpy.ndindex(Y.shape):
        Yp = Y.copy()
        Yp[i] += h
        Ym = Y.copy()
        Ym[i] -= h
        g[i] = (spectral.clustering_loss(Yp, K, gamma)[0]
              - spectral.clustering_loss(Ym, K, gamma)[0]) / (2 * h)
    return g

def test_gradient_check():
    rng = numpy.random.RandomState(11)
    checked = 0
    for i in range(50):
        K = [2, 3, 5][i % 3]
        Y = rng.normal(size=(40, 4))
        grad = spectral.clustering_loss_gradient(Y, K, 0.5)
        if grad is None:
            continue
        num = numerical_gradient(Y, K, 0.5)
        err = numpy.linalg.norm(grad - num) / numpy.linalg.norm(num)
        assert err < 1e-4, (i, K, err)
        checked += 1
    assert checked >= 45

def test_gradient_sums_to_zero():
    Y = numpy.random.RandomState(6).normal(size=(25, 3))
    psi, spectrum, grad = spectral.clustering_loss_and_gradient(Y, 3, 0.4)
    assert grad is not None
    assert_allclose(grad.sum(axis=0), 0, atol=1e-12 * abs(grad).max() * len(Y))
    assert_allclose(psi, spectral.clustering_loss(Y, 3, 0.4)[0], rtol=1e-12)

def test_gradient_symmetric_pair():
    Y = numpy.array([[0., 1.], [0., -1.]])
    grad = spectral.clustering_loss_gradient(Y, 1, 0.3)
    assert grad is not None
    assert_allclose(grad[0], -grad[1], atol=1e-15)

def test_gradient_first_eigenvalue_vanishes():
    Y = numpy.random.RandomState(7).normal(size=(15, 2))
    graph = spectral.similarity(Y, 0.5)
    L = spectral.normalized_laplacian(graph)
    spectrum = spectral.smallest_eigenpairs(L, 3)
    g1 = spectral.eigenvalue_gradient(Y, graph, spectrum, 1)
    g2 = spectral.eigenvalue_gradient(Y, graph, spectrum, 2)
    assert abs(g1).max() < 1e-10 * abs(g2).max()

def test_gradient_collision():
    # a complete graph of equal weights: lambda_2 = lambda_3 = 1.5
    Y = numpy.zeros((3, 2))
    psi, spectrum, grad = spectral.clustering_loss_and_gradient(Y, 2, 1.0)
    assert_allclose(spectrum.eigenvalues, [0, 1.5, 1.5], atol=1e-12)
    assert grad is None

def test_spectral_gap_heuristic():
    data = make_blobs(4, 15, 2, spread=0.5, separation=10.0, seed=8)
    K, spectrum = spectral.spectral_gap_heuristic(data, 8, 0.5)
    assert K == 4
    assert len(spectrum) == 9
