"""
Spectral clusterability of a point cloud.

The points y_i are connected by the Gaussian similarity
``s_ij = exp(-gamma |y_i - y_j|^2)``; the normalized graph Laplacian is

    L = I - D^(-1/2) S D^(-1/2),  d_ii = sum_j s_ij.

Its eigenvalues lie in [0, 2] and are numbered from 1 in ascending order,
lambda_1 = 0 being the trivial one. A graph of K well separated groups has
K eigenvalues close to 0, and a large relative gap lambda_{K+1} / lambda_K.
The clustering loss is the inverse of that gap,

    psi = lambda_K / lambda_{K+1},

which is 0 exactly when the graph splits into K components.

The gradient of psi with respect to the points is obtained from the first
order perturbation of simple eigenvalues, ``d lambda = u^T dL u``, and is
only available when lambda_K and lambda_{K+1} are well separated from their
neighbours.
"""
import numpy
import logging
import scipy.linalg
from scipy.spatial.distance import cdist

from .errors import NumericalError, DegenerateSpectrumError, DataError

logger = logging.getLogger(__name__)

# eigenvalues closer than this are treated as colliding.
GAP_TOL = 1e-8
# lambda_{K+1} below this means more than K components.
DEGENERATE_TOL = 1e-12

class SimilarityGraph(object):
    """
    A dense weighted graph.

    Parameters
    ----------
    S : array_like
        N x N symmetric non-negative weights with zero diagonal.
    gamma : float or None
        the kernel width S was built with; None for graphs that do not
        come from :func:`similarity`.

    Attributes
    ----------
    degrees : array_like
        row sums of S.
    """
    def __init__(self, S, gamma=None):
        self.S = S
        self.gamma = gamma
        self.degrees = S.sum(axis=1)

    @property
    def N(self):
        return self.S.shape[0]

class LaplacianSpectrum(object):
    """
    The smallest eigenpairs of a normalized graph Laplacian.

    Attributes
    ----------
    eigenvalues : array_like
        ascending.
    eigenvectors : array_like
        N x len(eigenvalues), orthonormal columns.
    """
    def __init__(self, eigenvalues, eigenvectors):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors

    def __len__(self):
        return len(self.eigenvalues)

    def eigenvalue(self, k):
        """ lambda_k, counted from 1. """
        if k < 1:
            raise IndexError("eigenvalues are numbered from 1")
        return self.eigenvalues[k - 1]

    def eigenvector(self, k):
        """ u_k, counted from 1. """
        if k < 1:
            raise IndexError("eigenvectors are numbered from 1")
        return self.eigenvectors[:, k - 1]

    def check(self, L=None, tol=1e-8):
        """
        Verify the properties of a Laplacian spectrum.

        - eigenvalues in [-tol, 2 + tol];
        - ``max |U^T U - I| < 1e-6``;
        - ``|L u_k - lambda_k u_k| < 1e-6`` for every pair, if L is given.

        Raises
        ------
        NumericalError
        """
        w = self.eigenvalues
        U = self.eigenvectors
        if len(w) and (w[0] < -tol or w[-1] > 2 + tol):
            raise NumericalError("Laplacian eigenvalues outside [0, 2]: %g .. %g" % (w[0], w[-1]))
        ortho = abs(numpy.dot(U.T, U) - numpy.eye(U.shape[1])).max() if len(w) else 0.
        if ortho >= 1e-6:
            raise NumericalError("eigenvectors are not orthonormal, error %g" % ortho)
        if L is not None and len(w):
            residual = numpy.linalg.norm(numpy.dot(L, U) - U * w[None, :], axis=0).max()
            if residual >= 1e-6:
                raise NumericalError("eigenpair residual %g too large" % residual)
        return self

def _points(Y):
    Y = numpy.asarray(Y, dtype='f8')
    if Y.ndim != 2:
        raise ValueError("expecting an N x m matrix of points")
    if not numpy.isfinite(Y).all():
        raise ValueError("points must be finite")
    return Y

def similarity(Y, gamma):
    """
    Gaussian similarity graph of the rows of Y.

    Parameters
    ----------
    Y : array_like
        N x m points, N >= 2.
    gamma : float
        kernel width, positive.

    Returns
    -------
    graph : SimilarityGraph
        ``s_ij = exp(-gamma |y_i - y_j|^2)`` for i != j, zero diagonal.
    """
    Y = _points(Y)
    if len(Y) < 2:
        raise ValueError("a similarity graph needs at least 2 points")
    if not gamma > 0 or not numpy.isfinite(gamma):
        raise ValueError("gamma must be positive and finite")
    S = numpy.exp(-gamma * cdist(Y, Y, 'sqeuclidean'))
    numpy.fill_diagonal(S, 0)
    return SimilarityGraph(S, gamma)

def median_gamma(Y, sample_pairs=10000, seed=0):
    """
    Kernel width from the median heuristic, ``1 / (2 median |y_i - y_j|^2)``.

    All pairs are used if there are no more than sample_pairs of them,
    otherwise sample_pairs random pairs of distinct points.

    Raises
    ------
    DataError
        the median squared distance is zero, e.g. all points coincide.
    """
    Y = _points(Y)
    N = len(Y)
    if N < 2:
        raise ValueError("the median heuristic needs at least 2 points")
    if N * (N - 1) // 2 <= sample_pairs:
        i, j = numpy.triu_indices(N, k=1)
    else:
        rng = numpy.random.RandomState(seed)
        i = rng.randint(0, N, size=sample_pairs)
        j = (i + rng.randint(1, N, size=sample_pairs)) % N
    d = Y[i] - Y[j]
    median = numpy.median(numpy.einsum('ij,ij->i', d, d))
    if not median > 0:
        raise DataError("degenerate data: the median squared distance between points is zero")
    return 1. / (2 * median)

def normalized_laplacian(graph):
    """
    ``L = I - D^(-1/2) S D^(-1/2)`` of a graph; exactly symmetric.

    Raises
    ------
    NumericalError
        a vertex has zero degree.
    """
    d = graph.degrees
    if not (d > 0).all():
        raise NumericalError("%d vertices have zero degree" % (d <= 0).sum())
    dinv = d ** -0.5
    L = -(dinv[:, None] * graph.S * dinv[None, :])
    L = 0.5 * (L + L.T)
    L[numpy.diag_indices_from(L)] += 1.0
    return L

def smallest_eigenpairs(L, count):
    """
    The count smallest eigenvalues and their eigenvectors of a symmetric
    matrix, with the dense LAPACK solver.

    Raises
    ------
    NumericalError
        the solver did not converge.
    """
    L = numpy.asarray(L, dtype='f8')
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError("expecting a square matrix")
    if not 1 <= count <= L.shape[0]:
        raise ValueError("cannot compute %d eigenpairs of a %d x %d matrix" % (count, L.shape[0], L.shape[0]))
    if abs(L - L.T).max() > 1e-10 * max(1., abs(L).max()):
        raise ValueError("matrix is not symmetric")
    try:
        w, U = scipy.linalg.eigh(L, subset_by_index=[0, count - 1])
    except (numpy.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise NumericalError("eigensolver failed: %s" % e)
    return LaplacianSpectrum(w, U)

def psi_from_eigenvalues(eigenvalues, K):
    """
    ``lambda_K / lambda_{K+1}`` of an ascending spectrum numbered from 1.

    Raises
    ------
    DegenerateSpectrumError
        lambda_{K+1} < 1e-12.
    """
    if K < 1 or K + 1 > len(eigenvalues):
        raise ValueError("need %d eigenvalues for K = %d, got %d" % (K + 1, K, len(eigenvalues)))
    lK = eigenvalues[K - 1]
    lK1 = eigenvalues[K]
    if lK1 < DEGENERATE_TOL:
        raise DegenerateSpectrumError(
            "lambda_%d = %g vanishes; the graph has more than %d components" % (K + 1, lK1, K))
    return lK / lK1

def clustering_loss(Y, K, gamma):
    """
    The clustering loss psi = lambda_K / lambda_{K+1} of the Gaussian
    similarity graph of Y.

    Eigenvalues are numbered from 1, lambda_1 = 0 included.

    Returns
    -------
    psi : float
    spectrum : LaplacianSpectrum
        the K + 1 smallest eigenpairs.
    """
    Y = _points(Y)
    if not len(Y) >= K + 1:
        raise ValueError("clustering loss with K = %d needs at least %d points" % (K, K + 1))
    L = normalized_laplacian(similarity(Y, gamma))
    spectrum = smallest_eigenpairs(L, K + 1)
    return psi_from_eigenvalues(spectrum.eigenvalues, K), spectrum

def _eigenvalue_weights(graph, spectrum, k):
    # d lambda_k / d s_ij for a symmetric change of s_ij = s_ji
    lam = spectrum.eigenvalue(k)
    v = spectrum.eigenvector(k) * graph.degrees ** -0.5
    v2 = v * v
    return -(2 * numpy.outer(v, v) - (1 - lam) * (v2[:, None] + v2[None, :]))

def eigenvalue_gradient(Y, graph, spectrum, k):
    """
    Gradient of lambda_k with respect to the points Y.

    lambda_k must be a simple eigenvalue of the Laplacian of graph, which is
    the similarity graph of Y.
    """
    return _pair_weights_gradient(Y, graph, _eigenvalue_weights(graph, spectrum, k))

def _pair_weights_gradient(Y, graph, G):
    # chain G = d f / d s_ij through s_ij = exp(-gamma |y_i - y_j|^2)
    W = G * graph.S
    return -2 * graph.gamma * (W.sum(axis=1)[:, None] * Y - numpy.dot(W, Y))

def _simple(eigenvalues, K):
    # lambda_K and lambda_{K+1} are apart from each other and their neighbours
    gaps = [eigenvalues[K] - eigenvalues[K - 1]]
    if K >= 2:
        gaps.append(eigenvalues[K - 1] - eigenvalues[K - 2])
    if len(eigenvalues) > K + 1:
        gaps.append(eigenvalues[K + 1] - eigenvalues[K])
    return min(gaps) > GAP_TOL

def clustering_loss_and_gradient(Y, K, gamma, check=False):
    """
    The clustering loss and its gradient from a single decomposition.

    Parameters
    ----------
    Y : array_like
        N x m points, N >= K + 1.
    K : int
    gamma : float
    check : bool
        verify the spectrum with :meth:`LaplacianSpectrum.check`.

    Returns
    -------
    psi : float
    spectrum : LaplacianSpectrum
    grad : array_like or None
        N x m gradient d psi / d Y; None if lambda_K or lambda_{K+1} is
        not a simple eigenvalue.

    Raises
    ------
    DegenerateSpectrumError
        lambda_{K+1} vanishes.
    """
    Y = _points(Y)
    N = len(Y)
    if not N >= K + 1:
        raise ValueError("clustering loss with K = %d needs at least %d points" % (K, K + 1))
    graph = similarity(Y, gamma)
    L = normalized_laplacian(graph)
    spectrum = smallest_eigenpairs(L, min(K + 2, N))
    if check:
        spectrum.check(L)

    psi = psi_from_eigenvalues(spectrum.eigenvalues, K)

    if not _simple(spectrum.eigenvalues, K):
        logger.debug("eigenvalues near lambda_%d collide; no gradient", K)
        return psi, spectrum, None

    lK = spectrum.eigenvalue(K)
    lK1 = spectrum.eigenvalue(K + 1)
    G = (_eigenvalue_weights(graph, spectrum, K) / lK1
            - (lK / lK1 ** 2) * _eigenvalue_weights(graph, spectrum, K + 1))
    grad = _pair_weights_gradient(Y, graph, G)
    return psi, spectrum, grad

def clustering_loss_gradient(Y, K, gamma):
    """
    Gradient d psi / d Y of :func:`clustering_loss`.

    Returns None if lambda_K or lambda_{K+1} is not a simple eigenvalue
    (gap below 1e-8); callers then skip the clustering term.
    """
    return clustering_loss_and_gradient(Y, K, gamma)[2]

def spectral_gap_heuristic(Y, max_K, gamma):
    """
    The number of clusters with the largest relative spectral gap
    ``lambda_{K+1} / lambda_K``, for K in 2 .. max_K.

    A vanishing lambda_K counts as an infinite gap; the largest such K wins.

    Returns
    -------
    K : int
    spectrum : LaplacianSpectrum
        the max_K + 1 smallest eigenpairs.
    """
    Y = _points(Y)
    if max_K < 2 or len(Y) < max_K + 1:
        raise ValueError("need 2 <= max_K < N")
    spectrum = smallest_eigenpairs(normalized_laplacian(similarity(Y, gamma)), max_K + 1)
    w = spectrum.eigenvalues
    vanishing = [K for K in range(2, max_K + 1) if w[K - 1] < DEGENERATE_TOL]
    if vanishing:
        return vanishing[-1], spectrum
    rsg = w[2:max_K + 1] / w[1:max_K]
    return 2 + int(numpy.argmax(rsg)), spectrum
