"""
Uniform manifold approximation and projection (stage II).

:func:`embed` maps the compressed embedding Y to the refined embedding Z
in four steps:

1. :func:`knn_graph`, exact Euclidean nearest neighbours;
2. :func:`calibrate_fuzzy`, per point bandwidths and the symmetrized
   fuzzy weights;
3. :func:`spectral_init`, the initial coordinates from the eigenvectors
   of the normalized Laplacian of the fuzzy graph;
4. :func:`optimize_layout`, stochastic minimization of the fuzzy set
   cross entropy, sampling edges in proportion to their weight and
   repelling negative samples.

The layout loop is sequential and seeded, so the result is a pure function
of the input and the configuration.
"""
import numpy
import logging
import warnings

import numba
import scipy.sparse
import scipy.sparse.linalg
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist
from scipy.optimize import curve_fit

from . import spectral
from .parallel import RowLayout
from .errors import NumericalError

logger = logging.getLogger(__name__)

# above this many points the initialization uses the sparse Lanczos solver.
DENSE_INIT_LIMIT = 2048

# bisection of the bandwidths
SIGMA_BRACKET = (1e-8, 1e4)
SIGMA_ITERATIONS = 64

class UmapConfig(object):
    """
    Hyper-parameters of stage II.

    Parameters
    ----------
    n_neighbors : int
        n_N, neighbours per point in the fuzzy graph.
    n_components : int
        n_C, dimension of the refined embedding.
    min_dist : float
        minimal distance of points in the embedding.
    epochs : int
        layout epochs.
    negative_samples : int
        negative samples per positive edge sample.
    learning_rate : float
        initial step of the layout; decays linearly to 0.
    seed : int
    """
    def __init__(self, n_neighbors=15, n_components=2, min_dist=0.1, epochs=300,
            negative_samples=5, learning_rate=1.0, seed=0):
        if n_neighbors < 2:
            raise ValueError("n_neighbors must be at least 2")
        if n_components < 1:
            raise ValueError("n_components must be positive")
        if not min_dist > 0:
            raise ValueError("min_dist must be positive")
        if epochs < 1 or negative_samples < 1:
            raise ValueError("epochs and negative_samples must be positive")
        if not learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        self.n_neighbors = n_neighbors
        self.n_components = n_components
        self.min_dist = min_dist
        self.epochs = epochs
        self.negative_samples = negative_samples
        self.learning_rate = learning_rate
        self.seed = seed

    def validate(self, N, m):
        """ Check the configuration against N points of dimension m. """
        if not self.n_neighbors < N:
            raise ValueError("n_neighbors = %d needs more than %d points" % (self.n_neighbors, N))
        if not self.n_components < m:
            raise ValueError("n_components = %d must be smaller than the input dimension %d"
                    % (self.n_components, m))
        return self

class KnnGraph(object):
    """
    Nearest neighbours of every point.

    Attributes
    ----------
    indices : array_like, int
        N x n_N, ascending distance, ties by lower index.
    distances : array_like
        N x n_N Euclidean distances.
    """
    def __init__(self, indices, distances):
        self.indices = indices
        self.distances = distances

    @property
    def N(self):
        return self.indices.shape[0]

    @property
    def n_neighbors(self):
        return self.indices.shape[1]

class FuzzyGraph(object):
    """
    The symmetric fuzzy graph.

    Attributes
    ----------
    graph : scipy.sparse.csr_matrix
        N x N symmetric weights in (0, 1].
    rhos : array_like or None
        distance of each point to its nearest neighbour.
    sigmas : array_like or None
        calibrated bandwidths.
    """
    def __init__(self, graph, rhos=None, sigmas=None):
        self.graph = scipy.sparse.csr_matrix(graph)
        self.rhos = rhos
        self.sigmas = sigmas

    @property
    def N(self):
        return self.graph.shape[0]

    def edges(self):
        """ (i, j, w) of every stored entry; both directions are present. """
        coo = self.graph.tocoo()
        return coo.row, coo.col, coo.data

def _nearest(d2, n_neighbors):
    # the n_neighbors smallest entries per row, ties by lower column
    B = len(d2)
    thresh = numpy.partition(d2, n_neighbors - 1, axis=1)[:, n_neighbors - 1]
    rows, cols = numpy.nonzero(d2 <= thresh[:, None])
    vals = d2[rows, cols]
    order = numpy.lexsort((cols, vals, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    starts = numpy.concatenate([[0], numpy.cumsum(numpy.bincount(rows, minlength=B))[:-1]])
    keep = numpy.arange(len(rows)) - starts[rows] < n_neighbors
    return cols[keep].reshape(B, n_neighbors), vals[keep].reshape(B, n_neighbors)

def knn_graph(Y, n_neighbors, comm=None, chunksize=1024):
    """
    Exact nearest neighbours by brute force.

    The rows are shared among the ranks of comm; every rank receives the
    full result.

    Parameters
    ----------
    Y : array_like
        N x m points.
    n_neighbors : int
        smaller than N; a point is not its own neighbour.
    comm : MPI.Comm
    chunksize : int
        rows per distance block.

    Returns
    -------
    knn : KnnGraph
    """
    Y = numpy.asarray(Y, dtype='f8')
    N = len(Y)
    if not 1 <= n_neighbors < N:
        raise ValueError("n_neighbors must be in [1, %d)" % N)

    layout = RowLayout(N, comm)
    local = layout.local(Y)
    indices = []
    distances = []
    for offset in range(0, len(local), chunksize):
        block = local[offset:offset + chunksize]
        d2 = cdist(block, Y, 'sqeuclidean')
        d2[numpy.arange(len(block)), layout.start + offset + numpy.arange(len(block))] = numpy.inf
        i, d = _nearest(d2, n_neighbors)
        indices.append(i)
        distances.append(d)

    if len(indices):
        indices = numpy.concatenate(indices, axis=0)
        distances = numpy.concatenate(distances, axis=0)
    else:
        indices = numpy.empty((0, n_neighbors), dtype='intp')
        distances = numpy.empty((0, n_neighbors), dtype='f8')

    indices = layout.gather(indices)
    distances = layout.gather(distances)
    return KnnGraph(indices, distances ** 0.5)

def _membership_sum(dists, rhos, sigmas):
    return numpy.exp(-numpy.maximum(dists - rhos[:, None], 0) / sigmas[:, None]).sum(axis=1)

def calibrate_fuzzy(knn, n_neighbors=None):
    """
    Fuzzy graph of a nearest neighbour graph.

    rho_i is the smallest positive neighbour distance of point i; sigma_i
    is found by bisection such that the directed weights
    ``exp(-max(0, d_ij - rho_i) / sigma_i)`` of its neighbours sum to
    log2(n_N). Directed weights are symmetrized by the probabilistic union
    ``w = a + b - a b``.

    Bandwidths that cannot meet the target inside [1e-8, 1e4] are clamped
    to the bracket with a RuntimeWarning.

    Returns
    -------
    fuzzy : FuzzyGraph
    """
    if n_neighbors is None:
        n_neighbors = knn.n_neighbors
    if n_neighbors != knn.n_neighbors:
        raise ValueError("the graph has %d neighbours per point, not %d" % (knn.n_neighbors, n_neighbors))

    dists = knn.distances
    N = knn.N
    target = numpy.log2(n_neighbors)

    positive = numpy.where(dists > 0, dists, numpy.inf)
    rhos = positive.min(axis=1)
    rhos[~numpy.isfinite(rhos)] = 0.

    lo = numpy.full(N, SIGMA_BRACKET[0])
    hi = numpy.full(N, SIGMA_BRACKET[1])
    for i in range(SIGMA_ITERATIONS):
        mid = 0.5 * (lo + hi)
        above = _membership_sum(dists, rhos, mid) > target
        hi = numpy.where(above, mid, hi)
        lo = numpy.where(above, lo, mid)
    sigmas = 0.5 * (lo + hi)

    low = _membership_sum(dists, rhos, numpy.full(N, SIGMA_BRACKET[0])) > target + 1e-5
    high = _membership_sum(dists, rhos, numpy.full(N, SIGMA_BRACKET[1])) < target - 1e-5
    if low.any() or high.any():
        warnings.warn("bandwidth calibration failed for %d points; clamped to [%g, %g]"
                % (low.sum() + high.sum(), SIGMA_BRACKET[0], SIGMA_BRACKET[1]), RuntimeWarning)
        sigmas[low] = SIGMA_BRACKET[0]
        sigmas[high] = SIGMA_BRACKET[1]

    weights = numpy.exp(-numpy.maximum(dists - rhos[:, None], 0) / sigmas[:, None])
    rows = numpy.repeat(numpy.arange(N), n_neighbors)
    P = scipy.sparse.csr_matrix((weights.ravel(), (rows, knn.indices.ravel())), shape=(N, N))
    P.eliminate_zeros()
    Pt = P.T.tocsr()
    W = (P + Pt - P.multiply(Pt)).tocsr()
    W.data = numpy.minimum(W.data, 1.0)
    W.eliminate_zeros()
    W.sort_indices()
    return FuzzyGraph(W, rhos, sigmas)

def _scale_coords(coords, rng, max_coord=10.0, noise=1e-4):
    coords = coords * (max_coord / abs(coords).max())
    return coords + rng.normal(scale=noise, size=coords.shape)

def _random_init(N, n_components, rng):
    return rng.uniform(-10, 10, size=(N, n_components))

def spectral_init(fuzzy, n_components, seed=0):
    """
    Initial layout from the eigenvectors 2 .. n_C + 1 of the normalized
    Laplacian of the fuzzy graph, scaled to a largest coordinate of 10,
    plus a jitter of standard deviation 1e-4.

    A disconnected graph, or a failing eigensolver, falls back to uniform
    random coordinates in [-10, 10] with a RuntimeWarning.

    Returns
    -------
    coords : array_like
        N x n_components.
    """
    N = fuzzy.N
    rng = numpy.random.RandomState(seed)
    if not n_components + 1 < N:
        raise ValueError("cannot initialize %d components of %d points" % (n_components, N))

    ncomp, _ = connected_components(fuzzy.graph, directed=False)
    if ncomp > 1:
        warnings.warn("the fuzzy graph has %d components; using a random initialization" % ncomp,
                RuntimeWarning)
        return _random_init(N, n_components, rng)

    try:
        if N <= DENSE_INIT_LIMIT:
            graph = spectral.SimilarityGraph(fuzzy.graph.toarray())
            L = spectral.normalized_laplacian(graph)
            spectrum = spectral.smallest_eigenpairs(L, n_components + 1)
            coords = spectrum.eigenvectors[:, 1:]
        else:
            W = fuzzy.graph
            dinv = numpy.asarray(W.sum(axis=1)).ravel() ** -0.5
            D = scipy.sparse.diags(dinv)
            A = D @ W @ D
            w, U = scipy.sparse.linalg.eigsh(A, k=n_components + 1, which='LA',
                    v0=numpy.ones(N), tol=1e-8, maxiter=N * 5)
            order = numpy.argsort(-w)
            coords = U[:, order[1:n_components + 1]]
    except (NumericalError, scipy.sparse.linalg.ArpackError, scipy.sparse.linalg.ArpackNoConvergence) as e:
        warnings.warn("spectral initialization failed (%s); using a random initialization" % e,
                RuntimeWarning)
        return _random_init(N, n_components, rng)

    return _scale_coords(coords, rng)

def find_ab_params(min_dist, spread=1.0):
    """
    a, b of the embedding similarity ``1 / (1 + a d^(2b))``, least squares
    fit to 1 below min_dist and ``exp(-(d - min_dist) / spread)`` above.
    """
    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = numpy.linspace(0, spread * 3, 300)
    yv = numpy.zeros(xv.shape)
    yv[xv < min_dist] = 1.0
    yv[xv >= min_dist] = numpy.exp(-(xv[xv >= min_dist] - min_dist) / spread)
    params, covar = curve_fit(curve, xv, yv)
    return params[0], params[1]

def make_epochs_per_sample(weights, epochs):
    """ Epochs between two samples of each edge; the heaviest edge is sampled every epoch. """
    result = -1.0 * numpy.ones(weights.shape[0], dtype='f8')
    n_samples = epochs * (weights / weights.max())
    result[n_samples > 0] = float(epochs) / n_samples[n_samples > 0]
    return result

@numba.njit()
def tau_rand_int(state):
    """ Tausworthe generator; state is 3 int64 values. """
    state[0] = (((state[0] & 4294967294) << 12) & 0xffffffff) ^ (
        (((state[0] << 13) & 0xffffffff) ^ state[0]) >> 19)
    state[1] = (((state[1] & 4294967288) << 4) & 0xffffffff) ^ (
        (((state[1] << 2) & 0xffffffff) ^ state[1]) >> 25)
    state[2] = (((state[2] & 4294967280) << 17) & 0xffffffff) ^ (
        (((state[2] << 3) & 0xffffffff) ^ state[2]) >> 11)
    return state[0] ^ state[1] ^ state[2]

@numba.njit()
def clip(val):
    if val > 4.0:
        return 4.0
    elif val < -4.0:
        return -4.0
    else:
        return val

@numba.njit()
def rdist(x, y):
    result = 0.0
    for i in range(x.shape[0]):
        result += (x[i] - y[i]) ** 2
    return result

@numba.njit()
def optimize_layout(embedding, head, tail, n_epochs, n_vertices, epochs_per_sample,
        a, b, rng_state, initial_alpha, negative_sample_rate):
    """
    Stochastic descent of the fuzzy set cross entropy; embedding is
    modified in place.

    Edge i is sampled every ``epochs_per_sample[i]`` epochs; each sample
    attracts its two ends and repels the head from
    ``negative_sample_rate`` random vertices. The step decays linearly from
    initial_alpha to 0.
    """
    dim = embedding.shape[1]
    alpha = initial_alpha

    epochs_per_negative_sample = epochs_per_sample / negative_sample_rate
    epoch_of_next_negative_sample = epochs_per_negative_sample.copy()
    epoch_of_next_sample = epochs_per_sample.copy()

    for n in range(n_epochs):
        for i in range(epochs_per_sample.shape[0]):
            if epoch_of_next_sample[i] > n:
                continue
            j = head[i]
            k = tail[i]
            current = embedding[j]
            other = embedding[k]

            dist_squared = rdist(current, other)
            if dist_squared > 0.0:
                grad_coeff = -2.0 * a * b * dist_squared ** (b - 1.0)
                grad_coeff /= a * dist_squared ** b + 1.0
            else:
                grad_coeff = 0.0

            for d in range(dim):
                grad_d = clip(grad_coeff * (current[d] - other[d]))
                current[d] += grad_d * alpha
                other[d] += -grad_d * alpha

            epoch_of_next_sample[i] += epochs_per_sample[i]

            n_neg_samples = int((n - epoch_of_next_negative_sample[i]) / epochs_per_negative_sample[i])

            for p in range(n_neg_samples):
                k = tau_rand_int(rng_state) % n_vertices
                other = embedding[k]
                dist_squared = rdist(current, other)

                if dist_squared > 0.0:
                    grad_coeff = 2.0 * b
                    grad_coeff /= (0.001 + dist_squared) * (a * dist_squared ** b + 1)
                elif j == k:
                    continue
                else:
                    grad_coeff = 0.0

                for d in range(dim):
                    if grad_coeff > 0.0:
                        grad_d = clip(grad_coeff * (current[d] - other[d]))
                    else:
                        grad_d = 4.0
                    current[d] += grad_d * alpha

            epoch_of_next_negative_sample[i] += n_neg_samples * epochs_per_negative_sample[i]

        alpha = initial_alpha * (1.0 - float(n) / float(n_epochs))

    return embedding

def embed(Y, cfg, comm=None):
    """
    The refined embedding Z of Y.

    Parameters
    ----------
    Y : array_like
        N x m points.
    cfg : UmapConfig
    comm : MPI.Comm
        shares the neighbour search; the layout is sequential.

    Returns
    -------
    Z : array_like
        N x n_components.

    Raises
    ------
    NumericalError
        the layout produced non-finite coordinates.
    """
    Y = numpy.asarray(Y, dtype='f8')
    if Y.ndim != 2:
        raise ValueError("expecting an N x m matrix")
    N, m = Y.shape
    cfg.validate(N, m)

    knn = knn_graph(Y, cfg.n_neighbors, comm)
    fuzzy = calibrate_fuzzy(knn, cfg.n_neighbors)
    Z = spectral_init(fuzzy, cfg.n_components, cfg.seed)

    head, tail, weights = fuzzy.edges()
    keep = weights >= weights.max() / float(cfg.epochs)
    head = head[keep].astype('i8')
    tail = tail[keep].astype('i8')
    weights = weights[keep]
    epochs_per_sample = make_epochs_per_sample(weights, cfg.epochs)

    a, b = find_ab_params(cfg.min_dist)
    rng = numpy.random.RandomState([cfg.seed, 1])
    rng_state = rng.randint(16, 2 ** 31 - 1, size=3).astype('i8')

    logger.info("laying out %d points, %d edges, a = %g b = %g", N, len(head), a, b)
    Z = numpy.ascontiguousarray(Z, dtype='f8')
    optimize_layout(Z, head, tail, cfg.epochs, N, epochs_per_sample,
            a, b, rng_state, float(cfg.learning_rate), float(cfg.negative_samples))

    if not numpy.isfinite(Z).all():
        raise NumericalError("the layout produced non-finite coordinates")
    return Z
