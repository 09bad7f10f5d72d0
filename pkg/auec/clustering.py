"""
Clustering of the refined embedding (stage III).

- :func:`kmeans`, Lloyd iterations from greedy k-means++ seeding, best of
  several restarts by the within cluster sum of squares (:func:`wcss`);
- :func:`dbscan`, density based clustering with a noise label;
- :func:`mdbscan`, DBSCAN reduced to exactly K clusters: the K largest
  clusters are kept, every smaller cluster is merged into the kept cluster
  at the smallest single linkage distance, and every noise point joins the
  cluster of its nearest non-noise point.

"""
import numpy
import logging
from collections import deque

from scipy.spatial import cKDTree

from .parallel import RowLayout
from .errors import ClusteringError, NumericalError

logger = logging.getLogger(__name__)

NOISE = -1

class ClusterAssignment(object):
    """
    Labels of N points.

    Parameters
    ----------
    labels : array_like, int
        N labels in {0..K-1}; -1 marks noise if allow_noise.
    K : int
        number of clusters.
    centroids : array_like or None
        K x d cluster means.
    wcss_history : list of float or None
        WCSS after each Lloyd iteration of the winning k-means run.
    allow_noise : bool
        raw DBSCAN output may contain noise.
    """
    def __init__(self, labels, K, centroids=None, wcss_history=None, allow_noise=False):
        labels = numpy.asarray(labels, dtype='i8')
        lower = NOISE if allow_noise else 0
        if labels.ndim != 1:
            raise ValueError("labels must be a vector")
        if len(labels) and (labels.min() < lower or labels.max() >= K):
            raise ValueError("labels must be in [%d, %d)" % (lower, K))
        self.labels = labels
        self.K = K
        self.centroids = centroids
        self.wcss_history = wcss_history
        self.allow_noise = allow_noise

    def __len__(self):
        return len(self.labels)

    @property
    def noise(self):
        """ number of noise points """
        return int((self.labels == NOISE).sum())

    def sizes(self):
        return numpy.bincount(self.labels[self.labels >= 0], minlength=self.K)

def _means(Z, labels, K):
    counts = numpy.bincount(labels, minlength=K)
    sums = numpy.zeros((K, Z.shape[1]))
    numpy.add.at(sums, labels, Z)
    means = numpy.zeros_like(sums)
    nonempty = counts > 0
    means[nonempty] = sums[nonempty] / counts[nonempty, None]
    return means

def wcss(Z, assignment):
    """
    Within cluster sum of squares, ``sum_k sum_{z in C_k} |z - mean(C_k)|^2``.

    Parameters
    ----------
    Z : array_like
        N x d points.
    assignment : ClusterAssignment or array_like
        labels without noise; empty clusters contribute 0.
    """
    Z = numpy.asarray(Z, dtype='f8')
    if isinstance(assignment, ClusterAssignment):
        labels, K = assignment.labels, assignment.K
    else:
        labels = numpy.asarray(assignment, dtype='i8')
        K = labels.max() + 1 if len(labels) else 0
    if len(labels) != len(Z):
        raise ValueError("expecting %d labels, got %d" % (len(Z), len(labels)))
    if len(labels) and labels.min() < 0:
        raise ValueError("wcss is undefined for noise points")
    d = Z - _means(Z, labels, K)[labels]
    return numpy.einsum('ij,ij->', d, d)

def _sqdist(Z, znorm, C):
    d2 = znorm[:, None] - 2 * numpy.dot(Z, C.T) + numpy.einsum('ij,ij->i', C, C)[None, :]
    return numpy.maximum(d2, 0)

def _kmeans_plusplus(Z, znorm, K, rng):
    N = len(Z)
    n_trials = 2 + int(numpy.log(K))
    centers = numpy.empty((K, Z.shape[1]))
    centers[0] = Z[rng.randint(N)]
    closest = _sqdist(Z, znorm, centers[:1])[:, 0]
    for c in range(1, K):
        total = closest.sum()
        values = rng.uniform(size=n_trials) * total
        candidates = numpy.searchsorted(numpy.cumsum(closest), values)
        candidates = numpy.minimum(candidates, N - 1)
        d2 = _sqdist(Z, znorm, Z[candidates])
        potentials = numpy.minimum(closest[:, None], d2).sum(axis=0)
        best = numpy.argmin(potentials)
        closest = numpy.minimum(closest, d2[:, best])
        centers[c] = Z[candidates[best]]
    return centers

def _fill_empty(labels, d2, K):
    # move the point farthest from its center into each empty cluster
    counts = numpy.bincount(labels, minlength=K)
    own = d2[numpy.arange(len(labels)), labels]
    for k in numpy.nonzero(counts == 0)[0]:
        movable = counts[labels] > 1
        far = numpy.argmax(numpy.where(movable, own, -1))
        counts[labels[far]] -= 1
        labels[far] = k
        own[far] = 0
        counts[k] = 1
    return labels

def _lloyd(Z, znorm, K, rng, max_iter):
    centers = _kmeans_plusplus(Z, znorm, K, rng)
    labels = None
    history = []
    for it in range(max_iter):
        d2 = _sqdist(Z, znorm, centers)
        new = _fill_empty(numpy.argmin(d2, axis=1), d2, K)
        centers = _means(Z, new, K)
        w = wcss(Z, ClusterAssignment(new, K))
        if len(history) and w > history[-1] * (1 + 1e-9) + 1e-12:
            raise NumericalError("WCSS increased from %g to %g at iteration %d" % (history[-1], w, it))
        history.append(w)
        if labels is not None and (new == labels).all():
            break
        labels = new
    return new, centers, history

def kmeans(Z, K, restarts=10, seed=0, max_iter=300, comm=None):
    """
    K-means clustering.

    Each restart r seeds ``RandomState([seed, r])`` and runs Lloyd
    iterations until the assignment is stable or max_iter is reached.
    The restarts are shared among the ranks of comm; the run with the
    smallest WCSS wins, ties going to the lower restart.

    Returns
    -------
    assignment : ClusterAssignment
        with centroids and the WCSS history of the winning run.

    Raises
    ------
    ValueError
        K > N.
    """
    Z = numpy.asarray(Z, dtype='f8')
    N = len(Z)
    if not 1 <= K <= N:
        raise ValueError("K = %d clusters of %d points" % (K, N))
    if restarts < 1:
        raise ValueError("restarts must be positive")

    znorm = numpy.einsum('ij,ij->i', Z, Z)
    layout = RowLayout(restarts, comm)
    local = []
    for r in range(layout.start, layout.end):
        labels, centers, history = _lloyd(Z, znorm, K, numpy.random.RandomState([seed, r]), max_iter)
        logger.debug("k-means restart %d: %d iterations, WCSS = %g", r, len(history), history[-1])
        local.append((history[-1], r, labels, centers, history))

    results = layout.gather_list(local)
    best = min(results, key=lambda x: (x[0], x[1]))
    logger.info("k-means: best of %d restarts is %d, WCSS = %g", restarts, best[1], best[0])
    return ClusterAssignment(best[2], K, best[3], best[4])

def dbscan(Z, eps, min_pts):
    """
    Density based clustering.

    A core point has at least min_pts points, itself included, within
    distance eps. Clusters are the connected components of core points,
    plus the border points within eps of a core point; a border point joins
    the first cluster that reaches it, clusters being grown in index order.
    Other points are noise, label -1.

    Returns
    -------
    assignment : ClusterAssignment
        with noise allowed.
    """
    Z = numpy.asarray(Z, dtype='f8')
    if not eps > 0 or min_pts < 1:
        raise ValueError("eps must be positive and min_pts at least 1")
    N = len(Z)
    neighbors = cKDTree(Z).query_ball_point(Z, r=eps)
    core = numpy.array([len(n) >= min_pts for n in neighbors], dtype='?')

    labels = numpy.full(N, NOISE, dtype='i8')
    K = 0
    for i in range(N):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = K
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in neighbors[p]:
                if labels[q] == NOISE:
                    labels[q] = K
                    if core[q]:
                        queue.append(q)
        K += 1
    logger.info("dbscan: %d clusters, %d noise points", K, (labels == NOISE).sum())
    return ClusterAssignment(labels, K, allow_noise=True)

def mdbscan(Z, K, eps, min_pts):
    """
    DBSCAN with exactly K clusters.

    The K largest DBSCAN clusters are kept (ties by lower label). Each
    smaller cluster joins, as a whole, the kept cluster with the smallest
    single linkage distance to it; then each noise point joins the cluster
    of its nearest non-noise point. Labels are renumbered by descending
    size.

    Raises
    ------
    ClusteringError
        DBSCAN finds fewer than K clusters.
    """
    Z = numpy.asarray(Z, dtype='f8')
    raw = dbscan(Z, eps, min_pts)
    if raw.K < K:
        raise ClusteringError("insufficient clusters; decrease eps (DBSCAN found %d, need %d)" % (raw.K, K))

    labels = raw.labels.copy()
    sizes = raw.sizes()
    order = numpy.argsort(-sizes, kind='stable')
    kept = order[:K]

    target = numpy.full(raw.K, -1, dtype='i8')
    target[kept] = kept
    is_kept = numpy.zeros(raw.K, dtype='?')
    is_kept[kept] = True

    kept_points = numpy.nonzero((labels >= 0) & is_kept[numpy.maximum(labels, 0)])[0]
    tree = cKDTree(Z[kept_points])
    for s in order[K:]:
        members = numpy.nonzero(labels == s)[0]
        d, j = tree.query(Z[members], k=1)
        nearest = numpy.argmin(d)
        target[s] = labels[kept_points[j[nearest]]]
    merged = numpy.where(labels >= 0, target[numpy.maximum(labels, 0)], NOISE)
    if len(order) > K:
        logger.info("mdbscan: merged %d small clusters", len(order) - K)

    noise = numpy.nonzero(merged == NOISE)[0]
    if len(noise):
        clustered = numpy.nonzero(merged != NOISE)[0]
        d, j = cKDTree(Z[clustered]).query(Z[noise], k=1)
        merged[noise] = merged[clustered[j]]
        logger.info("mdbscan: assigned %d noise points", len(noise))

    # renumber by descending size, ties by the size rank of the kept cluster
    final_sizes = numpy.bincount(merged, minlength=raw.K)[kept]
    rank = numpy.argsort(-final_sizes, kind='stable')
    relabel = numpy.empty(raw.K, dtype='i8')
    relabel[kept[rank]] = numpy.arange(K)
    labels = relabel[merged]
    return ClusterAssignment(labels, K, _means(Z, labels, K))

def knee_eps(Z, min_pts):
    """
    DBSCAN radius at the knee of the sorted distances of each point to its
    min_pts-th nearest point (itself counted).

    The knee is the point of the normalized curve farthest below its chord.
    """
    Z = numpy.asarray(Z, dtype='f8')
    if not 1 <= min_pts <= len(Z):
        raise ValueError("min_pts must be in [1, %d]" % len(Z))
    d, _ = cKDTree(Z).query(Z, k=min_pts)
    d = numpy.sort(numpy.asarray(d).reshape(len(Z), -1)[:, -1])
    span = d[-1] - d[0]
    if span > 0 and len(d) > 2:
        x = numpy.linspace(0, 1, len(d))
        y = (d - d[0]) / span
        eps = d[numpy.argmax(x - y)]
    else:
        eps = d[-1]
    if not eps > 0:
        eps = numpy.nextafter(0., 1.)
    logger.info("knee of the %d-NN distance curve: eps = %g", min_pts, eps)
    return eps

def save_assignment(path, assignment):
    """ CSV lines ``index,label``. """
    labels = assignment.labels
    numpy.savetxt(path, numpy.column_stack([numpy.arange(len(labels)), labels]),
            fmt='%d', delimiter=',')

def save_centroids(path, assignment):
    """ CSV of the K x d centroids. """
    if assignment.centroids is None:
        raise ValueError("the assignment has no centroids")
    numpy.savetxt(path, assignment.centroids, fmt='%.17g', delimiter=',')
