"""
Data matrices and the readers and writers for them.

A :class:`DataMatrix` holds N rows of d real values and optionally one
integer ground truth label per row. It is used for the raw data X, the
compressed embedding Y and the refined embedding Z alike.

Numerical routines in auec take any array_like; a DataMatrix converts with
:func:`numpy.asarray` through ``__array__``.

Supported files:

- IDX (the MNIST distribution format), optionally gzip compressed;
- CSV, comma separated reals, one row per line, the label optionally in the
  last column.

"""
import numpy
import gzip
import logging

from .errors import DataError

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

class DataMatrix(object):
    """
    An immutable N x d matrix of finite reals with optional labels.

    Parameters
    ----------
    values : array_like
        N x d matrix; copied and converted to float64.
    labels : array_like, int
        N non-negative integer labels, or None. The labels need not be
        contiguous; a subsample may miss some classes.

    """
    def __init__(self, values, labels=None):
        values = numpy.array(values, dtype='f8', order='C')
        if values.ndim != 2:
            raise DataError("a data matrix must be 2 dimensional, got shape %s" % str(values.shape))
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError("a data matrix needs at least one row and one column, got shape %s" % str(values.shape))
        if not numpy.isfinite(values).all():
            bad = numpy.nonzero(~numpy.isfinite(values).all(axis=1))[0]
            raise DataError("non-finite values in %d rows, first is row %d" % (len(bad), bad[0]))
        values.flags.writeable = False
        self.values = values

        if labels is not None:
            labels = numpy.array(labels)
            if labels.ndim != 1 or len(labels) != len(values):
                raise DataError("expecting %d labels, got shape %s" % (len(values), str(labels.shape)))
            if labels.dtype.kind == 'f':
                if not (labels == numpy.round(labels)).all():
                    raise DataError("labels must be integers")
            elif labels.dtype.kind not in 'iub':
                raise DataError("labels must be integers, got dtype %s" % labels.dtype)
            labels = labels.astype('i8')
            if (labels < 0).any():
                raise DataError("labels must be non-negative")
            labels.flags.writeable = False
        self.labels = labels

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return self.rows

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __repr__(self):
        return 'DataMatrix(%d x %d, labels=%s)' % (self.rows, self.cols, self.labels is not None)

    def take(self, index):
        """ A new DataMatrix of the given rows, labels carried along. """
        index = numpy.asarray(index, dtype='intp')
        labels = None if self.labels is None else self.labels[index]
        return DataMatrix(self.values[index], labels)

    def with_values(self, values):
        """ A new DataMatrix of the same rows with other values, e.g. an embedding. """
        values = numpy.asarray(values)
        if len(values) != self.rows:
            raise DataError("expecting %d rows, got %d" % (self.rows, len(values)))
        return DataMatrix(values, self.labels)

def _read_bytes(path):
    path = str(path)
    opener = gzip.open if path.endswith('.gz') else open
    try:
        with opener(path, 'rb') as ff:
            return ff.read()
    except OSError as e:
        raise DataError("cannot read %s: %s" % (path, e))

def _idx_header(raw, path, magic, ndim):
    hsize = 4 * (1 + ndim)
    if len(raw) < hsize:
        raise DataError("%s: truncated file, header needs %d bytes, file has %d" % (path, hsize, len(raw)))
    header = numpy.frombuffer(raw, dtype='>u4', count=1 + ndim)
    if header[0] != magic:
        raise DataError("%s: bad magic 0x%08x, expecting 0x%08x" % (path, header[0], magic))
    dims = [int(i) for i in header[1:]]
    size = int(numpy.prod(dims))
    if len(raw) < hsize + size:
        raise DataError("%s: truncated file, expecting %d bytes of data, found %d"
            % (path, size, len(raw) - hsize))
    body = numpy.frombuffer(raw, dtype='u1', count=size, offset=hsize)
    return dims, body

def load_idx(image_path, label_path=None):
    """
    Read an IDX image file and optionally its label file.

    Images are flattened to rows, pixel values are scaled by 1 / 255.

    Parameters
    ----------
    image_path : str
        IDX3 image file (magic 0x00000803); ``.gz`` is decompressed.
    label_path : str or None
        IDX1 label file (magic 0x00000801).

    Returns
    -------
    data : DataMatrix
        N x (rows * cols) matrix with values in [0, 1].

    Raises
    ------
    DataError
        bad magic, truncated file or mismatched counts.
    """
    raw = _read_bytes(image_path)
    dims, body = _idx_header(raw, image_path, IDX_IMAGES_MAGIC, 3)
    N = dims[0]
    if N < 1:
        raise DataError("%s: no images" % image_path)
    pixels = body.reshape(N, dims[1] * dims[2]) / 255.

    labels = None
    if label_path is not None:
        raw = _read_bytes(label_path)
        ldims, labels = _idx_header(raw, label_path, IDX_LABELS_MAGIC, 1)
        if ldims[0] != N:
            raise DataError("count mismatch: %d images in %s, %d labels in %s"
                % (N, image_path, ldims[0], label_path))

    logger.info("read %d images of %d x %d pixels from %s", N, dims[1], dims[2], image_path)
    return DataMatrix(pixels, labels)

def load_csv(path, has_labels=False, header=False):
    """
    Read a comma separated matrix.

    Parameters
    ----------
    path : str
    has_labels : bool
        the last column holds integer labels.
    header : bool
        skip the first line.

    Raises
    ------
    DataError
        ragged rows, non-numeric or non-integer label cells; the message
        names the line.
    """
    rows = []
    ncols = None
    try:
        ff = open(path, 'r')
    except OSError as e:
        raise DataError("cannot read %s: %s" % (path, e))
    with ff:
        for lineno, line in enumerate(ff, 1):
            if header and lineno == 1:
                continue
            line = line.strip()
            if len(line) == 0:
                continue
            cells = line.split(',')
            if ncols is None:
                ncols = len(cells)
            elif len(cells) != ncols:
                raise DataError("%s:%d: ragged row, %d cells, expecting %d" % (path, lineno, len(cells), ncols))
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = [c for c in cells if not _is_number(c)][0]
                raise DataError("%s:%d: non-numeric cell %r" % (path, lineno, bad.strip()))

    if len(rows) == 0:
        raise DataError("%s: no data rows" % path)

    table = numpy.array(rows, dtype='f8')
    if not has_labels:
        return DataMatrix(table)

    if ncols < 2:
        raise DataError("%s: a labelled file needs at least two columns" % path)
    labels = table[:, -1]
    if not (labels == numpy.round(labels)).all():
        raise DataError("%s: labels in the last column must be integers" % path)
    return DataMatrix(table[:, :-1], labels.astype('i8'))

def _is_number(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False

def save_csv(path, data, labels=None):
    """
    Write a matrix as CSV with 17 significant digits, which reads back
    exactly with :func:`load_csv`.

    Parameters
    ----------
    data : DataMatrix or array_like
        if a DataMatrix with labels, the labels form the last column.
    labels : array_like, int
        labels to write instead of the labels of data.
    """
    if labels is None:
        labels = getattr(data, 'labels', None)
    values = numpy.asarray(data, dtype='f8')
    if values.ndim != 2:
        raise ValueError("expecting a 2 dimensional matrix")
    fmt = ['%.17g'] * values.shape[1]
    if labels is not None:
        labels = numpy.asarray(labels)
        if len(labels) != len(values):
            raise ValueError("expecting %d labels, got %d" % (len(values), len(labels)))
        table = numpy.column_stack([values, labels.astype('f8')])
        numpy.savetxt(path, table, fmt=fmt + ['%d'], delimiter=',')
    else:
        numpy.savetxt(path, values, fmt=fmt, delimiter=',')

def load_labels(path):
    """
    Read a label file: either one label per line, or ``index,label``
    lines as written by :func:`auec.clustering.save_assignment`.
    """
    try:
        table = numpy.loadtxt(path, delimiter=',', ndmin=2)
    except (OSError, ValueError) as e:
        raise DataError("cannot read labels from %s: %s" % (path, e))
    if table.size == 0:
        raise DataError("%s: no labels" % path)
    if table.shape[1] > 2:
        raise DataError("%s: expecting one or two columns, found %d" % (path, table.shape[1]))
    labels = table[:, -1]
    if not (labels == numpy.round(labels)).all():
        raise DataError("%s: labels must be integers" % path)
    return labels.astype('i8')

def make_blobs(K, per_cluster, dim, spread=1.0, separation=20.0, seed=0):
    """
    K isotropic Gaussian clusters.

    Centers are distinct points of a cubic lattice with spacing
    ``separation``, shifted by a common random offset, so any two centers
    are at least ``separation`` apart. Labels are cluster major.

    Parameters
    ----------
    K : int
        number of clusters.
    per_cluster : int
        points per cluster.
    dim : int
        dimension of the points.
    spread : float
        standard deviation of each coordinate around its center.
    separation : float
        minimal distance between centers.
    seed : int

    Returns
    -------
    data : DataMatrix
        (K * per_cluster) x dim matrix with labels.
    """
    if K < 1 or per_cluster < 1 or dim < 1:
        raise ValueError("K, per_cluster and dim must be positive")
    if not spread > 0 or not separation > 0:
        raise ValueError("spread and separation must be positive")

    rng = numpy.random.RandomState(seed)

    side = 1
    while side ** dim < K:
        side += 1

    sites = []
    seen = set()
    while len(sites) < K:
        site = tuple(rng.randint(0, side, size=dim))
        if site in seen:
            continue
        seen.add(site)
        sites.append(site)

    offset = rng.uniform(-separation, separation, size=dim)
    centers = numpy.array(sites, dtype='f8') * separation + offset

    labels = numpy.repeat(numpy.arange(K), per_cluster)
    values = centers[labels] + rng.normal(0, spread, size=(len(labels), dim))
    return DataMatrix(values, labels)

def subsample(data, n, seed=0):
    """
    n rows drawn without replacement, in random order.

    Raises
    ------
    ValueError
        n is larger than the number of rows.
    """
    if n > data.rows or n < 1:
        raise ValueError("cannot draw %d rows from %d" % (n, data.rows))
    index = numpy.random.RandomState(seed).permutation(data.rows)[:n]
    return data.take(index)

def disjoint_subsamples(data, n_first, n_second, seed=0):
    """
    Two subsamples without common rows, e.g. a training and a held out split.

    Returns
    -------
    first, second : DataMatrix
    """
    if n_first < 1 or n_second < 1 or n_first + n_second > data.rows:
        raise ValueError("cannot draw %d + %d disjoint rows from %d" % (n_first, n_second, data.rows))
    index = numpy.random.RandomState(seed).permutation(data.rows)
    return data.take(index[:n_first]), data.take(index[n_first:n_first + n_second])

def load_source(source, images=None, labels=None, path=None, has_labels=True, header=False,
        K=10, blobs=None):
    """
    Load a data set by the kind of its source.

    Parameters
    ----------
    source : 'mnist', 'csv' or 'blobs'
    images, labels : str
        IDX files of an mnist source; labels are optional.
    path : str
        file of a csv source.
    has_labels, header : bool
        layout of a csv source, see :func:`load_csv`.
    K : int
        number of blobs.
    blobs : dict
        keyword arguments of :func:`make_blobs`.
    """
    if source == 'mnist':
        return load_idx(images, labels)
    if source == 'csv':
        return load_csv(path, has_labels=has_labels, header=header)
    if source == 'blobs':
        return make_blobs(K, **(blobs or {}))
    raise ValueError("unknown data source '%s'" % source)
