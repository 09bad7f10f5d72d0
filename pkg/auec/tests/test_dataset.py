import numpy
import gzip
import pytest
from numpy.testing import assert_array_equal, assert_allclose

from auec import dataset
from auec.errors import DataError

def write_idx(path, magic, dims, body):
    header = numpy.array([magic] + list(dims), dtype='>u4').tobytes()
    data = header + numpy.asarray(body, dtype='u1').tobytes()
    if str(path).endswith('.gz'):
        with gzip.open(str(path), 'wb') as ff:
            ff.write(data)
    else:
        with open(str(path), 'wb') as ff:
            ff.write(data)

def test_datamatrix():
    data = dataset.DataMatrix([[1, 2], [3, 4]], labels=[0, 1])
    assert data.shape == (2, 2)
    assert data.rows == 2
    assert data.cols == 2
    assert_array_equal(numpy.asarray(data), [[1, 2], [3, 4]])
    with pytest.raises(ValueError):
        data.values[0, 0] = 5

    with pytest.raises(DataError):
        dataset.DataMatrix([[1, numpy.nan]])
    with pytest.raises(DataError):
        dataset.DataMatrix(numpy.zeros((0, 3)))
    with pytest.raises(DataError):
        dataset.DataMatrix([[1, 2], [3, 4]], labels=[0])
    with pytest.raises(DataError):
        dataset.DataMatrix([[1, 2], [3, 4]], labels=[0, -1])

    # class ids with gaps, as left by a subsample
    data = dataset.DataMatrix([[1, 2], [3, 4], [5, 6]], labels=[7, 2, 7.0])
    assert_array_equal(data.labels, [7, 2, 7])
    assert data.labels.dtype == numpy.dtype('i8')

def test_load_idx(tmp_path):
    pixels = numpy.arange(2 * 3 * 2) * 20 + 15
    pixels[0] = 0
    pixels[-1] = 255
    write_idx(tmp_path / 'images', 2051, (2, 3, 2), pixels)
    write_idx(tmp_path / 'labels.gz', 2049, (2,), [7, 3])

    data = dataset.load_idx(tmp_path / 'images', tmp_path / 'labels.gz')
    assert data.shape == (2, 6)
    assert data.values[0, 0] == 0.0
    assert data.values[-1, -1] == 1.0
    assert_allclose(data.values.ravel(), pixels / 255.)
    assert_array_equal(data.labels, [7, 3])

def test_load_idx_errors(tmp_path):
    write_idx(tmp_path / 'images', 2051, (2, 2, 2), numpy.zeros(8))
    write_idx(tmp_path / 'wrong', 2049, (2, 2, 2), numpy.zeros(8))
    write_idx(tmp_path / 'short', 2051, (2, 2, 2), numpy.zeros(7))
    write_idx(tmp_path / 'labels', 2049, (3,), [0, 1, 2])

    with pytest.raises(DataError, match='bad magic'):
        dataset.load_idx(tmp_path / 'wrong')
    with pytest.raises(DataError, match='truncated'):
        dataset.load_idx(tmp_path / 'short')
    with pytest.raises(DataError, match='count mismatch'):
        dataset.load_idx(tmp_path / 'images', tmp_path / 'labels')
    with pytest.raises(DataError):
        dataset.load_idx(tmp_path / 'missing')

def test_load_csv(tmp_path):
    path = tmp_path / 'a.csv'
    path.write_text("1,2\n3,4\n5,6\n")
    data = dataset.load_csv(str(path))
    assert_array_equal(data.values, [[1, 2], [3, 4], [5, 6]])
    assert data.labels is None

    path.write_text("1,2,0\n3,4,1\n")
    data = dataset.load_csv(str(path), has_labels=True)
    assert_array_equal(data.values, [[1, 2], [3, 4]])
    assert_array_equal(data.labels, [0, 1])

    path.write_text("x,y\n1,2\n")
    data = dataset.load_csv(str(path), header=True)
    assert_array_equal(data.values, [[1, 2]])

def test_load_csv_errors(tmp_path):
    path = tmp_path / 'a.csv'
    path.write_text("1,2\n3\n")
    with pytest.raises(DataError, match='ragged row'):
        dataset.load_csv(str(path))

    path.write_text("1,2\n3,abc\n")
    with pytest.raises(DataError, match=r'a.csv:2: non-numeric'):
        dataset.load_csv(str(path))

    path.write_text("1,2,0.5\n")
    with pytest.raises(DataError, match='integers'):
        dataset.load_csv(str(path), has_labels=True)

def test_csv_roundtrip(tmp_path):
    rng = numpy.random.RandomState(3)
    values = rng.normal(size=(5, 3)) * 10. ** rng.randint(-20, 20, size=(5, 3))
    data = dataset.DataMatrix(values, labels=[0, 1, 2, 1, 0])
    path = str(tmp_path / 'b.csv')
    dataset.save_csv(path, data)
    data2 = dataset.load_csv(path, has_labels=True)
    assert_array_equal(data2.values, data.values)
    assert_array_equal(data2.labels, data.labels)

def test_load_labels(tmp_path):
    path = tmp_path / 'labels.csv'
    path.write_text("0,3\n1,1\n2,3\n")
    assert_array_equal(dataset.load_labels(str(path)), [3, 1, 3])
    path.write_text("2\n0\n")
    assert_array_equal(dataset.load_labels(str(path)), [2, 0])

def test_make_blobs():
    data = dataset.make_blobs(1, 20, 3, seed=1)
    assert_array_equal(data.labels, 0)

    data = dataset.make_blobs(5, 10, 2, spread=0.1, separation=3.0, seed=2)
    assert data.shape == (50, 2)
    assert_array_equal(numpy.bincount(data.labels), 10)

    centers = numpy.array([data.values[data.labels == k].mean(axis=0) for k in range(5)])
    d = numpy.sqrt(((centers[:, None] - centers[None, :]) ** 2).sum(axis=-1))
    assert d[numpy.triu_indices(5, 1)].min() > 3.0 - 0.2

    data2 = dataset.make_blobs(5, 10, 2, spread=0.1, separation=3.0, seed=2)
    assert_array_equal(data.values, data2.values)

    with pytest.raises(ValueError):
        dataset.make_blobs(2, 10, 2, spread=0)

def test_subsample():
    data = dataset.make_blobs(3, 10, 2, seed=0)

    full = dataset.subsample(data, 30, seed=1)
    order = numpy.lexsort(full.values.T)
    assert_array_equal(full.values[order], data.values[numpy.lexsort(data.values.T)])

    one = dataset.subsample(data, 1, seed=1)
    assert (data.values == one.values[0]).all(axis=1).any()

    a = dataset.subsample(data, 10, seed=5)
    b = dataset.subsample(data, 10, seed=5)
    assert_array_equal(a.values, b.values)
    assert_array_equal(a.labels, b.labels)

    with pytest.raises(ValueError):
        dataset.subsample(data, 31)

def test_disjoint_subsamples():
    data = dataset.DataMatrix(numpy.arange(20.).reshape(10, 2))
    a, b = dataset.disjoint_subsamples(data, 6, 4, seed=2)
    assert a.rows == 6 and b.rows == 4
    assert len(set(a.values[:, 0]) & set(b.values[:, 0])) == 0
    with pytest.raises(ValueError):
        dataset.disjoint_subsamples(data, 6, 5)
