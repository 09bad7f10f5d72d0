import itertools
import numpy
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from auec import metrics

def brute_accuracy(truth, pred):
    truth = numpy.asarray(truth)
    pred = numpy.asarray(pred)
    t = numpy.unique(truth)
    p = numpy.unique(pred)
    best = 0
    # injective maps of the smaller label set into the larger one
    if len(p) <= len(t):
        for image in itertools.permutations(t, len(p)):
            mapping = dict(zip(p, image))
            best = max(best, sum(mapping[b] == a for a, b in zip(truth, pred)))
    else:
        for image in itertools.permutations(p, len(t)):
            mapping = dict(zip(t, image))
            best = max(best, sum(mapping[a] == b for a, b in zip(truth, pred)))
    return best / float(len(truth))

def test_confusion():
    cm = metrics.confusion([0, 1, 2], [0, 1, 2])
    assert_array_equal(cm.counts, numpy.eye(3))
    cm = metrics.confusion([0, 0, 1, 1], [0, 1, 0, 1])
    assert_array_equal(cm.counts, numpy.ones((2, 2)))
    assert cm.N == 4

    cm = metrics.confusion([5, 5, 7], [3, 9, 9])
    assert_array_equal(cm.row_labels, [5, 7])
    assert_array_equal(cm.col_labels, [3, 9])
    assert_array_equal(cm.counts, [[1, 1], [0, 1]])

    with pytest.raises(ValueError):
        metrics.confusion([0, 1], [0])
    with pytest.raises(ValueError):
        metrics.confusion([0, 1], [0, -1])

def test_percentages():
    rng = numpy.random.RandomState(0)
    cm = metrics.confusion(rng.randint(0, 4, 200), rng.randint(0, 5, 200))
    assert_allclose(cm.percentages().sum(axis=1), 100, atol=1e-6)

def test_accuracy():
    assert metrics.accuracy([0, 1, 2, 2], [0, 1, 2, 2]) == 1.0
    assert metrics.accuracy([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert metrics.accuracy([0, 0, 1, 1], [0, 1, 0, 1]) == 0.5
    # more clusters than classes
    assert metrics.accuracy([0, 0, 0, 1], [0, 1, 2, 3]) == 0.5

def test_accuracy_oracle():
    rng = numpy.random.RandomState(1)
    for i in range(300):
        N = rng.randint(1, 9)
        truth = rng.randint(0, rng.randint(1, 4), N)
        pred = rng.randint(0, rng.randint(1, 4), N)
        acc = metrics.accuracy(truth, pred)
        assert_allclose(acc, brute_accuracy(truth, pred), rtol=1e-12)
        cm = metrics.confusion(truth, pred)
        assert acc >= cm.counts.max() / float(N)

def test_accuracy_exhaustive_small():
    # every labelling of 4 points with at most 3 clusters
    for truth in itertools.product(range(3), repeat=4):
        for pred in itertools.product(range(3), repeat=4):
            assert_allclose(metrics.accuracy(truth, pred), brute_accuracy(truth, pred), rtol=1e-12)

def test_nmi():
    assert_allclose(metrics.nmi([0, 0, 1, 1], [1, 1, 0, 0]), 1.0, rtol=1e-12)
    assert abs(metrics.nmi([0, 0, 1, 1], [0, 1, 0, 1])) < 1e-15
    assert metrics.nmi([0, 0, 0], [1, 1, 1]) == 1.0
    assert metrics.nmi([0, 0, 0], [0, 1, 1]) == 0.0

    # contingency [[2, 0], [0, 2], [0, 2]]
    hu = numpy.log(3)
    hv = -(1. / 3 * numpy.log(1. / 3) + 2. / 3 * numpy.log(2. / 3))
    mi = 2. / 6 * numpy.log(6 * 2. / (2 * 2)) + 2 * (2. / 6 * numpy.log(6 * 2. / (2 * 4)))
    assert_allclose(metrics.nmi([0, 0, 1, 1, 2, 2], [0, 0, 1, 1, 1, 1]),
                    mi / numpy.sqrt(hu * hv), rtol=1e-12)

def test_ari():
    assert metrics.ari([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert_allclose(metrics.ari([0, 0, 1, 1], [0, 1, 0, 1]), -0.5, rtol=1e-12)
    assert metrics.ari([0, 0, 1, 2], [3, 3, 0, 1]) == 1.0
    assert metrics.ari([0, 1, 2], [2, 0, 1]) == 1.0
    assert metrics.ari([0, 0, 0], [4, 4, 4]) == 1.0
    assert metrics.ari([0, 1, 2], [0, 0, 0]) == 0.0
    assert metrics.ari([3], [1]) == 1.0
    with pytest.raises(ValueError):
        metrics.ari([0, 1], [0, -1])
    with pytest.raises(ValueError):
        metrics.nmi([0, 1, 1], [0, 1])

def test_permutation_invariance():
    rng = numpy.random.RandomState(2)
    truth = rng.randint(0, 5, 60)
    pred = numpy.where(rng.uniform(size=60) < 0.7, truth, rng.randint(0, 5, 60))
    reference = metrics.evaluate(truth, pred)
    for i in range(1000):
        pt = rng.permutation(5)
        pp = rng.permutation(5)
        scores = metrics.evaluate(pt[truth], pp[pred])
        assert_allclose(scores, reference, rtol=1e-12)

def test_symmetry():
    rng = numpy.random.RandomState(3)
    a = rng.randint(0, 4, 50)
    b = rng.randint(0, 3, 50)
    assert_allclose(metrics.nmi(a, b), metrics.nmi(b, a), rtol=1e-12)
    assert_allclose(metrics.ari(a, b), metrics.ari(b, a), rtol=1e-12)

def test_worst_confusion():
    assert metrics.worst_confusion(metrics.confusion([0, 1, 2], [2, 0, 1])) is None

    truth = [4] * 40 + [9] * 10
    pred = [1] * 39 + [0] + [0] * 10
    cm = metrics.confusion(truth, pred)
    t, p, count, pct = metrics.worst_confusion(cm)
    assert (t, p, count) == (4, 0, 1)
    assert_allclose(pct, 2.5)

    matched = cm.matched()
    assert_array_equal(matched.col_labels, [1, 0])
    assert_array_equal(numpy.diag(matched.counts), [39, 10])

def test_report(tmp_path):
    rows = [('KMS', metrics.Scores(0.5907, 0.5095, 0.4047)),
            ('AUEC-MDBSCAN', metrics.Scores(1.0, 1.0, 1.0))]
    text = metrics.format_report(rows)
    lines = text.splitlines()
    assert lines[0].split() == ['method', 'ACC', 'NMI', 'ARI']
    assert lines[1].split() == ['KMS', '59.07%', '50.95%', '40.47%']
    assert lines[2].split() == ['AUEC-MDBSCAN', '100.00%', '100.00%', '100.00%']

    metrics.write_report(str(tmp_path / 'metrics.csv'), rows)
    with open(str(tmp_path / 'metrics.csv')) as ff:
        assert ff.read() == 'method,ACC,NMI,ARI\nKMS,59.07,50.95,40.47\nAUEC-MDBSCAN,100.00,100.00,100.00\n'
