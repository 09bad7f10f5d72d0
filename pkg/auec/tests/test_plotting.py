import re
import numpy
import pytest
from xml.etree import ElementTree

from auec import plotting
from auec.metrics import confusion

def parse(path):
    return ElementTree.parse(str(path)).getroot()

def group(root, gid):
    for el in root.iter():
        if el.get('id') == gid:
            return el
    raise AssertionError("no element with id %s" % gid)

def fills(el):
    found = []
    for child in el.iter():
        m = re.search(r'fill: *(#[0-9a-f]{6})', child.get('style', ''))
        if m and child.tag.split('}')[-1] in ('path', 'use'):
            found.append(m.group(1))
    return found

def test_scatter(tmp_path):
    spec = plotting.ScatterSpec([[0., 0.], [1., 2.], [3., 1.]], [0, 1, 2], title='three')
    plotting.render_scatter(spec, str(tmp_path / 'a.svg'))
    root = parse(tmp_path / 'a.svg')
    assert root.tag.endswith('svg')
    markers = fills(group(root, 'points'))
    assert markers == plotting.PALETTE[:3]

def test_scatter_empty(tmp_path):
    spec = plotting.ScatterSpec(numpy.zeros((0, 2)), [])
    plotting.render_scatter(spec, str(tmp_path / 'empty.svg'))
    root = parse(tmp_path / 'empty.svg')
    assert fills(group(root, 'points')) == []

def test_scatter_deterministic(tmp_path):
    rng = numpy.random.RandomState(0)
    spec = plotting.ScatterSpec(rng.normal(size=(200, 2)), rng.randint(0, 10, 200),
            legend=['digit %d' % d for d in range(10)])
    plotting.render_scatter(spec, str(tmp_path / 'a.svg'))
    plotting.render_scatter(spec, str(tmp_path / 'b.svg'))
    with open(str(tmp_path / 'a.svg'), 'rb') as ff:
        a = ff.read()
    with open(str(tmp_path / 'b.svg'), 'rb') as ff:
        b = ff.read()
    assert a == b
    assert len(fills(group(parse(tmp_path / 'a.svg'), 'points'))) == 200

def test_scatter_preconditions(tmp_path):
    with pytest.raises(ValueError):
        plotting.ScatterSpec(numpy.zeros((3, 3)), [0, 0, 0])
    with pytest.raises(ValueError):
        plotting.ScatterSpec(numpy.zeros((2, 2)), [0, 10])
    with pytest.raises(ValueError):
        plotting.ScatterSpec([[0., numpy.inf]], [0])
    spec = plotting.ScatterSpec(numpy.zeros((2, 2)), [0, 1])
    with pytest.raises(OSError):
        plotting.render_scatter(spec, str(tmp_path / 'missing' / 'a.svg'))

def cell_fills(root, shape):
    return numpy.array([[fills(group(root, 'cell_%d_%d' % (i, j)))[0]
                         for j in range(shape[1])] for i in range(shape[0])])

def test_confusion_diagonal(tmp_path):
    cm = confusion([0, 0, 1, 2, 2], [2, 2, 0, 1, 1])
    plotting.render_confusion(cm, str(tmp_path / 'cm.svg'))
    root = parse(tmp_path / 'cm.svg')
    assert plotting.WORST not in cell_fills(root, cm.shape)

def test_confusion_worst(tmp_path):
    cm = confusion([0, 0, 0, 1, 1], [0, 0, 1, 1, 1])
    plotting.render_confusion(cm, str(tmp_path / 'cm.svg'), title='worst')
    root = parse(tmp_path / 'cm.svg')
    colors = cell_fills(root, cm.shape)
    assert colors[0, 1] == plotting.WORST
    assert (colors == plotting.WORST).sum() == 1

def test_confusion_percentages(tmp_path):
    rng = numpy.random.RandomState(1)
    truth = rng.randint(0, 4, 300)
    pred = numpy.where(rng.uniform(size=300) < 0.8, truth, rng.randint(0, 4, 300))
    cm = confusion(truth, pred)
    plotting.render_confusion(cm, str(tmp_path / 'cm.svg'))
    root = parse(tmp_path / 'cm.svg')
    for i in range(4):
        row = [float(''.join(group(root, 'pct_%d_%d' % (i, j)).itertext())) for j in range(4)]
        assert abs(sum(row) - 100) <= 0.05 * 4 + 1e-9
