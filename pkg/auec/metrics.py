"""
External clustering scores against ground truth labels.

All scores are invariant under relabelling of either argument. Labels are
arbitrary non-negative integers; the noise label -1 is rejected.
"""
import numpy
from collections import namedtuple
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score

Scores = namedtuple('Scores', ['acc', 'nmi', 'ari'])

class ConfusionMatrix(object):
    """
    Contingency table of two labellings.

    Attributes
    ----------
    counts : array_like, int
        ``counts[i, j]`` points with true label ``row_labels[i]`` and
        predicted label ``col_labels[j]``.
    row_labels : array_like
        sorted distinct true labels.
    col_labels : array_like
        sorted distinct predicted labels.
    """
    def __init__(self, counts, row_labels=None, col_labels=None):
        counts = numpy.asarray(counts, dtype='i8')
        if counts.ndim != 2 or (counts < 0).any():
            raise ValueError("counts must be a non-negative matrix")
        if row_labels is None:
            row_labels = numpy.arange(counts.shape[0])
        if col_labels is None:
            col_labels = numpy.arange(counts.shape[1])
        self.counts = counts
        self.row_labels = numpy.asarray(row_labels)
        self.col_labels = numpy.asarray(col_labels)

    @property
    def N(self):
        return int(self.counts.sum())

    @property
    def shape(self):
        return self.counts.shape

    def percentages(self):
        """ counts normalized per row to 100. """
        rows = self.counts.sum(axis=1, keepdims=True)
        return 100. * self.counts / numpy.maximum(rows, 1)

    def matching(self):
        """
        The one to one pairing of rows and columns with the largest total
        count.

        Returns
        -------
        rows, cols : array_like
            matched index pairs, ``min(shape)`` of them.
        """
        return linear_sum_assignment(self.counts, maximize=True)

    def matched(self):
        """
        A copy with the columns reordered so that the column matched to row
        i is column i; unmatched columns follow in label order.
        """
        rows, cols = self.matching()
        order = numpy.full(self.shape[0], -1)
        order[rows] = cols
        order = [int(c) for c in order if c >= 0]
        taken = set(order)
        order += [c for c in range(self.shape[1]) if c not in taken]
        return ConfusionMatrix(self.counts[:, order], self.row_labels, self.col_labels[order])

def _labels(true_labels, pred_labels):
    true_labels = numpy.asarray(true_labels).ravel()
    pred_labels = numpy.asarray(pred_labels).ravel()
    if len(true_labels) != len(pred_labels):
        raise ValueError("label vectors differ in length: %d and %d" % (len(true_labels), len(pred_labels)))
    if len(true_labels) == 0:
        raise ValueError("empty label vectors")
    if true_labels.min() < 0 or pred_labels.min() < 0:
        raise ValueError("noise labels cannot be scored; assign them first")
    return true_labels, pred_labels

def confusion(true_labels, pred_labels):
    """ The :class:`ConfusionMatrix` of two labellings of the same points. """
    true_labels, pred_labels = _labels(true_labels, pred_labels)
    rl, ri = numpy.unique(true_labels, return_inverse=True)
    cl, ci = numpy.unique(pred_labels, return_inverse=True)
    counts = numpy.zeros((len(rl), len(cl)), dtype='i8')
    numpy.add.at(counts, (ri.ravel(), ci.ravel()), 1)
    return ConfusionMatrix(counts, rl, cl)

def accuracy(true_labels, pred_labels):
    """
    Fraction of points labelled correctly under the best one to one mapping
    of predicted clusters to true classes (Hungarian assignment).
    """
    cm = confusion(true_labels, pred_labels)
    rows, cols = cm.matching()
    return cm.counts[rows, cols].sum() / float(cm.N)

def nmi(true_labels, pred_labels):
    """
    Normalized mutual information, ``I(U; V) / sqrt(H(U) H(V))`` with
    natural logarithms.

    Two single cluster labellings score 1; otherwise a labelling of zero
    entropy scores 0.
    """
    true_labels, pred_labels = _labels(true_labels, pred_labels)
    score = normalized_mutual_info_score(true_labels, pred_labels, average_method='geometric')
    # rounding may step just outside [0, 1]
    return float(min(max(score, 0.0), 1.0))

def ari(true_labels, pred_labels):
    """
    Adjusted Rand index from pair counts.

    Identical partitions score 1, including the cases where the index is
    not defined (all singletons, one cluster, fewer than two points).
    """
    true_labels, pred_labels = _labels(true_labels, pred_labels)
    return float(adjusted_rand_score(true_labels, pred_labels))

def evaluate(true_labels, pred_labels):
    """ ACC, NMI and ARI as a :class:`Scores` tuple of fractions. """
    return Scores(accuracy(true_labels, pred_labels),
                  nmi(true_labels, pred_labels),
                  ari(true_labels, pred_labels))

def worst_confusion(cm):
    """
    The largest misassignment after optimal matching.

    Returns
    -------
    cell : tuple or None
        ``(true_label, pred_label, count, percent)`` of the unmatched cell
        with the largest row percentage, None if every point is matched.
    """
    rows, cols = cm.matching()
    pct = cm.percentages()
    off = cm.counts > 0
    off[rows, cols] = False
    if not off.any():
        return None
    masked = numpy.where(off, pct, -1.)
    i, j = numpy.unravel_index(numpy.argmax(masked), masked.shape)
    return (cm.row_labels[i], cm.col_labels[j], int(cm.counts[i, j]), pct[i, j])

def format_report(rows):
    """
    Text table of scores in percent, two decimals.

    Parameters
    ----------
    rows : list
        ``(name, Scores)`` pairs.
    """
    width = max([len('method')] + [len(name) for name, s in rows])
    lines = ['%-*s %8s %8s %8s' % (width, 'method', 'ACC', 'NMI', 'ARI')]
    for name, s in rows:
        lines.append('%-*s %7.2f%% %7.2f%% %7.2f%%' % (width, name, 100 * s.acc, 100 * s.nmi, 100 * s.ari))
    return '\n'.join(lines) + '\n'

def write_report(path, rows):
    """ CSV of ``method,ACC,NMI,ARI`` in percent, two decimals. """
    with open(path, 'w') as ff:
        ff.write('method,ACC,NMI,ARI\n')
        for name, s in rows:
            ff.write('%s,%.2f,%.2f,%.2f\n' % (name, 100 * s.acc, 100 * s.nmi, 100 * s.ari))
