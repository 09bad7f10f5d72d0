"""
SVG figures of embeddings and confusion matrices.

Figures are drawn with the object oriented matplotlib API (no pyplot
state) and saved with a fixed hash salt and no date stamp, so equal input
gives byte identical files. Text is kept as SVG text elements.

Element ids usable by readers of the files:

- ``points``: the group of scatter markers;
- ``cell_i_j``: the confusion cell of true row i and matched column j;
- ``pct_i_j``: its percentage label.
"""
import numpy
import matplotlib
from matplotlib.figure import Figure
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.lines import Line2D
from matplotlib.patches import Rectangle
from matplotlib.colors import to_hex

from .metrics import worst_confusion

# matplotlib tab10
PALETTE = [
    '#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd',
    '#8c564b', '#e377c2', '#7f7f7f', '#bcbd22', '#17becf',
]

WORST = '#ff0000'

RCPARAMS = {
    'svg.hashsalt': 'auec',
    'svg.fonttype': 'none',
    'font.size': 9,
}

class ScatterSpec(object):
    """
    A 2-d scatter plot coloured by class.

    Parameters
    ----------
    points : array_like
        N x 2 coordinates.
    colors : array_like, int
        class index of each point, within the palette.
    title : str
    legend : list of str or None
        name of each class; defaults to the class index.
    palette : list of str
        hex colours, indexed by class.
    """
    def __init__(self, points, colors, title='', legend=None, palette=PALETTE):
        points = numpy.asarray(points, dtype='f8')
        if len(points) == 0:
            points = points.reshape(0, 2)
        colors = numpy.asarray(colors, dtype='i8').ravel()
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError("scatter plots need N x 2 points, got shape %s" % (points.shape,))
        if not numpy.isfinite(points).all():
            raise ValueError("scatter points must be finite")
        if len(colors) != len(points):
            raise ValueError("expecting %d colors, got %d" % (len(points), len(colors)))
        if len(colors) and (colors.min() < 0 or colors.max() >= len(palette)):
            raise ValueError("color indices must be in [0, %d)" % len(palette))
        self.points = points
        self.colors = colors
        self.title = title
        self.legend = legend
        self.palette = list(palette)

    def classes(self):
        return numpy.unique(self.colors)

    def label(self, k):
        if self.legend is None:
            return str(k)
        return str(self.legend[k])

def _save(fig, path):
    FigureCanvasSVG(fig)
    fig.savefig(path, format='svg', metadata={'Date': None})

def render_scatter(spec, path):
    """ Write the scatter plot of spec as SVG at path. """
    with matplotlib.rc_context(RCPARAMS):
        fig = Figure(figsize=(6, 6))
        ax = fig.add_subplot(111)
        size = 16 if len(spec.points) < 1000 else 2
        fill = [spec.palette[c] for c in spec.colors]
        points = ax.scatter(spec.points[:, 0], spec.points[:, 1], s=size, c=fill or None, linewidths=0)
        points.set_gid('points')

        handles = [Line2D([], [], marker='o', linestyle='', color=spec.palette[k], label=spec.label(k))
                   for k in spec.classes()]
        if handles:
            ax.legend(handles=handles, loc='best', fontsize=7, markerscale=0.8)
        if spec.title:
            ax.set_title(spec.title)
        _save(fig, path)

def render_confusion(cm, path, title=''):
    """
    Write the row percentages of a confusion matrix as an SVG grid.

    Columns are reordered by the optimal matching so that matched pairs lie
    on the diagonal; the unmatched cell with the largest percentage is
    drawn in red.
    """
    cm = cm.matched()
    pct = cm.percentages()
    worst = worst_confusion(cm)
    nrow, ncol = cm.shape
    cmap = matplotlib.colormaps['Blues']

    with matplotlib.rc_context(RCPARAMS):
        fig = Figure(figsize=(1 + 0.6 * ncol, 1 + 0.6 * nrow))
        ax = fig.add_subplot(111)
        for i in range(nrow):
            for j in range(ncol):
                if worst is not None and (cm.row_labels[i], cm.col_labels[j]) == worst[:2]:
                    face = WORST
                else:
                    face = to_hex(cmap(0.85 * pct[i, j] / 100.))
                cell = Rectangle((j, i), 1, 1, facecolor=face, edgecolor='white')
                cell.set_gid('cell_%d_%d' % (i, j))
                ax.add_patch(cell)
                dark = pct[i, j] > 50
                text = ax.text(j + 0.5, i + 0.5, '%.1f' % pct[i, j], ha='center', va='center',
                        fontsize=7, color='white' if dark else 'black')
                text.set_gid('pct_%d_%d' % (i, j))

        ax.set_xlim(0, ncol)
        ax.set_ylim(nrow, 0)
        ax.set_xticks(numpy.arange(ncol) + 0.5)
        ax.set_xticklabels([str(l) for l in cm.col_labels])
        ax.set_yticks(numpy.arange(nrow) + 0.5)
        ax.set_yticklabels([str(l) for l in cm.row_labels])
        ax.set_xlabel('predicted cluster')
        ax.set_ylabel('true class')
        if title:
            ax.set_title(title)
        _save(fig, path)
