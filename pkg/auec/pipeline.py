"""
The stages of a run, as used by the command line.

Each ``run_*`` function takes a resolved :class:`auec.config.PipelineConfig`
and does one stage; :func:`run_pipeline` chains them:

    data X -> stage I (autoencoder) -> Y -> stage II (UMAP) -> Z
           -> stage III (clustering) -> labels -> evaluation

Files are written to ``output.dir`` by rank 0 only:

==================  ==================================================
model.npz           checkpoint of the autoencoder
train_log.csv       per epoch losses of both training phases
spectrum.csv        per batch eigenvalues (``output.diagnostics``)
compressed.csv      Y, with the ground truth labels as last column
embedding.csv       Z, with the ground truth labels as last column
labels.csv          ``index,label`` of the predicted clusters
centroids.csv       cluster means in Z
metrics.txt/.csv    ACC, NMI and ARI
scatter_*.svg       Z coloured by truth and by prediction (2-d Z only)
confusion.svg       confusion matrix of the prediction
==================  ==================================================
"""
import os
import numpy
import logging
from contextlib import contextmanager

from mpi4py import MPI

from . import dataset
from . import nn
from . import spectral
from . import trainer
from . import umap
from . import clustering
from . import metrics
from . import plotting
from .errors import AuecError, DataError, NumericalError
from .tools import Timers

logger = logging.getLogger(__name__)

timers = Timers()

@contextmanager
def stage(name):
    """
    Time a stage and tag the auec errors leaving it with its name.
    """
    logger.info("%s: start", name)
    try:
        with timers[name] as t:
            yield
    except AuecError as e:
        if e.stage is None:
            e.stage = name
        raise
    logger.info("%s: done in %.3f s", name, t.spent)

class Output(object):
    """ The output directory of a run; only rank 0 writes. """
    def __init__(self, path, comm=None):
        if comm is None:
            comm = MPI.COMM_WORLD
        self.path = path
        self.comm = comm
        if self.writer:
            if not os.path.isdir(path):
                os.makedirs(path)

    @property
    def writer(self):
        return self.comm.rank == 0

    def __call__(self, name):
        return os.path.join(self.path, name)

def load_data(cfg, test=False):
    """
    The data set of cfg, subsampled if ``dataset.subsample`` is set.

    With test=True the held out source (``dataset.test_*``) is loaded.
    """
    prefix = 'dataset.test_' if test else 'dataset.'
    blobs = dict(per_cluster=cfg['blobs.per_cluster'], dim=cfg['blobs.dim'],
                 spread=cfg['blobs.spread'], separation=cfg['blobs.separation'],
                 seed=cfg['blobs.seed'] + (1 if test else 0))
    data = dataset.load_source(cfg['dataset.source'],
            images=cfg[prefix + 'images'], labels=cfg[prefix + 'labels'],
            path=cfg[prefix + 'path'], has_labels=cfg['dataset.has_labels'],
            header=cfg['dataset.header'], K=cfg['K'], blobs=blobs)
    n = cfg['dataset.test_subsample' if test else 'dataset.subsample']
    if n > 0:
        try:
            data = dataset.subsample(data, n, cfg['dataset.seed'])
        except ValueError as e:
            raise DataError(str(e))
    logger.info("data: %d rows of %d features%s", data.rows, data.cols,
            ', labelled' if data.labels is not None else '')
    cfg.validate_input(data.cols)
    return data

def suggest_K(Y, K, gamma=None, max_rows=1000, seed=0):
    """
    The number of clusters the spectral gap of Y suggests, logged next to
    the configured K.

    Up to 2 K clusters are considered, on at most max_rows random rows.
    gamma defaults to the median heuristic.

    Returns
    -------
    K : int or None
        None if Y is too small or too degenerate to tell.
    """
    if Y.rows > max_rows:
        Y = dataset.subsample(Y, max_rows, seed)
    max_K = min(2 * K, Y.rows - 1)
    if max_K < 2:
        return None
    try:
        if gamma is None:
            gamma = spectral.median_gamma(Y.values, seed=seed)
        suggested, spectrum = spectral.spectral_gap_heuristic(Y.values, max_K, gamma)
    except (DataError, NumericalError) as e:
        logger.warning("no estimate of K from the spectral gap: %s", e)
        return None
    logger.info("the spectral gap of the compressed data suggests K = %d; K = %d is configured",
            suggested, K)
    return suggested

def run_train(cfg, X, out):
    """
    Stage I: pre-train, then train on the joint loss.

    Writes the checkpoint and the training log, and logs the number of
    clusters the spectral gap of the compressed data suggests.

    Returns
    -------
    model : nn.Autoencoder
    reports : list of trainer.TrainReport
    """
    tcfg = cfg.trainer_config()
    with stage('stage I'):
        model = nn.Autoencoder.create(X.cols, hidden=cfg['trainer.hidden'],
                latent_dim=cfg['trainer.latent_dim'], seed=cfg['trainer.seed'],
                output_activation=cfg['trainer.output_activation'])
        model, pre = trainer.pretrain(model, X, tcfg)
        if cfg['output.diagnostics'] and out.writer:
            with trainer.SpectrumLog(out('spectrum.csv')) as log:
                model, joint = trainer.train_joint(model, X, tcfg, diagnostics=log)
        else:
            model, joint = trainer.train_joint(model, X, tcfg)
        suggest_K(X.with_values(trainer.compress(model, X)), cfg['K'], joint.gamma,
                seed=cfg['dataset.seed'])
    if out.writer:
        model.save(out('model.npz'))
        trainer.write_reports(out('train_log.csv'), [pre, joint])
    return model, [pre, joint]

def obtain_model(cfg, X, out):
    """ The checkpoint of ``trainer.checkpoint``, or a freshly trained model. """
    path = cfg['trainer.checkpoint']
    if path is None:
        return run_train(cfg, X, out)[0]
    with stage('stage I'):
        model = nn.Autoencoder.load(path)
        if model.input_dim != X.cols:
            raise DataError("checkpoint %s takes %d features, the data has %d"
                    % (path, model.input_dim, X.cols))
        logger.info("reusing checkpoint %s", path)
    return model

def run_compress(model, X):
    """ Y = f(X), labels carried over. """
    with stage('stage I'):
        return X.with_values(trainer.compress(model, X))

def run_umap(cfg, Y, comm=None):
    """ Stage II: the refined embedding Z. """
    ucfg = cfg.umap_config()
    with stage('stage II'):
        try:
            ucfg.validate(Y.rows, Y.cols)
        except ValueError as e:
            raise DataError(str(e))
        return Y.with_values(umap.embed(Y, ucfg, comm=comm))

def run_cluster(cfg, Z, comm=None):
    """ Stage III: K-means or MDBSCAN on Z. """
    K = cfg['K']
    with stage('stage III'):
        if K > Z.rows:
            raise DataError("cannot form K = %d clusters of %d points" % (K, Z.rows))
        if cfg['cluster.method'] == 'kmeans':
            return clustering.kmeans(Z, K, restarts=cfg['cluster.restarts'],
                    seed=cfg['cluster.seed'], comm=comm)
        min_pts = min(cfg['cluster.min_pts'], Z.rows)
        eps = cfg['cluster.eps']
        if eps == 'auto':
            eps = clustering.knee_eps(Z, min_pts)
        return clustering.mdbscan(Z, K, eps, min_pts)

def run_eval(truth, assignment):
    """ Scores and confusion matrix of a prediction. """
    with stage('evaluation'):
        scores = metrics.evaluate(truth, assignment.labels)
        cm = metrics.confusion(truth, assignment.labels)
        worst = metrics.worst_confusion(cm)
        logger.info("ACC %.2f%%, NMI %.2f%%, ARI %.2f%%", 100 * scores.acc, 100 * scores.nmi, 100 * scores.ari)
        if worst is not None:
            logger.info("worst confusion: %.2f%% of class %s in the cluster matched to another class",
                    worst[3], worst[0])
        return scores, cm

def write_scatter(path, Z, labels, title):
    """ Scatter plot of a 2-d embedding; labels are mapped to palette entries. """
    classes, colors = numpy.unique(labels, return_inverse=True)
    if len(classes) > len(plotting.PALETTE):
        logger.warning("%d classes are more than the %d colors of the palette; %s not drawn",
                len(classes), len(plotting.PALETTE), path)
        return
    spec = plotting.ScatterSpec(Z, colors.ravel(), title=title, legend=[str(c) for c in classes])
    plotting.render_scatter(spec, path)

def export(out, name, Z, assignment, scores=None, cm=None, plots=True):
    """ Write the embedding, the prediction and its evaluation. """
    if not out.writer:
        return
    suffix = '' if name is None else '_' + name
    dataset.save_csv(out('embedding%s.csv' % suffix), Z)
    clustering.save_assignment(out('labels%s.csv' % suffix), assignment)
    if assignment.centroids is not None:
        clustering.save_centroids(out('centroids%s.csv' % suffix), assignment)
    if plots and Z.cols == 2:
        if Z.labels is not None:
            write_scatter(out('scatter_truth%s.svg' % suffix), Z.values, Z.labels, 'ground truth')
        write_scatter(out('scatter_pred%s.svg' % suffix), Z.values, assignment.labels, 'prediction')
    if plots and cm is not None:
        plotting.render_confusion(cm, out('confusion%s.svg' % suffix))

def write_metrics(out, rows):
    if not out.writer or not rows:
        return
    with open(out('metrics.txt'), 'w') as ff:
        ff.write(metrics.format_report(rows))
    metrics.write_report(out('metrics.csv'), rows)

def method_name(cfg, refined=True):
    """
    A name of the configured pipeline, e.g. AUEC-MDBSCAN or UMAP+KMS.

    With refined=False only the clustering is named, for input that did
    not go through stages I and II.
    """
    name = {'kmeans': 'KMS', 'mdbscan': 'MDBSCAN'}[cfg['cluster.method']]
    if not refined:
        return name
    if cfg['trainer.enabled'] and cfg['umap.enabled']:
        return 'AUEC-' + name
    if cfg['umap.enabled']:
        return 'UMAP+' + name
    if cfg['trainer.enabled']:
        return 'AE+' + name
    return name

def refine(cfg, X, model, comm=None):
    """ Stages I (encoding only) and II as configured; returns Z. """
    Y = X if model is None else run_compress(model, X)
    if cfg['umap.enabled']:
        return run_umap(cfg, Y, comm)
    return Y

def run_pipeline(cfg, comm=None):
    """
    All stages on the data set of cfg.

    Returns
    -------
    Z : dataset.DataMatrix
    assignment : clustering.ClusterAssignment
    scores : metrics.Scores or None
        without ground truth labels, None.
    """
    out = Output(cfg['output.dir'], comm)
    X = load_data(cfg)
    model = obtain_model(cfg, X, out) if cfg['trainer.enabled'] else None
    Z = refine(cfg, X, model, comm)
    assignment = run_cluster(cfg, Z, comm)

    scores = cm = None
    if Z.labels is not None:
        scores, cm = run_eval(Z.labels, assignment)
        write_metrics(out, [(method_name(cfg), scores)])
    export(out, None, Z, assignment, scores, cm, plots=cfg['output.plots'])
    logger.info("timing\n%s", timers)
    return Z, assignment, scores

def robustness_split(cfg):
    """ The training and the held out data of the robustness protocol. """
    n_train = cfg['robustness.train_subsample']
    n_test = cfg['robustness.test_subsample']
    if n_train > 0 and n_test > 0:
        data = load_data(cfg)
        try:
            return dataset.disjoint_subsamples(data, n_train, n_test, cfg['robustness.seed'])
        except ValueError as e:
            raise DataError(str(e))
    held_out = {'mnist': 'dataset.test_images', 'csv': 'dataset.test_path', 'blobs': None}[cfg['dataset.source']]
    if held_out is not None and cfg[held_out] is None:
        raise DataError("the robustness run needs robustness.train_subsample and "
                "robustness.test_subsample, or %s" % held_out)
    return load_data(cfg), load_data(cfg, test=True)

def run_robustness(cfg, comm=None):
    """
    Stage I on the training data only; stages II and III separately on
    the training and the held out data.

    Returns
    -------
    rows : list
        ``('train', Scores)`` and ``('test', Scores)``.
    """
    out = Output(cfg['output.dir'], comm)
    train, test = robustness_split(cfg)
    if train.labels is None or test.labels is None:
        raise DataError("the robustness protocol needs ground truth labels")
    model = obtain_model(cfg, train, out) if cfg['trainer.enabled'] else None

    rows = []
    for name, data in [('train', train), ('test', test)]:
        Z = refine(cfg, data, model, comm)
        assignment = run_cluster(cfg, Z, comm)
        scores, cm = run_eval(Z.labels, assignment)
        export(out, name, Z, assignment, scores, cm, plots=cfg['output.plots'])
        rows.append((name, scores))
    write_metrics(out, rows)
    logger.info("timing\n%s", timers)
    return rows
