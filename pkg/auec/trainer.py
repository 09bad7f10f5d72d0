"""
Training of the autoencoder (stage I).

Training runs in two phases over shuffled mini-batches:

1. :func:`pretrain` minimizes the reconstruction error alone;
2. :func:`train_joint` minimizes the joint loss

       J = lambda * psi(f(X_B)) + mse(X_B, g(f(X_B)))

   where psi is the clustering loss of :mod:`auec.spectral`, evaluated on
   the latent embedding of each batch with a kernel width that is fixed
   at the start of the phase.

A batch whose spectrum is degenerate (lambda_{K+1} vanishes, or the
eigenvalues around lambda_K collide) contributes its reconstruction term
only and is counted as skipped; its psi counts as 0 in the epoch mean, so
that ``J = lambda * mean(psi) + mean(rho)`` holds for every epoch.

Each phase starts a fresh optimizer state. Batches of epoch e are drawn
from ``RandomState([seed, e])``; with lambda = 0 both phases therefore do
the same work.
"""
import numpy
import logging

from . import nn
from . import spectral
from .errors import DegenerateSpectrumError, DivergenceError
from .tools import Timer

logger = logging.getLogger(__name__)

class TrainConfig(object):
    """
    Hyper-parameters of stage I.

    Parameters
    ----------
    K : int
        target number of clusters.
    lam : float
        weight lambda of the clustering loss; 0 trains for reconstruction only.
    batch_size : int
        at least K + 2.
    pretrain_epochs : int
    joint_epochs : int
    gamma : 'median' or float
        kernel width; 'median' applies :func:`spectral.median_gamma` to the
        embedding of the whole data set at the start of joint training.
    gamma_pairs : int
        pairs sampled by the median heuristic.
    learning_rate : float
    lr_decay : float
        the learning rate of epoch e is ``learning_rate * lr_decay ** e``.
    seed : int
        seed of the batch shuffling and the median heuristic.
    """
    def __init__(self, K=10, lam=1.0, batch_size=256, pretrain_epochs=5, joint_epochs=50,
            gamma='median', gamma_pairs=10000, learning_rate=1e-3, lr_decay=1.0, seed=0):
        if K < 1:
            raise ValueError("K must be positive")
        if batch_size < K + 2:
            raise ValueError("batch_size %d is too small for K = %d; needs at least %d" % (batch_size, K, K + 2))
        if pretrain_epochs < 0 or joint_epochs < 0:
            raise ValueError("number of epochs must be non-negative")
        if not lam >= 0:
            raise ValueError("lambda must be non-negative")
        if gamma != 'median' and not (isinstance(gamma, (int, float)) and gamma > 0):
            raise ValueError("gamma must be 'median' or a positive number")
        if not learning_rate > 0 or not lr_decay > 0:
            raise ValueError("learning rate and its decay must be positive")
        self.K = K
        self.lam = lam
        self.batch_size = batch_size
        self.pretrain_epochs = pretrain_epochs
        self.joint_epochs = joint_epochs
        self.gamma = gamma
        self.gamma_pairs = gamma_pairs
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.seed = seed

class TrainReport(object):
    """
    Per epoch statistics of a training phase.

    Attributes
    ----------
    phase : str
        'pretrain' or 'joint'.
    lam : float
    gamma : float or None
        kernel width used by the joint phase.
    J, psi, rho : list of float
        epoch means of the joint loss, the clustering loss and the
        reconstruction error.
    skipped : list of int
        batches with a degenerate spectrum.
    seconds : list of float
        wall time of the epochs.
    """
    columns = ['phase', 'epoch', 'J', 'psi', 'rho', 'skipped', 'seconds']

    def __init__(self, phase, lam, gamma=None):
        self.phase = phase
        self.lam = lam
        self.gamma = gamma
        self.J = []
        self.psi = []
        self.rho = []
        self.skipped = []
        self.seconds = []

    def __len__(self):
        return len(self.J)

    def append(self, J, psi, rho, skipped, seconds):
        self.J.append(J)
        self.psi.append(psi)
        self.rho.append(rho)
        self.skipped.append(skipped)
        self.seconds.append(seconds)

    def rows(self):
        return [(self.phase, e, self.J[e], self.psi[e], self.rho[e], self.skipped[e], self.seconds[e])
                for e in range(len(self))]

def write_reports(path, reports):
    """ Training log as CSV, one line per epoch of every report. """
    with open(path, 'w') as ff:
        ff.write(','.join(TrainReport.columns) + '\n')
        for report in reports:
            for row in report.rows():
                ff.write('%s,%d,%.17g,%.17g,%.17g,%d,%.3f\n' % row)

class SpectrumLog(object):
    """
    Per batch spectral diagnostics, written as CSV lines of
    ``epoch,batch,lambda_K,lambda_K+1,psi``.

    Use as a context manager and pass to :func:`train_joint`.
    """
    def __init__(self, path):
        self.path = path
        self.ff = None

    def __enter__(self):
        self.ff = open(self.path, 'w')
        self.ff.write('epoch,batch,lambda_K,lambda_K+1,psi\n')
        return self

    def __exit__(self, *args):
        self.ff.close()
        self.ff = None

    def write(self, epoch, batch, lK, lK1, psi):
        self.ff.write('%d,%d,%.17g,%.17g,%.17g\n' % (epoch, batch, lK, lK1, psi))

def batches(N, batch_size, seed, epoch):
    """ Index arrays of the shuffled mini-batches of an epoch. """
    perm = numpy.random.RandomState([seed, epoch]).permutation(N)
    return numpy.array_split(perm, max(1, N // batch_size))

def joint_loss_and_gradient(model, X, K, gamma, lam, check=False):
    """
    The joint loss of a batch and its parameter gradients.

    Parameters
    ----------
    model : nn.Autoencoder
    X : array_like
        the batch.
    K : int
    gamma : float
    lam : float
        with lam = 0 the clustering loss is not evaluated.
    check : bool
        verify the Laplacian spectrum.

    Returns
    -------
    J : float
        ``lam * psi + rho``; psi is 0 for a skipped batch.
    psi : float or None
        None if the batch was skipped or lam is 0.
    rho : float
    grads : list of array_like
        aligned with ``model.parameters()``.
    spectrum : spectral.LaplacianSpectrum or None

    Raises
    ------
    DivergenceError
        the latent embedding of the batch is not finite.
    """
    X = numpy.asarray(X, dtype='f8')
    t = nn.trace(model, X)
    Y, Xhat = t.latent, t.output
    if not numpy.isfinite(Y).all():
        raise DivergenceError("the latent embedding of the batch is not finite")
    rho = nn.mse(X, Xhat)
    output_grad = nn.mse_gradient(X, Xhat)

    psi = None
    latent_grad = None
    spectrum = None
    if lam > 0:
        try:
            value, spectrum, grad = spectral.clustering_loss_and_gradient(Y, K, gamma, check=check)
        except DegenerateSpectrumError as e:
            logger.debug("skipping batch: %s", e)
        else:
            if grad is not None:
                psi = value
                latent_grad = lam * grad

    grads = nn.backward(model, X, latent_grad=latent_grad, output_grad=output_grad, trace=t)
    J = rho if psi is None else lam * psi + rho
    return J, psi, rho, grads, spectrum

def _run(model, X, cfg, phase, epochs, lam, gamma, diagnostics=None):
    X = numpy.asarray(X, dtype='f8')
    N = len(X)
    model = model.copy()
    report = TrainReport(phase, lam, gamma)
    state = nn.OptimizerState(model, learning_rate=cfg.learning_rate)

    for epoch in range(epochs):
        timer = Timer()
        with timer:
            state.learning_rate = cfg.learning_rate * cfg.lr_decay ** epoch
            Js, psis, rhos = [], [], []
            skipped = 0
            for b, index in enumerate(batches(N, cfg.batch_size, cfg.seed, epoch)):
                J, psi, rho, grads, spectrum = joint_loss_and_gradient(
                        model, X[index], cfg.K, gamma, lam, check=(b == 0))
                if not numpy.isfinite(J):
                    raise DivergenceError("%s epoch %d batch %d: loss is %g" % (phase, epoch, b, J))
                if lam > 0 and psi is None:
                    skipped += 1
                if diagnostics is not None and spectrum is not None and len(spectrum) > cfg.K:
                    diagnostics.write(epoch, b, spectrum.eigenvalue(cfg.K),
                            spectrum.eigenvalue(cfg.K + 1), 0. if psi is None else psi)
                nn.optimizer_step(model, state, grads)
                Js.append(J)
                psis.append(0. if psi is None else psi)
                rhos.append(rho)

        nbatches = len(Js)
        if lam > 0 and skipped == nbatches:
            logger.warning("%s epoch %d: the spectrum of every batch was degenerate", phase, epoch)
        report.append(numpy.mean(Js), numpy.mean(psis), numpy.mean(rhos), skipped, timer.spent)
        logger.info("%s epoch %d: J = %g psi = %g rho = %g skipped = %d/%d (%.1f s)",
                phase, epoch, report.J[-1], report.psi[-1], report.rho[-1],
                skipped, nbatches, timer.spent)
    return model, report

def _check_data(model, X, cfg):
    X = numpy.asarray(X, dtype='f8')
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError("model takes %d features, data has shape %s" % (model.input_dim, str(X.shape)))
    if len(X) < cfg.K + 1:
        raise ValueError("training with K = %d needs at least %d rows" % (cfg.K, cfg.K + 1))
    return X

def pretrain(model, X, cfg):
    """
    Train for reconstruction only, ``cfg.pretrain_epochs`` epochs.

    The input model is not modified.

    Returns
    -------
    model : nn.Autoencoder
    report : TrainReport
    """
    X = _check_data(model, X, cfg)
    return _run(model, X, cfg, 'pretrain', cfg.pretrain_epochs, 0., None)

def train_joint(model, X, cfg, diagnostics=None):
    """
    Train on the joint loss, ``cfg.joint_epochs`` epochs.

    Parameters
    ----------
    model : nn.Autoencoder
        not modified.
    X : array_like
    cfg : TrainConfig
    diagnostics : SpectrumLog or None
        receives the spectrum of every batch.

    Returns
    -------
    model : nn.Autoencoder
    report : TrainReport

    Raises
    ------
    DivergenceError
        the loss of a batch or the latent embedding is not finite.
    """
    X = _check_data(model, X, cfg)
    gamma = None
    if cfg.lam > 0:
        if cfg.gamma == 'median':
            gamma = spectral.median_gamma(_encode(model, X), cfg.gamma_pairs, cfg.seed)
            logger.info("kernel width from the median heuristic: gamma = %g", gamma)
        else:
            gamma = float(cfg.gamma)

    model, report = _run(model, X, cfg, 'joint', cfg.joint_epochs, cfg.lam, gamma, diagnostics)

    if len(report) and report.psi[0] > 0:
        logger.info("epoch 0: rho / psi = %g; rescale lambda to balance the terms",
                report.rho[0] / report.psi[0])
    return model, report

def _encode(model, X):
    Y = nn.encode(model, X)
    bad = ~numpy.isfinite(Y).all(axis=1)
    if bad.any():
        raise DivergenceError("the encoder maps %d of %d rows to non-finite values" % (bad.sum(), len(Y)))
    return Y

def compress(model, X):
    """
    The compressed embedding Y = f(X).

    Raises
    ------
    DivergenceError
        Y is not finite, e.g. the model diverged.
    """
    return _encode(model, X)
