"""
A dense autoencoder with explicit forward and backward passes.

The model is two stacks of :class:`DenseLayer`. A layer maps a batch of
rows ``x`` to ``act(x @ W + b)``.

Gradients follow the naming of the rest of the package: for a function
``f(x)`` the function ``f_gradient(x, g)`` back-propagates the gradient
``g`` of some scalar loss with respect to the output of ``f`` to a
gradient with respect to ``x``.

:func:`backward` accepts the gradient of a loss with respect to the latent
embedding and with respect to the reconstruction; the two are summed, which
is how the joint loss of :mod:`auec.trainer` reaches the encoder.
"""
import numpy
import os
import tempfile
import logging

from .errors import NumericalError, DataError

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

def _relu(x):
    return numpy.maximum(x, 0)

def _relu_gradient(y, g):
    return g * (y > 0)

def _sigmoid(x):
    # split by sign to avoid overflow in exp
    out = numpy.empty_like(x)
    pos = x >= 0
    out[pos] = 1. / (1. + numpy.exp(-x[pos]))
    e = numpy.exp(x[~pos])
    out[~pos] = e / (1. + e)
    return out

def _sigmoid_gradient(y, g):
    return g * y * (1 - y)

def _linear(x):
    return x

def _linear_gradient(y, g):
    return g

# activation, and its gradient expressed with the activation output
ACTIVATIONS = {
    'linear': (_linear, _linear_gradient),
    'relu': (_relu, _relu_gradient),
    'sigmoid': (_sigmoid, _sigmoid_gradient),
}

class DenseLayer(object):
    """
    A fully connected layer.

    Parameters
    ----------
    weight : array_like
        (in_dim, out_dim) matrix.
    bias : array_like
        out_dim vector.
    activation : str
        one of 'linear', 'relu', 'sigmoid'.

    """
    def __init__(self, weight, bias, activation='linear'):
        weight = numpy.array(weight, dtype='f8')
        bias = numpy.array(bias, dtype='f8')
        if weight.ndim != 2:
            raise ValueError("weight must be a matrix")
        if bias.shape != (weight.shape[1],):
            raise ValueError("bias shape %s does not match weight shape %s" % (bias.shape, weight.shape))
        if activation not in ACTIVATIONS:
            raise ValueError("unknown activation %s; choose from %s" % (activation, sorted(ACTIVATIONS)))
        self.weight = weight
        self.bias = bias
        self.activation = activation

    @property
    def in_dim(self):
        return self.weight.shape[0]

    @property
    def out_dim(self):
        return self.weight.shape[1]

    def apply(self, x):
        act = ACTIVATIONS[self.activation][0]
        return act(numpy.dot(x, self.weight) + self.bias)

    def apply_gradient(self, x, y, g):
        """ Back-propagate g through the layer.

            Parameters
            ----------
            x : array_like
                input of the layer.
            y : array_like
                output of the layer, ``self.apply(x)``.
            g : array_like
                gradient with respect to y.

            Returns
            -------
            gx, gweight, gbias : gradients with respect to the input and
                the parameters.
        """
        g = ACTIVATIONS[self.activation][1](y, g)
        gweight = numpy.dot(x.T, g)
        gbias = g.sum(axis=0)
        gx = numpy.dot(g, self.weight.T)
        return gx, gweight, gbias

    @classmethod
    def random(kls, in_dim, out_dim, activation, rng):
        """ Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero bias. """
        limit = (6. / (in_dim + out_dim)) ** 0.5
        weight = rng.uniform(-limit, limit, size=(in_dim, out_dim))
        return kls(weight, numpy.zeros(out_dim), activation)

class Autoencoder(object):
    """
    An encoder f and a decoder g as stacks of dense layers.

    Parameters
    ----------
    encoder : list of DenseLayer
        maps M inputs to the m dimensional latent space.
    decoder : list of DenseLayer
        maps the latent space back to M outputs.

    Use :meth:`create` for the default architecture.
    """
    def __init__(self, encoder, decoder):
        encoder = list(encoder)
        decoder = list(decoder)
        if len(encoder) == 0 or len(decoder) == 0:
            raise ValueError("encoder and decoder need at least one layer")
        layers = encoder + decoder
        for i, (a, b) in enumerate(zip(layers[:-1], layers[1:])):
            if a.out_dim != b.in_dim:
                raise ValueError("layer %d has %d outputs but layer %d has %d inputs"
                    % (i, a.out_dim, i + 1, b.in_dim))
        if encoder[0].in_dim != decoder[-1].out_dim:
            raise ValueError("decoder outputs %d values, encoder takes %d"
                    % (decoder[-1].out_dim, encoder[0].in_dim))
        self.encoder = encoder
        self.decoder = decoder

    @classmethod
    def create(kls, input_dim, hidden=(256, 64), latent_dim=32, seed=0,
            activation='relu', output_activation='sigmoid'):
        """
        The default architecture: ``input_dim - hidden... - latent_dim``
        with a linear latent layer, and the mirrored decoder.

        Parameters
        ----------
        input_dim : int
            M, the number of input features.
        hidden : list of int
            widths of the hidden encoder layers; the decoder mirrors them.
        latent_dim : int
            m, the width of the embedding.
        seed : int
            seed of the weight initialization.
        activation : str
            activation of hidden layers.
        output_activation : str
            activation of the reconstruction; 'sigmoid' matches data in [0, 1].
        """
        rng = numpy.random.RandomState(seed)
        widths = [input_dim] + list(hidden) + [latent_dim]
        acts = [activation] * len(hidden) + ['linear']
        encoder = [DenseLayer.random(a, b, act, rng)
                    for a, b, act in zip(widths[:-1], widths[1:], acts)]
        widths = widths[::-1]
        acts = [activation] * len(hidden) + [output_activation]
        decoder = [DenseLayer.random(a, b, act, rng)
                    for a, b, act in zip(widths[:-1], widths[1:], acts)]
        return kls(encoder, decoder)

    @property
    def input_dim(self):
        return self.encoder[0].in_dim

    @property
    def latent_dim(self):
        return self.encoder[-1].out_dim

    @property
    def layers(self):
        return self.encoder + self.decoder

    def parameters(self):
        """ All parameter arrays, weight then bias for each layer, encoder first. """
        r = []
        for layer in self.layers:
            r.append(layer.weight)
            r.append(layer.bias)
        return r

    def copy(self):
        def cp(layers):
            return [DenseLayer(l.weight.copy(), l.bias.copy(), l.activation) for l in layers]
        return Autoencoder(cp(self.encoder), cp(self.decoder))

    def save(self, path):
        """ Write a checkpoint; the file is replaced atomically. """
        arrays = {
            'version': numpy.array(CHECKPOINT_VERSION),
            'n_encoder': numpy.array(len(self.encoder)),
            'activations': numpy.array([l.activation for l in self.layers]),
        }
        for i, layer in enumerate(self.layers):
            arrays['weight_%d' % i] = layer.weight
            arrays['bias_%d' % i] = layer.bias

        dirname = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(dir=dirname, suffix='.npz')
        try:
            with os.fdopen(fd, 'wb') as ff:
                numpy.savez(ff, **arrays)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        logger.info("wrote checkpoint %s", path)

    @classmethod
    def load(kls, path):
        """ Read a checkpoint written by :meth:`save`. """
        try:
            ff = numpy.load(path, allow_pickle=False)
        except (OSError, ValueError) as e:
            raise DataError("cannot read checkpoint %s: %s" % (path, e))
        with ff:
            try:
                version = int(ff['version'])
                if version != CHECKPOINT_VERSION:
                    raise DataError("checkpoint %s has format version %d, expecting %d"
                        % (path, version, CHECKPOINT_VERSION))
                n_encoder = int(ff['n_encoder'])
                activations = [str(a) for a in ff['activations']]
                layers = [DenseLayer(ff['weight_%d' % i], ff['bias_%d' % i], act)
                        for i, act in enumerate(activations)]
            except KeyError as e:
                raise DataError("checkpoint %s is incomplete: %s" % (path, e))
        try:
            return kls(layers[:n_encoder], layers[n_encoder:])
        except ValueError as e:
            raise DataError("checkpoint %s is inconsistent: %s" % (path, e))

def _check_input(X, width, what):
    X = numpy.asarray(X, dtype='f8')
    if X.ndim != 2 or X.shape[1] != width:
        raise ValueError("%s expects rows of %d values, got shape %s" % (what, width, str(X.shape)))
    return X

def _run(layers, x):
    # returns the input of every layer and the final output
    trace = [x]
    for layer in layers:
        x = layer.apply(x)
        trace.append(x)
    return trace

def _run_gradient(layers, trace, g):
    grads = []
    for layer, x, y in reversed(list(zip(layers, trace[:-1], trace[1:]))):
        g, gweight, gbias = layer.apply_gradient(x, y, g)
        grads.append((gweight, gbias))
    grads.reverse()
    return g, [a for pair in grads for a in pair]

def encode(model, X):
    """ The latent embedding Y = f(X); N x m. """
    X = _check_input(X, model.input_dim, 'encode')
    return _run(model.encoder, X)[-1]

def decode(model, Y):
    """ The reconstruction g(Y); N x M. """
    Y = _check_input(Y, model.latent_dim, 'decode')
    return _run(model.decoder, Y)[-1]

class Trace(object):
    """
    The inputs of every layer of one pass through an autoencoder, kept for
    :func:`backward`.

    Attributes
    ----------
    encoder : list of array_like
        the batch, the inputs of the later encoder layers, and Y.
    decoder : list of array_like
        Y, the inputs of the later decoder layers, and the reconstruction.
    """
    def __init__(self, encoder, decoder):
        self.encoder = encoder
        self.decoder = decoder

    @property
    def input(self):
        return self.encoder[0]

    @property
    def latent(self):
        return self.encoder[-1]

    @property
    def output(self):
        return self.decoder[-1]

def trace(model, X):
    """ A :class:`Trace` of the forward pass of X. """
    X = _check_input(X, model.input_dim, 'trace')
    etrace = _run(model.encoder, X)
    return Trace(etrace, _run(model.decoder, etrace[-1]))

def forward(model, X):
    """ The latent embedding and the reconstruction of X in one pass. """
    t = trace(model, X)
    return t.latent, t.output

def mse(X, Xhat):
    """
    Reconstruction error ``(1 / N) sum_i |x_i - xhat_i|^2``.

    The sum over features is not averaged.
    """
    X = numpy.asarray(X, dtype='f8')
    Xhat = numpy.asarray(Xhat, dtype='f8')
    if X.shape != Xhat.shape:
        raise ValueError("shape mismatch %s vs %s" % (str(X.shape), str(Xhat.shape)))
    d = X - Xhat
    return numpy.einsum('ij,ij->', d, d) / len(X)

def mse_gradient(X, Xhat):
    """ Gradient of :func:`mse` with respect to Xhat. """
    X = numpy.asarray(X, dtype='f8')
    Xhat = numpy.asarray(Xhat, dtype='f8')
    if X.shape != Xhat.shape:
        raise ValueError("shape mismatch %s vs %s" % (str(X.shape), str(Xhat.shape)))
    return (2. / len(X)) * (Xhat - X)

def backward(model, X, latent_grad=None, output_grad=None, trace=None):
    """
    Parameter gradients of a scalar loss of the latent embedding and the
    reconstruction of X.

    Parameters
    ----------
    model : Autoencoder
    X : array_like
        N x M input batch.
    latent_grad : array_like or None
        N x m gradient of the loss with respect to ``encode(model, X)``.
    output_grad : array_like or None
        N x M gradient of the loss with respect to the reconstruction.
    trace : Trace or None
        the forward pass of X through model, if the caller has it;
        otherwise the pass is redone.

    Returns
    -------
    grads : list of array_like
        aligned with :meth:`Autoencoder.parameters`; the decoder entries are
        zero when output_grad is None.

    Raises
    ------
    NumericalError
        a gradient is not finite.
    """
    if latent_grad is None and output_grad is None:
        raise ValueError("at least one of latent_grad and output_grad is needed")

    if trace is None:
        X = _check_input(X, model.input_dim, 'backward')
        etrace = _run(model.encoder, X)
        dtrace = None
    else:
        if trace.input.shape != numpy.shape(X):
            raise ValueError("the trace is of a batch of shape %s, not %s"
                    % (str(trace.input.shape), str(numpy.shape(X))))
        etrace = trace.encoder
        dtrace = trace.decoder
    X = etrace[0]
    Y = etrace[-1]

    gY = numpy.zeros_like(Y)
    if output_grad is not None:
        output_grad = numpy.asarray(output_grad, dtype='f8')
        if output_grad.shape != X.shape:
            raise ValueError("output gradient has shape %s, expecting %s" % (str(output_grad.shape), str(X.shape)))
        if dtrace is None:
            dtrace = _run(model.decoder, Y)
        g, dgrads = _run_gradient(model.decoder, dtrace, output_grad)
        gY += g
    else:
        dgrads = [numpy.zeros_like(p) for l in model.decoder for p in (l.weight, l.bias)]

    if latent_grad is not None:
        latent_grad = numpy.asarray(latent_grad, dtype='f8')
        if latent_grad.shape != Y.shape:
            raise ValueError("latent gradient has shape %s, expecting %s" % (str(latent_grad.shape), str(Y.shape)))
        gY += latent_grad

    gX, egrads = _run_gradient(model.encoder, etrace, gY)
    grads = egrads + dgrads
    for i, g in enumerate(grads):
        if not numpy.isfinite(g).all():
            raise NumericalError("non-finite gradient of parameter %d" % i)
    return grads

class OptimizerState(object):
    """
    The moments of the adaptive-moment (Adam) optimizer.

    Parameters
    ----------
    model : Autoencoder
        the accumulators mirror its parameters.
    learning_rate : float
    beta1, beta2 : float
        decay of the first and second moments.
    epsilon : float

    """
    def __init__(self, model, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if not learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("moment decays must be in [0, 1)")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step = 0
        self.m = [numpy.zeros_like(p) for p in model.parameters()]
        self.v = [numpy.zeros_like(p) for p in model.parameters()]

def optimizer_step(model, state, grads):
    """
    One bias corrected Adam update; the parameters of model and the
    accumulators of state are updated in place.

    Returns
    -------
    model, state

    Raises
    ------
    NumericalError
        the update is not finite; nothing is modified.
    """
    params = model.parameters()
    if len(grads) != len(params):
        raise ValueError("expecting %d gradients, got %d" % (len(params), len(grads)))
    for p, g in zip(params, grads):
        if numpy.shape(g) != p.shape:
            raise ValueError("gradient shape %s does not match parameter shape %s" % (numpy.shape(g), p.shape))

    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    m = [b1 * m + (1 - b1) * g for m, g in zip(state.m, grads)]
    v = [b2 * v + (1 - b2) * g * g for v, g in zip(state.v, grads)]
    c1 = 1 - b1 ** t
    c2 = 1 - b2 ** t
    updates = [state.learning_rate * (mi / c1) / ((vi / c2) ** 0.5 + state.epsilon)
                for mi, vi in zip(m, v)]
    for i, u in enumerate(updates):
        if not numpy.isfinite(u).all():
            raise NumericalError("non-finite update of parameter %d at step %d" % (i, t))

    for p, u in zip(params, updates):
        p -= u
    state.m = m
    state.v = v
    state.step = t
    return model, state
