"""
Run configuration.

A configuration is flat ``key = value`` text. ``#`` starts a comment, blank
lines are skipped and keys are dotted by stage::

    K = 10
    dataset.source = mnist
    dataset.images = train-images-idx3-ubyte.gz
    umap.n_neighbors = 6

Values are typed by :data:`SCHEMA`. A configuration is resolved in layers,
each overriding the one before:

1. the defaults of :data:`SCHEMA`;
2. a preset shipped in ``auec/presets`` (``--preset``);
3. a configuration file (``--config``);
4. single ``key=value`` overrides (``--set``).

The default output directory comes from the ``AUEC_OUTPUT`` environment
variable. Relative paths in a file are relative to that file.

:func:`write_manifest` writes the resolved configuration in the same
format, so a manifest can be given back with ``--config`` to repeat a run.
"""
import os
import sys
import logging
import platform
from collections import OrderedDict

import numpy

from .errors import ConfigError
from .version import __version__

logger = logging.getLogger(__name__)

PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'presets')

ENVIRON_OUTPUT = 'AUEC_OUTPUT'
DEFAULT_OUTPUT = './auec-output'

# key: (kind, default)
SCHEMA = OrderedDict([
    ('K', ('int', 10)),
    ('dataset.source', (('mnist', 'csv', 'blobs'), 'mnist')),
    ('dataset.images', ('path', None)),
    ('dataset.labels', ('path', None)),
    ('dataset.path', ('path', None)),
    ('dataset.has_labels', ('bool', True)),
    ('dataset.header', ('bool', False)),
    ('dataset.subsample', ('int', 0)),
    ('dataset.seed', ('int', 0)),
    ('dataset.test_images', ('path', None)),
    ('dataset.test_labels', ('path', None)),
    ('dataset.test_path', ('path', None)),
    ('dataset.test_subsample', ('int', 0)),
    ('blobs.per_cluster', ('int', 200)),
    ('blobs.dim', ('int', 8)),
    ('blobs.spread', ('float', 1.0)),
    ('blobs.separation', ('float', 20.0)),
    ('blobs.seed', ('int', 0)),
    ('trainer.enabled', ('bool', True)),
    ('trainer.checkpoint', ('path', None)),
    ('trainer.latent_dim', ('int', 32)),
    ('trainer.hidden', ('ints', (256, 64))),
    ('trainer.output_activation', (('sigmoid', 'linear'), 'sigmoid')),
    ('trainer.lambda', ('float', 1.0)),
    ('trainer.batch_size', ('int', 256)),
    ('trainer.pretrain_epochs', ('int', 5)),
    ('trainer.joint_epochs', ('int', 50)),
    ('trainer.learning_rate', ('float', 1e-3)),
    ('trainer.lr_decay', ('float', 1.0)),
    ('trainer.gamma', ('gamma', 'median')),
    ('trainer.gamma_pairs', ('int', 10000)),
    ('trainer.seed', ('int', 0)),
    ('umap.enabled', ('bool', True)),
    ('umap.n_neighbors', ('int', 15)),
    ('umap.n_components', ('int', 2)),
    ('umap.min_dist', ('float', 0.1)),
    ('umap.epochs', ('int', 300)),
    ('umap.negative_samples', ('int', 5)),
    ('umap.learning_rate', ('float', 1.0)),
    ('umap.seed', ('int', 0)),
    ('cluster.method', (('kmeans', 'mdbscan'), 'kmeans')),
    ('cluster.restarts', ('int', 10)),
    ('cluster.seed', ('int', 0)),
    ('cluster.eps', ('eps', 'auto')),
    ('cluster.min_pts', ('int', 10)),
    ('robustness.train_subsample', ('int', 0)),
    ('robustness.test_subsample', ('int', 0)),
    ('robustness.seed', ('int', 0)),
    ('output.dir', ('path', None)),
    ('output.diagnostics', ('bool', False)),
    ('output.plots', ('bool', True)),
])

NON_NEGATIVE = ['dataset.subsample', 'dataset.test_subsample', 'trainer.pretrain_epochs',
        'trainer.joint_epochs', 'robustness.train_subsample', 'robustness.test_subsample']

TRUE = ('true', 'yes', 'on', '1')
FALSE = ('false', 'no', 'off', '0')

def _positive(value):
    if not numpy.isfinite(value) or value <= 0:
        raise ValueError("must be a positive number")
    return value

def convert(key, raw, base=None):
    """
    Convert the text of a value to the type of key in :data:`SCHEMA`.

    Raises
    ------
    ValueError
        the text is not a valid value of key.
    KeyError
        key is unknown.
    """
    kind, default = SCHEMA[key]
    raw = raw.strip()
    if isinstance(kind, tuple):
        if raw not in kind:
            raise ValueError("must be one of %s" % ', '.join(kind))
        return raw
    if kind == 'int':
        return int(raw)
    if kind == 'float':
        value = float(raw)
        if not numpy.isfinite(value):
            raise ValueError("must be finite")
        return value
    if kind == 'bool':
        if raw.lower() in TRUE:
            return True
        if raw.lower() in FALSE:
            return False
        raise ValueError("must be true or false")
    if kind == 'path':
        if raw.lower() in ('', 'none'):
            return None
        raw = os.path.expanduser(raw)
        if base is not None and not os.path.isabs(raw):
            raw = os.path.join(base, raw)
        return os.path.abspath(raw)
    if kind == 'ints':
        if raw == '':
            return ()
        return tuple(int(v) for v in raw.split(','))
    if kind == 'gamma':
        return 'median' if raw == 'median' else _positive(float(raw))
    if kind == 'eps':
        return 'auto' if raw == 'auto' else _positive(float(raw))
    raise AssertionError(kind)

def format_value(key, value):
    """ The text of value; :func:`convert` reads it back to value. """
    kind, default = SCHEMA[key]
    if value is None:
        return 'none'
    if kind == 'bool':
        return 'true' if value else 'false'
    if kind == 'float' or (kind in ('gamma', 'eps') and not isinstance(value, str)):
        return repr(float(value))
    if kind == 'ints':
        return ','.join(str(v) for v in value)
    return str(value)

def parse(text, filename='<string>'):
    """
    Split configuration text into ``(lineno, key, raw value)``.

    Raises
    ------
    ConfigError
        malformed lines and keys given twice.
    """
    seen = {}
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError("expecting 'key = value'", filename, lineno)
        key, raw = line.split('=', 1)
        key = key.strip()
        if not key:
            raise ConfigError("missing key before '='", filename, lineno)
        if key in seen:
            raise ConfigError("already set on line %d" % seen[key], filename, lineno, key)
        seen[key] = lineno
        entries.append((lineno, key, raw.strip()))
    return entries

def preset_names():
    return sorted(name[:-len('.conf')] for name in os.listdir(PRESET_DIR) if name.endswith('.conf'))

def preset_path(name):
    path = os.path.join(PRESET_DIR, name + '.conf')
    if not os.path.exists(path):
        raise ConfigError("unknown preset '%s'; known presets are %s" % (name, ', '.join(preset_names())))
    return path

class PipelineConfig(object):
    """
    A resolved configuration.

    Values are read with ``cfg['umap.n_neighbors']``. :attr:`origins` tells
    where each value that is not a default was set.

    Parameters
    ----------
    environ : dict or None
        environment supplying the default output directory;
        defaults to ``os.environ``.
    """
    def __init__(self, environ=None):
        if environ is None:
            environ = os.environ
        self.values = OrderedDict((key, default) for key, (kind, default) in SCHEMA.items())
        self.values['output.dir'] = os.path.abspath(environ.get(ENVIRON_OUTPUT) or DEFAULT_OUTPUT)
        self.origins = {}

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key, raw, filename=None, lineno=None, base=None):
        """ Set key from the text raw; errors name filename:lineno. """
        if key not in SCHEMA:
            raise ConfigError("unknown key", filename, lineno, key)
        try:
            value = convert(key, raw, base)
        except ValueError as e:
            raise ConfigError("bad value '%s': %s" % (raw, e), filename, lineno, key)
        self.values[key] = value
        self.origins[key] = (filename, lineno)

    def update(self, text, filename='<string>', base=None):
        """ Apply all entries of configuration text. """
        for lineno, key, raw in parse(text, filename):
            self.set(key, raw, filename, lineno, base)
        return self

    def _fail(self, key, message):
        filename, lineno = self.origins.get(key, (None, None))
        raise ConfigError(message, filename, lineno, key)

    def validate(self, require_data=True):
        """
        Check the values against each other and the file system.

        With require_data=False the data set keys may be missing, for runs
        that read their input from elsewhere.

        Raises
        ------
        ConfigError
            naming the offending key.
        """
        if self['K'] < 2:
            self._fail('K', "at least 2 clusters are needed")
        for key in NON_NEGATIVE:
            if self[key] < 0:
                self._fail(key, "must be non-negative")

        source = self['dataset.source']
        required = {'mnist': ['dataset.images'], 'csv': ['dataset.path'], 'blobs': []}[source]
        for key in required:
            if require_data and self[key] is None:
                self._fail(key, "required for dataset.source = %s" % source)
        for key, (kind, default) in SCHEMA.items():
            if kind != 'path' or key == 'output.dir' or self[key] is None:
                continue
            if not os.path.exists(self[key]):
                self._fail(key, "no such file: %s" % self[key])

        if self['trainer.enabled']:
            self.trainer_config()
            if any(h < 1 for h in self['trainer.hidden']) or self['trainer.latent_dim'] < 1:
                self._fail('trainer.hidden', "layer widths must be positive")
        if self['umap.enabled']:
            self.umap_config()
            if self['trainer.enabled'] and not self['umap.n_components'] < self['trainer.latent_dim']:
                self._fail('umap.n_components', "must be smaller than trainer.latent_dim = %d"
                        % self['trainer.latent_dim'])
        if self['cluster.restarts'] < 1:
            self._fail('cluster.restarts', "must be positive")
        if self['cluster.min_pts'] < 1:
            self._fail('cluster.min_pts', "must be positive")
        return self

    def validate_input(self, M):
        """ Check the dimensions against data of M features: n_C < m < M. """
        if self['trainer.enabled'] and not self['trainer.latent_dim'] < M:
            self._fail('trainer.latent_dim', "must be smaller than the data dimension %d" % M)
        if self['umap.enabled'] and not self['trainer.enabled'] and not self['umap.n_components'] < M:
            self._fail('umap.n_components', "must be smaller than the data dimension %d" % M)

    def trainer_config(self):
        """ The :class:`auec.trainer.TrainConfig` of this configuration. """
        from .trainer import TrainConfig
        try:
            return TrainConfig(K=self['K'], lam=self['trainer.lambda'],
                    batch_size=self['trainer.batch_size'],
                    pretrain_epochs=self['trainer.pretrain_epochs'],
                    joint_epochs=self['trainer.joint_epochs'],
                    gamma=self['trainer.gamma'], gamma_pairs=self['trainer.gamma_pairs'],
                    learning_rate=self['trainer.learning_rate'],
                    lr_decay=self['trainer.lr_decay'], seed=self['trainer.seed'])
        except ValueError as e:
            raise ConfigError(str(e), key='trainer')

    def umap_config(self):
        """ The :class:`auec.umap.UmapConfig` of this configuration. """
        from .umap import UmapConfig
        try:
            return UmapConfig(n_neighbors=self['umap.n_neighbors'],
                    n_components=self['umap.n_components'], min_dist=self['umap.min_dist'],
                    epochs=self['umap.epochs'], negative_samples=self['umap.negative_samples'],
                    learning_rate=self['umap.learning_rate'], seed=self['umap.seed'])
        except ValueError as e:
            raise ConfigError(str(e), key='umap')

    def dumps(self):
        """ All values as configuration text, in schema order. """
        return ''.join('%s = %s\n' % (key, format_value(key, value)) for key, value in self.values.items())

def load(preset=None, path=None, overrides=(), environ=None, require_data=True):
    """
    Resolve a configuration from its layers.

    Parameters
    ----------
    preset : str or None
        name of a shipped preset.
    path : str or None
        configuration file.
    overrides : list of str
        ``key=value`` strings, applied last.

    Returns
    -------
    cfg : PipelineConfig
        validated.
    """
    cfg = PipelineConfig(environ)
    if preset is not None:
        ppath = preset_path(preset)
        with open(ppath) as ff:
            cfg.update(ff.read(), ppath)
    if path is not None:
        try:
            with open(path) as ff:
                text = ff.read()
        except IOError as e:
            raise ConfigError("cannot read configuration: %s" % e.strerror, path)
        cfg.update(text, path, os.path.dirname(os.path.abspath(path)))
    for item in overrides:
        if '=' not in item:
            raise ConfigError("expecting key=value, got '%s'" % item, '--set')
        key, raw = item.split('=', 1)
        cfg.set(key.strip(), raw, '--set')
    return cfg.validate(require_data)

def versions(comm_size=1):
    """ Versions of the software a run depends on. """
    import scipy
    import numba
    import matplotlib
    import sklearn
    return OrderedDict([
        ('auec', __version__),
        ('python', platform.python_version()),
        ('numpy', numpy.__version__),
        ('scipy', scipy.__version__),
        ('numba', numba.__version__),
        ('matplotlib', matplotlib.__version__),
        ('scikit-learn', sklearn.__version__),
        ('mpi ranks', str(comm_size)),
    ])

def write_manifest(path, cfg, comm_size=1, argv=None):
    """
    Write the resolved configuration, preceded by comments with the
    command line and the software versions.
    """
    if argv is None:
        argv = sys.argv
    with open(path, 'w') as ff:
        ff.write('# auec run manifest\n')
        ff.write('# command: %s\n' % ' '.join(argv))
        for name, version in versions(comm_size).items():
            ff.write('# %s: %s\n' % (name, version))
        ff.write(cfg.dumps())
    logger.info("manifest written to %s", path)
