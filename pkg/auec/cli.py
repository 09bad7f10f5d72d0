"""
The auec command line.

.. code:: bash

    auec pipeline --preset auec-mdbscan --set dataset.images=train-images-idx3-ubyte.gz \\
                  --set dataset.labels=train-labels-idx1-ubyte.gz --output run1
    auec eval --truth truth.csv --pred run1/labels.csv

Every subcommand writes ``manifest.conf`` and ``log`` into the output
directory. Exit codes:

==  ==========================================
0   success
2   bad configuration or arguments
3   unusable input data, or an i/o failure
4   numerical failure (divergence, degenerate spectrum, too few clusters)
==  ==========================================
"""
import os
import sys
import logging
import argparse

from mpi4py import MPI

from . import config
from . import dataset
from . import clustering
from . import metrics
from . import plotting
from . import pipeline
from .errors import AuecError, ConfigError, DataError, NumericalError
from .version import __version__

LOG = logging.getLogger('auec')

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

def exit_code(e):
    """ The exit code of an exception leaving a subcommand. """
    if isinstance(e, ConfigError):
        return EXIT_CONFIG
    if isinstance(e, (DataError, IOError)):
        return EXIT_DATA
    if isinstance(e, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(e, ValueError):
        return EXIT_CONFIG
    return 1

def error_message(e):
    if isinstance(e, IOError):
        message = str(e)
    else:
        message = e.args[0] if e.args else str(e)
    stage = getattr(e, 'stage', None)
    if stage is not None:
        return 'error [%s]: %s' % (stage, message)
    return 'error: %s' % message

def setup_logging(ns, comm):
    """
    Log to stderr, and to ``<output>/log`` on rank 0.

    Returns the handlers, to be removed when the command is done.
    """
    level = logging.INFO
    if ns.verbose:
        level = logging.DEBUG
    if ns.quiet or comm.rank != 0:
        level = logging.WARNING

    root = logging.getLogger()
    root.setLevel(level)
    formatter = logging.Formatter('%(asctime)s %(name)s %(levelname)s: %(message)s')
    handlers = []
    ch = logging.StreamHandler()
    ch.setLevel(level)
    ch.setFormatter(formatter)
    handlers.append(ch)
    if comm.rank == 0:
        try:
            if not os.path.isdir(ns.output_dir):
                os.makedirs(ns.output_dir)
            fh = logging.FileHandler(os.path.join(ns.output_dir, 'log'), mode='w')
            fh.setLevel(level)
            fh.setFormatter(formatter)
            handlers.append(fh)
        except IOError:
            LOG.error("cannot open log file at %s", ns.output_dir)
    for h in handlers:
        root.addHandler(h)
    return handlers

def add_common(ap):
    ap.add_argument('--preset', choices=config.preset_names(),
            help='start from a shipped configuration')
    ap.add_argument('--config', help='configuration file, key = value lines')
    ap.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
            help='override one configuration value; repeatable')
    add_output(ap)

def add_output(ap):
    ap.add_argument('--output', help='output directory; overrides output.dir and $%s' % config.ENVIRON_OUTPUT)
    ap.add_argument('-v', '--verbose', action='store_true', help='log debugging messages')
    ap.add_argument('-q', '--quiet', action='store_true', help='log warnings and errors only')

def add_input(ap):
    ap.add_argument('--input', help='CSV matrix to read instead of the configured data set')
    ap.add_argument('--has-labels', action='store_true',
            help='the last column of --input holds ground truth labels')

def build_parser():
    ap = argparse.ArgumentParser(prog='auec',
            description='Clustering by autoencoder compression, UMAP refinement and K-means or MDBSCAN.')
    ap.add_argument('--version', action='version', version='auec ' + __version__)
    sub = ap.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('train', help='stage I: train the autoencoder, write model.npz')
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('compress', help='stage I: write the compressed embedding of the data')
    add_common(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser('umap', help='stage II: write the refined embedding')
    add_common(p)
    add_input(p)
    p.set_defaults(func=cmd_umap)

    p = sub.add_parser('cluster', help='stage III: write the cluster labels')
    add_common(p)
    add_input(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser('eval', help='score predicted labels against ground truth')
    p.add_argument('--truth', required=True, help='ground truth label file')
    p.add_argument('--pred', required=True, help='predicted label file')
    add_output(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('pipeline', help='all stages, with evaluation and plots')
    add_common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser('robustness', help='stage I on training data, stages II and III on training and held out data')
    add_common(p)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser('plot', help='draw an embedding or a confusion matrix')
    p.add_argument('--input', help='CSV of a 2-d embedding')
    p.add_argument('--has-labels', action='store_true',
            help='the last column of --input holds ground truth labels')
    p.add_argument('--labels', help='predicted label file to colour --input by')
    p.add_argument('--truth', help='ground truth label file, for a confusion matrix')
    p.add_argument('--pred', help='predicted label file, for a confusion matrix')
    p.add_argument('--title', default='')
    add_output(p)
    p.set_defaults(func=cmd_plot)
    return ap

def resolve(ns, require_data=True):
    overrides = list(getattr(ns, 'overrides', []))
    if ns.output is not None:
        overrides.append('output.dir=%s' % ns.output)
    return config.load(preset=getattr(ns, 'preset', None), path=getattr(ns, 'config', None),
            overrides=overrides, require_data=require_data)

def read_input(ns):
    data = dataset.load_csv(ns.input, has_labels=ns.has_labels)
    LOG.info("read %d x %d from %s", data.rows, data.cols, ns.input)
    return data

def cmd_train(ns, cfg, out, comm):
    X = pipeline.load_data(cfg)
    pipeline.run_train(cfg, X, out)

def cmd_compress(ns, cfg, out, comm):
    X = pipeline.load_data(cfg)
    model = pipeline.obtain_model(cfg, X, out)
    Y = pipeline.run_compress(model, X)
    if out.writer:
        dataset.save_csv(out('compressed.csv'), Y)

def cmd_umap(ns, cfg, out, comm):
    if ns.input is not None:
        Y = read_input(ns)
    else:
        X = pipeline.load_data(cfg)
        Y = X
        if cfg['trainer.enabled']:
            Y = pipeline.run_compress(pipeline.obtain_model(cfg, X, out), X)
    Z = pipeline.run_umap(cfg, Y, comm)
    if out.writer:
        dataset.save_csv(out('embedding.csv'), Z)

def cmd_cluster(ns, cfg, out, comm):
    if ns.input is not None:
        Z = read_input(ns)
    else:
        X = pipeline.load_data(cfg)
        model = pipeline.obtain_model(cfg, X, out) if cfg['trainer.enabled'] else None
        Z = pipeline.refine(cfg, X, model, comm)
    assignment = pipeline.run_cluster(cfg, Z, comm)
    if out.writer:
        clustering.save_assignment(out('labels.csv'), assignment)
        if assignment.centroids is not None:
            clustering.save_centroids(out('centroids.csv'), assignment)
    if Z.labels is not None:
        scores, cm = pipeline.run_eval(Z.labels, assignment)
        pipeline.write_metrics(out, [(pipeline.method_name(cfg, refined=ns.input is None), scores)])

def cmd_eval(ns, cfg, out, comm):
    truth = dataset.load_labels(ns.truth)
    pred = dataset.load_labels(ns.pred)
    if len(truth) != len(pred):
        raise DataError("%s has %d labels, %s has %d" % (ns.truth, len(truth), ns.pred, len(pred)))
    with pipeline.stage('evaluation'):
        rows = [(os.path.basename(ns.pred), metrics.evaluate(truth, pred))]
    if out.writer:
        sys.stdout.write(metrics.format_report(rows))
    pipeline.write_metrics(out, rows)

def cmd_pipeline(ns, cfg, out, comm):
    Z, assignment, scores = pipeline.run_pipeline(cfg, comm)
    if scores is not None and out.writer:
        sys.stdout.write(metrics.format_report([(pipeline.method_name(cfg), scores)]))

def cmd_robustness(ns, cfg, out, comm):
    rows = pipeline.run_robustness(cfg, comm)
    if out.writer:
        sys.stdout.write(metrics.format_report(rows))

def cmd_plot(ns, cfg, out, comm):
    if ns.input is None and ns.truth is None:
        raise ConfigError("nothing to plot; give --input or --truth and --pred")
    if ns.input is not None:
        Z = read_input(ns)
        if Z.cols != 2:
            raise DataError("%s has %d columns; scatter plots need 2" % (ns.input, Z.cols))
        if out.writer and Z.labels is not None:
            pipeline.write_scatter(out('scatter_truth.svg'), Z.values, Z.labels, ns.title or 'ground truth')
        if ns.labels is not None:
            pred = dataset.load_labels(ns.labels)
            if len(pred) != Z.rows:
                raise DataError("%s has %d labels for %d points" % (ns.labels, len(pred), Z.rows))
            if out.writer:
                pipeline.write_scatter(out('scatter_pred.svg'), Z.values, pred, ns.title or 'prediction')
    if ns.truth is not None:
        if ns.pred is None:
            raise ConfigError("--truth needs --pred")
        cm = metrics.confusion(dataset.load_labels(ns.truth), dataset.load_labels(ns.pred))
        if out.writer:
            plotting.render_confusion(cm, out('confusion.svg'), title=ns.title)

# subcommands that read a data set unless --input is given
NEEDS_DATA = ('train', 'compress', 'pipeline', 'robustness')

def main(argv=None, comm=None):
    """
    Run the command line argv.

    Returns
    -------
    code : int
        the exit code.
    """
    if comm is None:
        comm = MPI.COMM_WORLD
    if argv is None:
        argv = sys.argv[1:]
    ns = build_parser().parse_args(argv)

    try:
        cfg = resolve(ns, require_data=ns.command in NEEDS_DATA
                or (ns.command in ('umap', 'cluster') and ns.input is None))
    except (AuecError, ValueError, IOError) as e:
        sys.stderr.write(error_message(e) + '\n')
        return exit_code(e)

    ns.output_dir = cfg['output.dir']
    handlers = setup_logging(ns, comm)
    try:
        out = pipeline.Output(ns.output_dir, comm)
        if out.writer:
            config.write_manifest(out('manifest.conf'), cfg, comm.size, ['auec'] + list(argv))
        if comm.rank == 0:
            LOG.info("auec %s %s, output in %s", __version__, ns.command, ns.output_dir)
        ns.func(ns, cfg, out, comm)
        return EXIT_OK
    except (AuecError, ValueError, IOError) as e:
        LOG.debug("traceback", exc_info=True)
        LOG.error("%s", error_message(e))
        return exit_code(e)
    finally:
        root = logging.getLogger()
        for h in handlers:
            root.removeHandler(h)
            h.close()
