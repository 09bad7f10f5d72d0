"""
Wall clock timers.

Timers are based on :func:`mpi4py.MPI.Wtime`, so they agree between ranks
of a run.

.. code:: python

    timers = Timers()
    with timers['umap']:
        Z = umap.embed(Y, cfg)
    print(timers)

"""
from mpi4py import MPI

class Timer(object):
    """ Accumulates the time spent inside ``with`` blocks. """
    def __init__(self):
        self.t0 = 1.0 * MPI.Wtime()
        self.spent = 0.
        self.count = 0

    def __enter__(self):
        self.t0 = 1.0 * MPI.Wtime()
        return self

    def __exit__(self, *args, **kwargs):
        t1 = 1.0 * MPI.Wtime()
        self.spent += t1 - self.t0
        self.count += 1

class Timers(dict):
    """ A dict of :class:`Timer`, created on first access. """
    def __getitem__(self, key):
        if not dict.__contains__(self, key):
            self[key] = Timer()
        return dict.__getitem__(self, key)

    def __str__(self):
        return '\n'.join(['%s: %.3f s' % (key, self[key].spent) for key in self])
