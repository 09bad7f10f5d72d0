"""
Row decomposition of work over an MPI communicator.

The decomposition is static: rank ``r`` owns the contiguous rows
``[start, end)``. Gathering concatenates the per-rank pieces in rank order,
so a gathered result does not depend on the number of ranks.
"""
import numpy
from mpi4py import MPI

class RowLayout(object):
    """
    The layout of N rows over the ranks of a communicator.

    Parameters
    ----------
    N : int
        total number of rows.
    comm : MPI.Comm
        communicator; defaults to MPI.COMM_WORLD.

    Attributes
    ----------
    edges : array_like, int
        ``edges[r]`` to ``edges[r + 1]`` are the rows of rank r.

    """
    def __init__(self, N, comm=None):
        if comm is None:
            comm = MPI.COMM_WORLD
        if N < 0:
            raise ValueError("number of rows must be non-negative")

        self.comm = comm
        self.N = N
        self.edges = numpy.arange(comm.size + 1, dtype='intp') * N // comm.size
        self.start = int(self.edges[comm.rank])
        self.end = int(self.edges[comm.rank + 1])

    @property
    def size(self):
        """ number of rows owned by this rank """
        return self.end - self.start

    def local(self, data):
        """ The rows of data owned by this rank. """
        return data[self.start:self.end]

    def gather(self, local):
        """
        Collect the per-rank rows on every rank.

        Parameters
        ----------
        local : array_like
            rows computed by this rank; the length must be :attr:`size`.

        Returns
        -------
        data : array_like
            all N rows, in global order.
        """
        local = numpy.asarray(local)
        if len(local) != self.size:
            raise ValueError("expecting %d local rows, got %d" % (self.size, len(local)))
        pieces = self.comm.allgather(local)
        return numpy.concatenate(pieces, axis=0)

    def gather_list(self, local):
        """ Like :meth:`gather`, for a list of python objects. """
        local = list(local)
        if len(local) != self.size:
            raise ValueError("expecting %d local items, got %d" % (self.size, len(local)))
        return [item for piece in self.comm.allgather(local) for item in piece]
