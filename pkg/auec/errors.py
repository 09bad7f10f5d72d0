"""
Exceptions raised by auec.

Every error raised on purpose by the package derives from :class:`AuecError`.
The concrete classes also derive from the matching builtin exception, so
``except ValueError`` keeps working for callers who do not care about auec.

The command line maps the classes to exit codes; see :mod:`auec.cli`.
"""

class AuecError(Exception):
    """ Base class of auec errors.

        Attributes
        ----------
        stage : str or None
            The pipeline stage the error crossed, e.g. ``'stage I'``.
            Set by :func:`auec.pipeline.stage`; None for library calls.
    """
    stage = None

    def __str__(self):
        msg = Exception.__str__(self)
        if self.stage is None:
            return msg
        return '[%s] %s' % (self.stage, msg)

class ConfigError(AuecError, ValueError):
    """ A configuration file or override is malformed. """
    def __init__(self, message, filename=None, lineno=None, key=None):
        self.filename = filename
        self.lineno = lineno
        self.key = key
        where = ''
        if filename is not None:
            where = str(filename)
            if lineno is not None:
                where += ':%d' % lineno
            where += ': '
        if key is not None:
            message = '%s: %s' % (key, message)
        AuecError.__init__(self, where + message)

class DataError(AuecError, ValueError):
    """ An input file or matrix is not usable. """
    pass

class NumericalError(AuecError, ArithmeticError):
    """ A computation produced non-finite values or broke an invariant. """
    pass

class DegenerateSpectrumError(NumericalError):
    """ lambda_{K+1} vanishes; the graph has more than K components. """
    pass

class DivergenceError(NumericalError):
    pass

class ClusteringError(NumericalError):
    pass
