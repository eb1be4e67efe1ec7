"""Exception hierarchy shared by all seqbell modules."""


class SeqBellError(Exception):
    """Base class for every error raised by seqbell."""


class InvalidParam(SeqBellError, ValueError):
    """A protocol parameter lies outside its admissible range."""


class PositionOutOfRange(SeqBellError, IndexError):
    """An observer index exceeds the number of configured observers."""


class NotHermitian(SeqBellError, ValueError):
    pass


class NotPSD(SeqBellError, ValueError):
    pass


class InvalidDistribution(SeqBellError, ValueError):
    pass


class NotFound(SeqBellError, LookupError):
    """No feasible angle was found by a grid search."""


class NoViolation(SeqBellError, ValueError):
    pass


class NoFeasiblePoint(SeqBellError, RuntimeError):
    pass
