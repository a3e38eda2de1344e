"""Exception types shared by the toolkit."""


class SeqOptError(Exception):
    """Base class for all toolkit errors."""


class InvalidInstanceError(SeqOptError, ValueError):
    """Problem parameters (N, K, Z, family settings) are not admissible."""


class ShapeError(SeqOptError, ValueError):
    """An array does not have the dimension implied by (N, K)."""


class FeasibilityError(SeqOptError, ValueError):
    """A point violates the power/coupling/epigraph constraints beyond tolerance."""


class DegenerateInstanceError(SeqOptError, ZeroDivisionError):
    """An SNR figure would require dividing by a zero cost."""


class ParseError(SeqOptError, ValueError):
    """A data file is malformed; ``line`` is the 1-based line number (or None)."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
