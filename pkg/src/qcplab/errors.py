"""Shared exception types.

Every module raises these instead of bare ValueError so the CLI can map
failures onto its exit-code contract (2 usage, 3 capacity, 4 property
failure).
"""


class QcpLabError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(QcpLabError, ValueError):
    """Operands have incompatible ambient dimensions or widths."""


class ParameterError(QcpLabError, ValueError):
    """A parameter is outside its documented range."""


class CapacityError(QcpLabError, ValueError):
    """A size cap (qubits, enumeration domain, word width) was exceeded."""


class ImpossibleCollapseError(QcpLabError, ValueError):
    """A measurement branch with (numerically) zero probability was requested."""


class UndefinedConditioningError(QcpLabError, ValueError):
    """Conditioning on a zero-probability measurement outcome."""


class EvaluationFailedError(QcpLabError, RuntimeError):
    """A protected evaluation measured the reject branch of its program."""
