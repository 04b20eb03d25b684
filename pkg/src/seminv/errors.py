"""Exception taxonomy shared across the package.

``ValidationError`` and its relatives signal bad user input (CLI exit code 1);
anything else that escapes is treated as a runtime failure (exit code 2).
"""


class SemInvError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(SemInvError):
    """A config or argument violates a documented invariant."""


class ParseError(ValidationError):
    """A config file is not well-formed structured text."""


class CycleDetected(ValidationError):
    """The supplied edge set (or a soft override) does not form a DAG."""


class InvalidNoiseSpec(ValidationError):
    """A noise entry is malformed, e.g. constant noise on the target."""


class TargetIntervened(ValidationError):
    """An intervention touches the target variable."""


class DimensionMismatch(ValidationError):
    """Array shapes are incompatible."""


class InvalidParameters(ValidationError):
    """A complexity-budget parameter is out of range."""


class InsufficientSamples(ValidationError):
    """An estimator received fewer rows than it needs."""


class ZeroHead(ValidationError):
    """An operation that normalises by the head received the zero head."""


class ZeroMeanHead(ZeroHead):
    """Generalization scoring needs a nonzero training mean head."""


class TooManyVariables(ValidationError):
    """Power-set enumeration was asked for more variables than the guard allows."""


class EmptyBin(ValidationError):
    """Conditional subsampling produced a bin with fewer than two rows."""


class UsageError(ValidationError):
    """Bad command line; the synopsis has already been printed."""
