from typing import Optional


class LstcError(Exception):
    """Base class for every error raised or returned by this package."""


class DimensionError(LstcError, ValueError):
    """Raised when tensor shapes do not line up for an operation."""


class ValidationError(LstcError, ValueError):
    """Raised when a value breaks a documented precondition."""


class NumericalError(LstcError, ArithmeticError):
    """Raised when an operation produces ``nan`` or ``inf`` values."""


class ConfigurationError(LstcError, ValueError):
    """Raised when a configuration file or object is inconsistent."""


class PairingError(LstcError, ValueError):
    """Raised when two samples from different view groups are mixed."""


class UsageError(LstcError):
    """Raised when an API or a command is called the wrong way."""


class MetadataParseError(LstcError, ValueError):
    """Raised when a sample name does not follow the NTU convention."""


class SkeletonParseError(LstcError, ValueError):
    """
    Raised when a ``.skeleton`` text stream cannot be parsed.

    Always knows the one-based line where parsing stopped.

    .. code:: python

      >>> error = SkeletonParseError('bad joint count', line=3)
      >>> str(error)
      'line 3: bad joint count'

    """

    __slots__ = ('line', 'reason')

    def __init__(self, reason: str, line: int) -> None:
        """Saves the reason and the line for later inspection."""
        super().__init__('line {0}: {1}'.format(line, reason))
        self.reason = reason
        self.line = line


class TrainingError(LstcError):
    """
    Raised or returned when training has to be aborted.

    Carries the optimizer step where it happened, when known.
    """

    __slots__ = ('step',)

    def __init__(self, reason: str, step: Optional[int] = None) -> None:
        """Saves the offending step in the inner state."""
        message = reason if step is None else 'step {0}: {1}'.format(
            step, reason,
        )
        super().__init__(message)
        self.step = step
