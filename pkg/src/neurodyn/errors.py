"""Exception hierarchy.

Every validation problem derives from :class:`ValidationError` (CLI exit
code 2); file-system problems raise :class:`IoFailure` (exit code 1).
"""


class NeurodynError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(NeurodynError, ValueError):
    """Input violates a documented precondition."""


class IoFailure(NeurodynError, OSError):
    """Reading or writing a file failed."""


# trial data
class MissingColumn(ValidationError):
    pass


class RaggedTrials(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class DuplicateCell(ValidationError):
    pass


class UnknownChannel(ValidationError, KeyError):
    def __str__(self):
        return ValidationError.__str__(self)


# signal processing
class InvalidCutoff(ValidationError):
    pass


class OddOrder(ValidationError):
    pass


class TooShort(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class TrialTooShort(ValidationError):
    pass


# metrics
class LengthMismatch(ValidationError):
    pass


class DegenerateSignal(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class TooFewSeeds(ValidationError):
    pass


# forecasting
class LibraryTooSmall(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ConstantSequence(ValidationError):
    pass


class InsufficientTrials(ValidationError):
    pass


# pca
class DegenerateData(ValidationError):
    pass


class TooFewRows(ValidationError):
    pass


# simulation
class NonFiniteState(NeurodynError, ArithmeticError):
    pass
