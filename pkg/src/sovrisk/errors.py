"""Exception hierarchy. The CLI maps each class to an exit code."""


class SovriskError(Exception):
    exit_code = 1


class DataError(SovriskError):
    """Input data violates a value-level constraint."""

    exit_code = 1


class FormatError(SovriskError):
    """Malformed file layout, header or config."""

    exit_code = 2


class NumericalError(SovriskError):
    """Optimizer failed to converge or landed on a search boundary."""

    exit_code = 3


class ProbabilityRangeError(ValueError):
    """A probability left [0, 1]; callers treat this as a signal, not noise."""

    def __init__(self, message, value):
        super().__init__(message)
        self.value = value
