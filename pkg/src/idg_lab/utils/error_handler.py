"""Custom exceptions for idg-lab."""

from idg_lab.constants import (
    EXIT_ASSERTION,
    EXIT_MISSING_INPUT,
    EXIT_RESOURCE,
    EXIT_USAGE,
)


class IdgLabError(Exception):
    """Base exception for idg-lab."""

    exit_code: int = EXIT_ASSERTION


class DimensionMismatchError(IdgLabError):
    """Distributions, kernels or encoders disagree on a dimension."""

    def __init__(self, what: str, expected: int, actual: int) -> None:
        """Initialize dimension error.

        Args:
            what: Name of the mismatching dimension
            expected: Expected size
            actual: Size found
        """
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")

    def __reduce__(self) -> tuple[type, tuple[str, int, int]]:
        return type(self), (self.what, self.expected, self.actual)


class ZeroProbabilityEventError(IdgLabError):
    """Conditioning on an event of probability zero."""

    pass


class AssumptionViolationError(IdgLabError):
    """A modelling assumption or construction hypothesis does not hold."""

    pass


class NoQualifyingInputError(AssumptionViolationError):
    """No input satisfies the hypothesis of an adversarial construction."""

    pass


class InadmissibleParameterError(AssumptionViolationError):
    """A construction parameter lies outside its admissible interval."""

    exit_code = EXIT_USAGE


class InsufficientCodesError(IdgLabError):
    """The code space is smaller than the Bayes image."""

    exit_code = EXIT_USAGE


class BudgetExceededError(IdgLabError):
    """Enumeration would exceed the configured budget."""

    exit_code = EXIT_RESOURCE

    def __init__(self, required: int, budget: int) -> None:
        """Initialize budget error.

        Args:
            required: Number of items the request needs
            budget: Configured maximum
        """
        self.required = required
        self.budget = budget
        super().__init__(f"Enumeration of {required} encoders exceeds budget {budget}")

    def __reduce__(self) -> tuple[type, tuple[int, int]]:
        return type(self), (self.required, self.budget)


class UnsatisfiableConstraintError(IdgLabError):
    """Rejection sampling could not satisfy the requested constraints."""

    exit_code = EXIT_RESOURCE


class ShapeMismatchError(IdgLabError):
    """Tensor shapes are incompatible for an operation."""

    exit_code = EXIT_USAGE


class FullyMaskedSliceError(IdgLabError):
    """A masked reduction has a slice with no unmasked entry."""

    pass


class NonScalarOutputError(IdgLabError):
    """Backward was called on a non-scalar node."""

    exit_code = EXIT_USAGE


class ObjectiveConfigError(IdgLabError):
    """Invalid combination of objective, bottleneck and network."""

    exit_code = EXIT_USAGE


class DatasetFormatError(IdgLabError):
    """An embedding CSV file is malformed."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, line: int | None = None) -> None:
        """Initialize dataset error.

        Args:
            message: Error message
            line: 1-based line number in the file, when known
        """
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)

    def __reduce__(self) -> tuple[type, tuple[str, int | None]]:
        return type(self), (self.message, self.line)


class MissingArtifactError(IdgLabError):
    """A checkpoint, dataset or report file does not exist."""

    exit_code = EXIT_MISSING_INPUT
