"""Exception hierarchy.

Validation problems (bad input documents or configs) derive from
:class:`ValidationError`; failures during inference derive from
:class:`InferenceError`. The CLI maps the two families to distinct exit codes.
"""


class DiagnosisError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DiagnosisError):
    """An input object violates a structural or range invariant."""

    def __init__(self, message, entity=None):
        self.entity = entity
        if entity is not None:
            message = f"{message} [{entity}]"
        super().__init__(message)


class DuplicateId(ValidationError):
    pass


class ProbabilityOutOfRange(ValidationError):
    pass


class DanglingLink(ValidationError):
    pass


class EmptyNetwork(ValidationError):
    pass


class UnknownFinding(ValidationError):
    pass


class UnknownDisease(ValidationError):
    pass


class IncompleteInstance(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class InfeasibleConfig(InvalidConfig):
    pass


class ParseError(ValidationError):
    """Malformed document. ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message, line=None, column=None, entity=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message, entity)


class InferenceError(DiagnosisError):
    pass


class TooManyDiseases(InferenceError):
    pass


class TooManyPositiveFindings(InferenceError):
    pass


class PositiveEvidencePresent(InferenceError):
    pass


class ZeroEvidenceProbability(InferenceError):
    pass


class AllHypothesesExcluded(InferenceError):
    pass


class AllZeroWeights(InferenceError):
    pass


class InsufficientBatches(InferenceError):
    pass


class NumericalInstability(InferenceError):
    """A result drifted outside [0, 1] by more than rounding can explain."""


class RejectionBudgetExceeded(InferenceError):
    pass


class IoFailure(DiagnosisError):
    pass
