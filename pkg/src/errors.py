"""Exception hierarchy for the half-line HNLS laboratory.

Library code raises these; only the command line in ``scenario_runner``
catches them and turns them into exit codes.
"""

from typing import Optional


class HnlsError(Exception):
    """Base class for every error raised by the laboratory."""


class InvalidInputError(HnlsError):
    pass


class DomainTooShortError(HnlsError):
    pass


class NotAWeightError(HnlsError):
    pass


class AccuracyError(HnlsError):
    pass


class ResolutionError(HnlsError):
    """Spectral tail mass above the aliasing guard."""


class SingularOperatorError(HnlsError):
    pass


class InsufficientDataError(HnlsError):
    pass


class BelowCutoffError(HnlsError):
    """The characteristic cubic has no unique root with negative real part."""

    def __init__(self, lam: float, n_negative: int):
        super().__init__(
            f"lambda={lam:g}: {n_negative} roots with negative real part (need exactly 1)"
        )
        self.lam = lam
        self.n_negative = n_negative


class CalibrationFailedError(HnlsError):
    pass


class SplittingViolationError(HnlsError):
    pass


class ContractionFailureError(HnlsError):
    def __init__(self, iterations: int, distance: float):
        super().__init__(
            f"fixed point not reached after {iterations} iterations "
            f"(last distance {distance:.3e}); reduce dt"
        )
        self.iterations = iterations
        self.distance = distance


class IllConditionedBasisError(HnlsError):
    pass


class StiffnessError(HnlsError):
    pass


class UndefinedFunctionalError(HnlsError):
    pass


class InvalidTestFunctionError(HnlsError):
    pass


class NumericalDegeneracyError(HnlsError):
    pass


class TailContaminationError(HnlsError):
    def __init__(self, tail_mass: float, total_mass: float):
        super().__init__(
            f"tail mass {tail_mass:.3e} exceeds 1e-8 of total {total_mass:.3e}; "
            "enlarge L"
        )
        self.tail_mass = tail_mass
        self.total_mass = total_mass


class ConfigRejectedError(HnlsError):
    """A scenario config failed to load or violates a well-posedness hypothesis."""

    def __init__(self, message: str, hypothesis: Optional[str] = None):
        super().__init__(message if hypothesis is None else f"{message} ({hypothesis})")
        self.hypothesis = hypothesis


class ResidualThresholdError(HnlsError):
    pass
