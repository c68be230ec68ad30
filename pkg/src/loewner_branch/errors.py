"""Exception hierarchy shared by all modules."""


class LoewnerBranchError(Exception):
    """Base class for all library errors."""


class DomainError(LoewnerBranchError):
    """Evaluation point outside the admissible domain (half-plane / disk)."""


class ParameterError(LoewnerBranchError):
    """Invalid scalar parameter (negative rate, non-positive scale, ...)."""


class MeasureIntegrabilityError(LoewnerBranchError):
    """A required moment of a discretized measure is not finite."""


class AmbiguousClassification(LoewnerBranchError):
    """Fixed-point classification could not be decided within tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SolverEscapeError(LoewnerBranchError):
    """ODE solution left the half-plane (or unit disk) numerically."""


class StiffnessError(LoewnerBranchError):
    """Adaptive step size underflowed without meeting the error tolerance."""


class FiniteMeanError(LoewnerBranchError):
    """Operation requires the finite-mean condition, which the field violates."""


class ExtrapolationError(LoewnerBranchError):
    """Geometric ladder for a boundary limit was not monotone within tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NotEmbeddableError(LoewnerBranchError):
    """Generating family has offspring weight at 0 and cannot be lifted."""


class TruncationError(LoewnerBranchError):
    """Coefficient-extraction aliasing bound exceeds the requested tolerance."""


class InconsistencyError(LoewnerBranchError):
    """Symbolic and numeric versions of a check disagree."""


class ExplosionCapError(LoewnerBranchError):
    """A simulated population exceeded the configured cap."""


class ScenarioError(LoewnerBranchError):
    """Scenario file is malformed (schema violation, bad reference, ...)."""

    def __init__(self, message, field_path=None):
        super().__init__(message)
        self.field_path = field_path
