"""Exception hierarchy shared across the package."""


class CUGravityError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(CUGravityError):
    """Input table violates a schema or consistency requirement."""


class CodingError(CUGravityError):
    """A pair-year could not be coded, e.g. a regime row is missing."""


class PanelError(CUGravityError):
    """Panel construction failed (duplicates, negative flows, domain gaps)."""


class DesignError(CUGravityError):
    """Design construction failed (unknown covariates, nothing identifiable)."""


class FitError(CUGravityError):
    """Estimation failed before or during iteration."""


class NonConvergenceError(FitError):
    """Iteration limit reached before the convergence criteria held.

    Carries the last iterate and a diagnostic trace so callers can inspect
    what happened.
    """

    def __init__(self, message, beta=None, iterations=None, trace=None):
        super().__init__(message)
        self.beta = beta
        self.iterations = iterations
        self.trace = trace if trace is not None else []


class SolverError(CUGravityError):
    """Counterfactual solver failed (bad inputs or non-convergence)."""

    def __init__(self, message, residual_trace=None):
        super().__init__(message)
        self.residual_trace = residual_trace if residual_trace is not None else []
