"""Exception types shared across the package."""


class ChokeLabError(Exception):
    """Base class for all package errors."""


class SolverError(ChokeLabError):
    """Raised when the steady-state root finder does not converge."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class DomainError(ChokeLabError, ValueError):
    """An argument falls outside the interval where a formula is defined."""


class InvalidBacklogError(DomainError):
    pass


class DegenerateEquilibriumError(DomainError):
    pass


class ScenarioError(ChokeLabError, ValueError):
    """A scenario document is malformed or inconsistent."""
