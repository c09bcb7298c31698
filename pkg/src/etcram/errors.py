"""Exception and warning types shared across the simulator."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class SolverError(RuntimeError):
    """A linear or iterative solve failed."""


class ConvergenceError(SolverError):
    def __init__(self, message, residual=None, estimates=None):
        super().__init__(message)
        self.residual = residual
        self.estimates = estimates


class OhmicWindowWarning(UserWarning):
    """Read bias outside the range where the channel was shown to be Ohmic."""


class GridClampWarning(UserWarning):
    """A lookup fell outside a tabulated grid and was clamped to its edge."""
