"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Input or configuration rejected before any computation."""


class UnphysicalStateError(ValidationError):
    """A matrix handed in as a density matrix is not Hermitian, trace-1 and PSD."""


class ConvergenceError(RuntimeError):
    """A numerical routine ran out of iterations.

    ``best`` carries the best iterate found so far, ``residual`` its cost.
    """

    def __init__(self, message: str, best=None, residual: float | None = None):
        super().__init__(message)
        self.best = best
        self.residual = residual
