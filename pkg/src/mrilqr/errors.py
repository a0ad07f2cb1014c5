"""Exception types shared across the package."""

from __future__ import annotations


class NumericalError(RuntimeError):
    """A linear-algebra step failed (singular solve, nonfinite result)."""


class UncontrollablePlantError(ValueError):
    """Raised by operations whose hypotheses require a controllable (A, B)."""


class DareDivergenceError(NumericalError):
    """Riccati value iteration diverged (pair not stabilizable).

    Carries the last iterate so sweep-style callers can still report a
    best-effort cost alongside a warning.
    """

    def __init__(self, message: str, last_iterate=None, iterations: int = 0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class SimulationDivergence(NumericalError):
    """State escaped to a non-finite value during trajectory generation."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step
