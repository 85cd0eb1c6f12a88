"""Exception hierarchy and warning categories used across :mod:`housemove`.

Every error raised on purpose by the library derives from
:class:`HouseMoveError` so that the command line layer can map failures onto
its exit codes without guessing.
"""

from __future__ import annotations

__all__ = [
    "HouseMoveError",
    "DomainError",
    "CompositionError",
    "NumericError",
    "ModelError",
    "RejectionBudgetError",
    "DegeneracyError",
    "StarvationError",
    "PreconditionError",
    "ConfigError",
    "ConvergenceWarning",
    "LowESSWarning",
    "WindowWarning",
]


class HouseMoveError(Exception):
    """Base class for all library errors."""


class DomainError(HouseMoveError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class CompositionError(HouseMoveError):
    """Paths or tables cannot be combined (non-adjacent, mismatched grids)."""


class NumericError(HouseMoveError):
    """Quadrature did not converge or a simulated state became non-finite."""


class ModelError(HouseMoveError):
    """An SDE model violates its hypotheses (e.g. sigma <= 0)."""


class RejectionBudgetError(HouseMoveError):
    """Rejection sampling ran out of attempts."""

    def __init__(self, message: str, *, acceptance_rate: float, attempts: int) -> None:
        super().__init__(f"{message} (acceptance rate {acceptance_rate:.3g} after {attempts} attempts)")
        self.acceptance_rate = acceptance_rate
        self.attempts = attempts


class DegeneracyError(HouseMoveError):
    """All importance weights vanished or the ESS fell below its floor."""

    def __init__(self, message: str, *, component: str | None = None) -> None:
        if component:
            message = f"{component}: {message}"
        super().__init__(message)
        self.component = component


class StarvationError(HouseMoveError):
    """Too few corridor survivors to estimate a kernel or probability."""


class PreconditionError(HouseMoveError):
    """An operation was called outside its stated preconditions."""


class ConfigError(HouseMoveError):
    """Invalid run configuration; message carries ``[section] key: reason``."""


# ---------------------------------------------------------------------------
# Warnings
# ---------------------------------------------------------------------------


class ConvergenceWarning(UserWarning):
    """Level-to-level diagnostics do not shrink along the epsilon schedule."""


class LowESSWarning(UserWarning):
    """A self-normalised estimate rests on fewer than ten effective samples."""


class WindowWarning(UserWarning):
    """An endpoint window had to be widened to obtain enough samples."""
