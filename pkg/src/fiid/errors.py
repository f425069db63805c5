"""Exception types shared across the package."""

from __future__ import annotations


class InvalidParameter(ValueError):
    """A caller-supplied parameter is outside its documented range."""


class ContractViolation(ValueError):
    """An operation's precondition or asserted postcondition failed."""


class DegeneracyError(RuntimeError):
    """A probability-zero event of the infinite model occurred on the window.

    Raised when an operation needs a forking cluster or a furcation seed and
    some component has none.  ``components`` lists the offending component
    ids of the ambient forest; ``step`` is filled in by the construction.
    """

    def __init__(self, cause: str, components=(), step: int | None = None):
        self.cause = cause
        self.components = tuple(int(c) for c in components)
        self.step = step
        super().__init__(f"{cause} (components {list(self.components)[:8]})")


class InsufficientDataError(ValueError):
    """Too few usable samples for a statistical test."""
