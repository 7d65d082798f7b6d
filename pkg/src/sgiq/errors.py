"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SgiqError(Exception):
    """Base class for all package errors."""


class NonPhysical(SgiqError, ValueError):
    """Inputs describe a geometry the channel model cannot represent."""


class DomainError(SgiqError, ValueError):
    """Argument outside the mathematical domain of a function."""


class Unreachable(SgiqError):
    """Target fidelity cannot be reached by iterated purification."""


class ConfigError(SgiqError, ValueError):
    """Invalid or inconsistent configuration."""


class DimensionMismatch(SgiqError, ValueError):
    """Solution vector does not match the instance it is checked against."""


class TooLarge(SgiqError):
    """Exhaustive enumeration would exceed the configured limit."""


class LpError(SgiqError):
    """The LP solver ended in a state that should be impossible for routing instances."""


class InfeasibleSchedule(SgiqError):
    """A schedule consumes more resources than the routing graph provides."""
