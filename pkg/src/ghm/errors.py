"""Exception hierarchy shared by all subpackages."""

from __future__ import annotations


class GHMError(Exception):
    """Base class for package errors."""


class InputError(GHMError, ValueError):
    """Malformed or inconsistent user input (CLI exit code 2)."""


class DomainError(InputError):
    """An argument lies outside the domain where a construction is defined."""


class DimensionError(InputError):
    """Shapes of vectors, matrices or blocks do not chain together."""


class OutOfRegionError(GHMError):
    """A point lies outside the partitioned region [-a, a]^r."""


class EmptyCubeError(GHMError):
    """A point falls in a cube that holds no fitted coefficients."""


class NumericalError(GHMError):
    """A numerical routine failed (CLI exit code 3)."""
