"""Exception hierarchy."""


class AdmmLocusError(Exception):
    """Base class for all package errors."""


class ValidationError(AdmmLocusError, ValueError):
    """A problem instance or argument violates a documented invariant."""


class InvalidPiecewise(ValidationError):
    """Breakpoints are not strictly increasing or slopes are not monotone."""


class UnsupportedCombination(AdmmLocusError):
    """No proximity solver exists for this (function, A_i, E) combination."""


class SingularSystem(AdmmLocusError):
    """The linear system of a quadratic proximity step is singular."""


class NonFinite(AdmmLocusError):
    """An iterate became NaN or infinite (the iteration diverged)."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class NonCommuting(AdmmLocusError):
    """The normalised curvature bounds of a direction do not commute."""


class DegenerateCounts(AdmmLocusError):
    """Sign counts could not be reduced to the canonical ordering."""


class NotOrthogonal(ValidationError):
    """A matrix expected to be orthogonal is not."""


class StructureMismatch(AdmmLocusError):
    """The reduced matrix does not have the expected block structure."""

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class InsufficientHistory(AdmmLocusError):
    """Too few usable iterations to fit a convergence rate."""


class BreakpointAmbiguity(AdmmLocusError):
    """A coordinate sits on a staircase junction; the local slope is undefined."""

    def __init__(self, message, coordinates=()):
        super().__init__(message)
        self.coordinates = tuple(coordinates)
