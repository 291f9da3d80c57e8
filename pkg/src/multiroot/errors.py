"""Exception hierarchy shared by all multiroot modules."""


class MultirootError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(MultirootError):
    """Operands are structurally incompatible (center, dimension, shape)."""


class DomainError(MultirootError):
    """An input lies outside the mathematical domain of the operation."""


class SingularPivotError(MultirootError):
    """A pivot block (or constant term) is numerically singular."""


class RankDeficiencyError(MultirootError):
    """A pivot search contradicts the rank certified for the matrix."""


class TruncationExhaustedError(MultirootError):
    """Selection needs derivatives beyond the stored truncation order."""


class ExtractionError(MultirootError):
    """No square subsystem of full numerical rank could be extracted."""


class NonTerminationError(MultirootError):
    """The deflation loop exceeded its iteration safety cap."""


class CertificateUnavailableError(MultirootError):
    """A certificate cannot be computed from the supplied data."""


class LinearSolveError(MultirootError):
    """A linear system that was certified regular failed to solve."""


class ParseError(MultirootError):
    """An input file is malformed; the message names the offending field."""
