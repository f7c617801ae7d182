"""Exception types raised across the package."""


class PolarRayError(Exception):
    """Base class for all errors raised by polar_ray."""


class DimensionMismatch(PolarRayError):
    pass


class ParseError(PolarRayError):
    pass


class UnknownVariable(PolarRayError):
    pass


class NonInvariantPotential(PolarRayError):
    pass


class DegeneratePotential(PolarRayError):
    pass


class SingularA(PolarRayError):
    pass


class DegenerateFrame(PolarRayError):
    pass


class DomainEscape(PolarRayError):
    pass


class RankMismatch(PolarRayError):
    pass


class AmbiguousRank(PolarRayError):
    """A singular value fell in the gray zone between two rank candidates."""

    def __init__(self, message, candidates):
        super().__init__(f"{message} (candidate dimensions {candidates})")
        self.candidates = tuple(candidates)


# errors that map to CLI exit code 2
INPUT_ERRORS = (
    ParseError,
    DimensionMismatch,
    NonInvariantPotential,
    DegeneratePotential,
    UnknownVariable,
)
