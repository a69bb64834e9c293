"""Exception taxonomy shared by all armskit modules."""

from __future__ import annotations


class ArmskitError(Exception):
    """Base class for every error raised by this package."""


class SpecError(ArmskitError):
    """A density or experiment specification is malformed."""


class DomainError(ArmskitError):
    """A point lies outside the domain it was evaluated on."""


class InsufficientSupport(ArmskitError):
    """Too few support points for the requested construction."""


class TailSlopeError(ArmskitError):
    """A tail piece on an unbounded side has the wrong slope sign."""


class NonFiniteValue(ArmskitError):
    """A log-density or derived quantity came back NaN (or unusably infinite)."""


class DuplicatePoint(ArmskitError):
    """An inserted point coincides with an existing support point.

    Carries ``x_new`` and ``existing`` so callers that treat duplicate
    insertion as a no-op can still log what happened.
    """

    def __init__(self, x_new: float, existing: float):
        super().__init__(f"point {x_new!r} duplicates support point {existing!r}")
        self.x_new = x_new
        self.existing = existing


class DivergentArea(ArmskitError):
    """An unbounded piece does not integrate to a finite mass."""


class DominanceViolation(ArmskitError):
    """The target exceeded a proposal that is contractually an upper bound."""


class SamplerAbort(ArmskitError):
    """A sampler exceeded its rejection budget; carries loop context."""

    def __init__(self, message: str, *, iteration: int, generation: int, support_size: int):
        super().__init__(message)
        self.iteration = iteration
        self.generation = generation
        self.support_size = support_size


class DegenerateChain(ArmskitError):
    """A chain statistic is undefined (zero variance)."""


class GridError(ArmskitError):
    """A quadrature grid misses regions where a density is non-negligible."""


class ParseError(ArmskitError):
    """A config file or CLI value could not be parsed; names the field."""
