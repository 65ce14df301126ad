"""Exception hierarchy shared by all modules."""


class DiffSpaceError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DiffSpaceError, ValueError):
    """An expression was evaluated outside its natural domain."""


class ParseError(DiffSpaceError, ValueError):
    """Malformed expression text or scenario document."""


class ValidationError(DiffSpaceError, ValueError):
    """A declared object violates its invariants (membership, arity, references)."""


class BoundError(DiffSpaceError, ValueError):
    """A generator value left [-1, 1] where a bounded family is required."""


class SamplerFailure(DiffSpaceError, RuntimeError):
    """A dense-domain sampler could not produce a point near the target."""


class HomogeneityError(DiffSpaceError, ValueError):
    """A sigma-presented form is not multi-homogeneous in its slot blocks."""


class ExtensionRequired(DiffSpaceError):
    """A face could not be built because the cube map does not extend to it."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotIntegrable(DiffSpaceError):
    """The pullback coefficient has no continuous extension to the closed cube."""

    def __init__(self, message, witness=None, cube=None):
        super().__init__(message)
        self.witness = witness
        self.cube = cube


class NoConvergence(DiffSpaceError, RuntimeError):
    """Adaptive quadrature exhausted its subdivision depth."""


class ExtensionMismatch(DiffSpaceError, ValueError):
    """An ambient form does not restrict to the point form it should extend."""


class DimensionMismatch(DiffSpaceError, ValueError):
    """Chains or forms of incompatible dimension were combined."""
