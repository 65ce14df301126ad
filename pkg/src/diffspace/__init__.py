"""Integration of point forms on generalized cubes over differential spaces."""

from .chains import Chain, boundary, boundary_chain, identify, is_zero
from .cubes import (
    ExtensionConfig,
    ExtensionResult,
    GeneralizedCube,
    PulledBackForm,
    cube,
    extend,
    extendability_report,
    face,
    identity_cube,
    pullback,
)
from .errors import (
    BoundError,
    DiffSpaceError,
    DimensionMismatch,
    DomainError,
    ExtensionMismatch,
    ExtensionRequired,
    HomogeneityError,
    NoConvergence,
    NotIntegrable,
    ParseError,
    SamplerFailure,
    ValidationError,
)
from .forms import (
    AmbientForm,
    PointForm,
    SigmaPresentedForm,
    ambient_form,
    canonicalize,
    eval_form,
    exterior_derivative,
    factorize,
    homogeneity_check,
    point_form,
    pullback_form,
    restrict,
    wedge,
)
from .integrate import (
    QuadConfig,
    StokesReport,
    d_commutes_pullback_check,
    integrate_chain,
    integrate_cube,
    quadrature,
    verify_stokes,
)
from .smoothfn import SmoothExpr, SmoothMap, const, evaluate, jacobian, mixed_partial, parse_expr, partial, var
from .space import DenseDomain, DifferentialSpace, Membership, make_space

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
