"""Monte Carlo solver for semilinear elliptic Dirichlet problems
(1/2) Lap u = F(x, u) on bounded domains of R^d, d >= 3, with bounded,
possibly discontinuous boundary data."""

__version__ = "0.1.0"

from .errors import (
    AccuracyWarning,
    ConfigurationError,
    ConfigurationWarning,
    EllipticMCError,
    HypothesisViolation,
    InputError,
    NumericalError,
)
from .fields import Field
from .geometry import DomainGeometry, annulus, ball, box, enclosing_ball, implicit
from .linear import (
    Estimate,
    GreenConstants,
    field_harmonic_extension,
    green_kernel,
    green_potential,
    harmonic_extension,
    schrodinger_solution,
)
from .nonlinear import (
    ContractionReport,
    IterationTrace,
    LambdaSpace,
    apply_T,
    contraction_report,
    lambda_bounds,
    lipschitz_constant,
    picard_solve,
    q_of,
)
from .problemspec import ProblemSpec, SolverConfig, load, save, validate
from .sampling import (
    ExitSample,
    PathSample,
    RngStream,
    em_path,
    feynman_kac_weight,
    wos_exit,
)

__all__ = [
    "AccuracyWarning", "ConfigurationError", "ConfigurationWarning",
    "ContractionReport", "DomainGeometry", "EllipticMCError", "Estimate",
    "ExitSample", "Field", "GreenConstants", "HypothesisViolation",
    "InputError", "IterationTrace", "LambdaSpace", "NumericalError",
    "PathSample", "ProblemSpec", "RngStream", "SolverConfig",
    "annulus", "apply_T", "ball", "box", "contraction_report",
    "em_path", "enclosing_ball", "feynman_kac_weight",
    "field_harmonic_extension", "green_kernel", "green_potential",
    "harmonic_extension", "implicit", "lambda_bounds", "lipschitz_constant",
    "load", "picard_solve", "q_of", "save", "schrodinger_solution",
    "validate", "wos_exit",
]
