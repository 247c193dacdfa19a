"""Spectral toolkit for Schrodinger operators with rational Herglotz-Nevanlinna
boundary conditions: direct solver, regularized spectral sums, the identity
system linking them to the boundary coefficient, and inverse recovery."""
from .direct_solver import (
    PotentialSpec,
    ProblemSpec,
    SolverParams,
    SpectralDatum,
    Spectrum,
    beta,
    char_function,
    find_eigenvalues,
    norming_constant,
)
from .errors import (
    BracketingFailure,
    DegenerateEigenfunction,
    DegenerateInput,
    DimensionMismatch,
    HNSpectralError,
    IndexOutOfRange,
    IntegrationFailure,
    NoConvergence,
    NonPositiveNorming,
    NotAnEigenvalue,
    NotHerglotz,
    NotPositiveDefinite,
    PoleProximity,
    SingularSystem,
    UnderdeterminedProblem,
)
from .hn_functions import (
    OmegaVector,
    RationalHNFunction,
    RealPolynomial,
    evaluate,
    evaluate_derivative,
    index,
    omega_poly,
    omega_to_hn,
    resultant,
    sylvester_matrix,
    up_down,
)
from .identity_engine import (
    parseval_delta,
    parseval_h0,
    residuals,
    right_endpoint_spectrum,
    solve_for_omega,
    solve_for_sigma,
    system_determinant,
)
from .inverse_recovery import MissingSlot, PartialSpectrum, recover_boundary_coefficient, recover_missing
from .spectral_sums import SigmaVector, sigma_plain, sigma_top, sigma_vector

__version__ = "0.1.0"
