"""Relaxed ADMM as a Douglas-Rachford recursion, with contraction bounds and
closed-form eigenvalue loci of its iteration matrix."""

from .bounds import (
    AlphaBox,
    BoundSpectrum,
    SpectralModel,
    bound_spectrum,
    build_spectral_model,
    h_map,
    mu_joint,
    mu_separable,
    mu_single,
    optimal_scalar_tuning,
    rho_joint,
)
from .engine import AdmmConfig, AdmmState, RunResult, recover_primal, run, step_dr, step_scaled
from .exceptions import (
    AdmmLocusError,
    BreakpointAmbiguity,
    DegenerateCounts,
    InsufficientHistory,
    InvalidPiecewise,
    NonCommuting,
    NonFinite,
    NotOrthogonal,
    SingularSystem,
    StructureMismatch,
    UnsupportedCombination,
    ValidationError,
)
from .lasso import fit_rate, gen_lasso, lasso_bounds, lasso_experiment, local_jacobian_eigs
from .locus import (
    LevelSpec,
    LocusParams,
    cs_decompose,
    locus_contains,
    locus_params,
    map_to_R,
    optimal_q,
    theorem1_eigs,
    verify_H_structure,
)
from .problem import (
    CurvatureBounds,
    PiecewiseLinear1DArray,
    Quadratic,
    SplitProblem,
    WeightedL1,
    curvature_bounds,
    load_problem,
    validate_problem,
)
from .prox import make_context, prox_point, reflected_prox, staircase_build, staircase_slope

__version__ = "0.1.0"
