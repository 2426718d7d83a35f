"""Eigenvalue asymptotics of the Dirichlet Laplacian on narrow planar domains.

Library layout:

* `series` - truncated power-series algebra and the graded perturbation
  potentials of the stretched 1D problem;
* `oscillator` - finite-difference Schrodinger solver with an in-repo
  symmetric tridiagonal eigensolver, plus matrix elements and decay checks;
* `perturbation` - Rayleigh-Schrodinger recursion, closed-form low orders,
  and the brute-force branch-fit oracle;
* `laplacian2d` - mapped-coordinate bilinear FEM ground truth for the 2D
  Dirichlet eigenvalues;
* `reduction` - adiabatic projection, block operators, identity checks, and
  the contraction fixed point for the model-vs-true eigenvalue gap;
* `harness` / `cli` - experiment configuration, sweeps, reports, and the
  command-line surface.
"""

from .errors import (
    BranchCrossingError,
    ConfigError,
    DegenerateEigenvalueError,
    GeometryError,
    ParameterError,
    SolverError,
    ThinspecError,
)
from .series import (
    DomainProfile,
    PolynomialPotential,
    TruncatedSeries,
    build_perturbation_terms,
    build_perturbation_terms_constant,
    oscillator_potential,
    series_mul,
    series_pow,
)
from .oscillator import (
    Grid1D,
    MatrixElementTable,
    SpectralResult1D,
    decay_certificate,
    matrix_elements,
    richardson_refine,
    select_box_halfwidth,
    solve_schrodinger_1d,
    solve_sturm_liouville,
)
from .perturbation import (
    BranchFitResult,
    DensePerturbationProblem,
    PerturbationExpansion,
    brute_force_branch_fit,
    closed_form_q1_q2,
    evaluate_prediction,
    problem_from_table,
    rs_expand,
    suggest_fit_ladder,
)
from .laplacian2d import (
    Mesh2D,
    SpectralResult2D,
    assemble_mapped_form,
    build_mesh,
    default_shift,
    solve_lowest_modes,
    solve_profile_modes,
)
from .reduction import (
    AdiabaticBasis,
    BlockOperators,
    CorrectionSeries,
    FixedPointTrace,
    a21_identity_check,
    a21_scaling_probe,
    a22_gap_check,
    build_blocks,
    build_projection,
    bump_chi,
    correction_coefficients,
    fixed_point_iterate,
    transverse_integral_check,
    verify_a11_formula,
)

__version__ = "0.1.0"
