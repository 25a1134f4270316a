"""Multi-domain spectral collocation for variable-order fractional equations."""

from mdscm.analysis import (
    ConvergenceRow,
    MeshSpec,
    SpectrumReport,
    condition_number_l2,
    convergence_study,
    eigenvalues,
    linf_error,
)
from mdscm.assembly import (
    FracDiffMatrix,
    assemble_first_order,
    assemble_mdfdm,
    assemble_penalty,
    boundary_lift,
)
from mdscm.expr import ExprError, parse_order_expr
from mdscm.fracops import OrderField, OrderFieldError, frac_deriv_lagrange
from mdscm.jacobi import JacobiParams, build_basis
from mdscm.mesh import (
    ElementMesh,
    make_composite_left,
    make_geometric,
    make_graded,
    make_uniform,
)
from mdscm.solvers import (
    BurgersProblem,
    HelmholtzProblem,
    InstabilityError,
    SolveReport,
    solve_burgers,
    solve_helmholtz,
)

__all__ = [
    "BurgersProblem", "ConvergenceRow", "ElementMesh", "ExprError", "FracDiffMatrix",
    "HelmholtzProblem", "InstabilityError", "JacobiParams", "MeshSpec", "OrderField",
    "OrderFieldError", "SolveReport", "SpectrumReport", "assemble_first_order",
    "assemble_mdfdm", "assemble_penalty", "boundary_lift", "build_basis",
    "condition_number_l2", "convergence_study", "eigenvalues", "frac_deriv_lagrange",
    "linf_error", "make_composite_left", "make_geometric", "make_graded",
    "make_uniform", "parse_order_expr", "solve_burgers", "solve_helmholtz",
]  # fmt: skip
