"""2D finite-element solver for fully nonlinear Hamilton-Jacobi-Bellman
Dirichlet problems under the Cordes condition.

Policy iteration (Howard's algorithm) alternates per-cell control
maximization with least-squares Galerkin gradient-recovery solves of the
resulting nondivergence-form linear problems; residual error indicators
drive adaptive newest-vertex bisection.
"""

from .mesh import (TriMesh, MarkedSet, unit_square_mesh, unit_disk_mesh,
                   refine_uniform, refine_marked, read_mesh, write_mesh)
from .fespace import (FeSpace, QuadRule, DiscreteFunction, build_space,
                      triangle_rule, interpolate, norms, pair_norm)
from .problem import (ControlSet, HjbProblem, CordesCertificate,
                      cordes_ratio, verify_cordes, make_square_hjb,
                      make_disk_hjb, make_linear_nondiv, make_poisson,
                      get_problem)
from .assembly import (PairField, SparseSystem, m_theta_point, assemble,
                       residual_functional)
from .linsolve import SolveReport, solve_spd, solve_direct
from .howard import (ControlField, HowardHistory, control_objective,
                     optimize_control, howard_solve)
from .adapt import (Indicators, compute_indicators, mark_fraction,
                    adaptive_solve)
from .cli import RunConfig, ErrorReport, eoc, run

__all__ = [
    "TriMesh", "MarkedSet", "unit_square_mesh", "unit_disk_mesh",
    "refine_uniform", "refine_marked", "read_mesh", "write_mesh",
    "FeSpace", "QuadRule", "DiscreteFunction", "build_space",
    "triangle_rule", "interpolate", "norms", "pair_norm",
    "ControlSet", "HjbProblem", "CordesCertificate", "cordes_ratio",
    "verify_cordes", "make_square_hjb", "make_disk_hjb",
    "make_linear_nondiv", "make_poisson", "get_problem",
    "PairField", "SparseSystem", "m_theta_point", "assemble",
    "residual_functional", "SolveReport", "solve_spd", "solve_direct",
    "ControlField", "HowardHistory", "control_objective",
    "optimize_control", "howard_solve", "Indicators",
    "compute_indicators", "mark_fraction", "adaptive_solve",
    "RunConfig", "ErrorReport", "eoc", "run",
]

__version__ = "0.1.0"
