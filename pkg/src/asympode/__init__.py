"""Asymptotic integration toolkit for Poincare-type fourth-order ODEs.

Green kernels of constant-coefficient cubics, the fixed-point solution of the
third-order nonlinear equation, envelope constants, L^p decomposition, the
Riccati-type reduction of fourth-order equations, the unbounded-coefficient
transformation, and a Runge-Kutta oracle to check all of it.
"""

from .expr import (ExprDomainError, ExprError, ExprNode, ExprSyntaxError,
                   UnknownIdentifierError, compile_expr, diff_expr, eval_expr, parse_expr,
                   to_string)
from .kernels import (CharRoots, KernelConstants, RootError, asymptotic_constants,
                      cubic_roots, green_eval, make_roots, printed_kernel)
from .rhs import (CoefficientTable, P3Split, QuadConfig, eval_rhs, functionals_GL,
                  hypothesis_report, omega_level_sum)
from .solver import (GridFunction, MaxIterError, NonContractionError, SolverError,
                     apply_T, envelope, ode_residual, solve_fixed_point)
from .lp import LpDecomposition, decompose_solution, m_of_p, window_lp_norm
from .poincare import (PoincareProblem, asymptotic_report, check_F_membership,
                       fundamental_system, levinson_data, quartic_roots, riccati_reduction)
from .unbounded import (UnboundedProblem, l1_hypothesis_check, transform_coefficients,
                        unbounded_fundamental_system)
from .oracle import (Linear4, Nonlinear3, Trajectory, integrate_linear4,
                     integrate_nonlinear3, residual_check)
from .examples import reproduce_example

__version__ = "0.1.0"
