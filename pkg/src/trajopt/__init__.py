"""Trajectory optimization with interchangeable Riccati backward passes.

One outer loop drives three local steps over the same per-trajectory
expansion: iLQR (first-order dynamics), Newton-LQR (exact constrained Newton
with threaded costates), and DDP (value-gradient-weighted dynamics Hessians).
A dense whole-trajectory KKT solve acts as the independent oracle certifying
each sweep, and a CLI runs the seeded benchmark experiments.
"""

from .backward import (BackwardSolution, backward_ddp, backward_ilqr,
                       backward_newton, expected_reduction, multipliers_from,
                       quu_spectrum)
from .errors import (BackwardPassError, ConfigError, DimensionError,
                     DivergenceError, KktError, NonDescentError, TrajoptError)
from .expansion import ExpansionSequence, expand_along
from .kkt import (DenseQP, KktSolution, assemble_qp, cost_gradient_adjoint,
                  solve_kkt, split_primal, verify_equivalence)
from .linesearch import (LineSearchConfig, LineSearchOutcome, accept,
                         directional_derivative, forward_pass, line_search)
from .models import (CartPoleModel, CostModel, DerivativeBundle,
                     LinearModel, PendulumModel, QuadraticCost,
                     check_derivatives, make_benchmark)
from .solver import (IterationRecord, SolveResult, SolverConfig, converged,
                     hybrid_solve, initial_multiplier_estimate, solve)
from .trajectory import (PerturbationPath, Trajectory, linear_rollout,
                         rollout, total_cost)

__version__ = "0.1.0"

__all__ = [
    "BackwardSolution", "backward_ddp", "backward_ilqr", "backward_newton",
    "expected_reduction", "multipliers_from", "quu_spectrum",
    "BackwardPassError", "ConfigError", "DimensionError", "DivergenceError",
    "KktError", "NonDescentError", "TrajoptError",
    "ExpansionSequence", "expand_along",
    "DenseQP", "KktSolution", "assemble_qp", "cost_gradient_adjoint",
    "solve_kkt", "split_primal", "verify_equivalence",
    "LineSearchConfig", "LineSearchOutcome", "accept",
    "directional_derivative", "forward_pass", "line_search",
    "CartPoleModel", "CostModel", "DerivativeBundle", "LinearModel",
    "PendulumModel", "QuadraticCost", "check_derivatives", "make_benchmark",
    "IterationRecord", "SolveResult", "SolverConfig", "converged",
    "hybrid_solve", "initial_multiplier_estimate", "solve",
    "PerturbationPath", "Trajectory", "linear_rollout", "rollout",
    "total_cost",
]
