"""Outer loop: expand, sweep backward, line-search, repeat.

The loop is the same for every method; only the backward sweep changes. The
Newton sweep threads a costate sequence across iterations: it is seeded from
an iLQR sweep on the first nominal and afterwards re-evaluated on each
accepted path as v_t + V_t dx_t, so that near a solution the frozen costates
agree with the sweep's own value gradients and the step becomes the exact
Newton step.

The hybrid method runs DDP until its accepted steps cool below a threshold
for a configurable number of consecutive iterations (or the direction stops
predicting descent), then switches permanently to iLQR from the current
trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backward import backward_ddp, backward_ilqr, backward_newton, expected_reduction, quu_spectrum
from .errors import NonDescentError
from .expansion import expand_along
from .kkt import cost_gradient_adjoint
from .linesearch import LineSearchConfig, directional_derivative, line_search
from .trajectory import rollout

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "SolveResult",
    "converged",
    "solve",
    "hybrid_solve",
    "initial_multiplier_estimate",
    "write_iterations_csv",
    "write_trials_csv",
    "summary_dict",
]

METHODS = ("ilqr", "newton", "ddp", "hybrid")


@dataclass(frozen=True)
class SolverConfig:
    method: str = "ilqr"
    max_iters: int = 200
    grad_tol: float = 1e-4   # inf-norm of the cost gradient
    step_tol: float = 1e-9   # |realized cost change|
    linesearch: LineSearchConfig = field(default_factory=LineSearchConfig)
    hybrid_alpha_switch: float = 1e-2
    hybrid_patience: int = 2

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method '{self.method}'")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.grad_tol <= 0 or self.step_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.hybrid_patience < 1:
            raise ValueError("hybrid_patience must be positive")


@dataclass(frozen=True)
class IterationRecord:
    index: int
    cost: float          # nominal cost at the start of the iteration
    dj_pred: float       # quadratic-model prediction at alpha = 1
    dj_realized: float   # realized change after the accepted step
    alpha: float         # accepted step, 0 when no step was taken
    min_quu: float       # min over stages of the smallest Quu eigenvalue
    grad_norm: float     # inf-norm of the exact cost gradient at the nominal
    linear_pred: float   # d'grad of the full step direction
    method_active: str
    status: str          # "OK", "NON_DESCENT", or "FLOOR_HIT"


@dataclass(frozen=True, eq=False)
class SolveResult:
    trajectory: object
    records: tuple
    converged: bool
    reason: str
    multipliers: np.ndarray | None = None  # threaded costates (Newton only)
    trial_logs: tuple = ()  # (iteration, ((alpha, J_candidate, ratio), ...)) rows

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def accepted_iterations(self) -> int:
        return sum(1 for r in self.records if r.status == "OK" and r.alpha > 0)

    @property
    def final_cost(self) -> float:
        return self.trajectory.cost


def converged(record, config) -> bool:
    """Closed-threshold convergence test on one iteration record."""
    if record.status != "OK":
        return False
    return (record.grad_norm <= config.grad_tol
            or abs(record.dj_realized) <= config.step_tol)


def initial_multiplier_estimate(exp) -> np.ndarray:
    """Costate seed for the first Newton sweep: value gradients of an iLQR
    sweep on the same expansion, the stacked subproblem's multiplier estimate
    at zero deviation."""
    return backward_ilqr(exp).v.copy()


def _backward_for(method, exp, lam_bar):
    if method == "ilqr":
        return backward_ilqr(exp), lam_bar
    if method == "ddp":
        return backward_ddp(exp), lam_bar
    if lam_bar is None:
        lam_bar = initial_multiplier_estimate(exp)
    return backward_newton(exp, lam_bar), lam_bar


def solve(model, cost, x0, init_controls, config):
    """Iterate one method to convergence, a terminal failure, or max_iters."""
    if config.method == "hybrid":
        return hybrid_solve(model, cost, x0, init_controls, config)
    return _run(model, cost, x0, init_controls, config, hybrid=False)


def hybrid_solve(model, cost, x0, init_controls, config):
    """DDP until its accepted steps cool, then iLQR from where it stopped."""
    if config.method != "hybrid":
        raise ValueError("hybrid_solve requires config.method == 'hybrid'")
    return _run(model, cost, x0, init_controls, config, hybrid=True)


def _run(model, cost, x0, init_controls, config, hybrid):
    traj = rollout(model, cost, x0, init_controls)
    records = []
    trial_logs = []
    lam_bar = None
    active = "ddp" if hybrid else config.method
    # Seed the cooling streak as if alpha_init had already been accepted
    # `patience` times: a switch threshold above alpha_init can then never be
    # outrun, and the run degenerates to pure iLQR from the first iteration.
    streak = 0
    if hybrid and config.linesearch.alpha_init < config.hybrid_alpha_switch:
        streak = config.hybrid_patience

    is_converged = False
    reason = "max_iters"

    for index in range(config.max_iters):
        if hybrid and active == "ddp" and streak >= config.hybrid_patience:
            active = "ilqr"

        exp = expand_along(model, cost, traj)
        grad = cost_gradient_adjoint(exp)
        grad_norm = float(np.max(np.abs(grad)))
        sol, lam_bar = _backward_for(active, exp, lam_bar)
        dj_pred = expected_reduction(sol, exp, 1.0)
        min_quu = float(quu_spectrum(sol).min())

        if grad_norm <= config.grad_tol:
            records.append(IterationRecord(
                index, traj.cost, dj_pred, 0.0, 0.0, min_quu, grad_norm,
                0.0, active, "OK"))
            is_converged, reason = True, "gradient"
            break

        linear_pred = directional_derivative(exp, sol, grad)
        try:
            outcome = line_search(model, cost, traj, exp, sol, grad,
                                  config.linesearch)
        except NonDescentError:
            if active == "ilqr":
                # The cost-only sweep provably yields a descent direction;
                # reaching this line means a bug, not a method failure.
                raise
            records.append(IterationRecord(
                index, traj.cost, dj_pred, 0.0, 0.0, min_quu, grad_norm,
                linear_pred, active, "NON_DESCENT"))
            if hybrid and active == "ddp":
                active = "ilqr"
                streak = config.hybrid_patience
                continue
            reason = "non_descent"
            break

        trial_logs.append((index, outcome.trial_log))
        if outcome.status == "FLOOR_HIT":
            records.append(IterationRecord(
                index, traj.cost, dj_pred, 0.0, 0.0, min_quu, grad_norm,
                linear_pred, active, "FLOOR_HIT"))
            if hybrid and active == "ddp":
                active = "ilqr"
                streak = config.hybrid_patience
                continue
            reason = "floor_hit"
            break

        dj_realized = outcome.trajectory.cost - traj.cost
        records.append(IterationRecord(
            index, traj.cost, dj_pred, dj_realized, outcome.alpha, min_quu,
            grad_norm, linear_pred, active, "OK"))

        previous = traj
        traj = outcome.trajectory
        if active == "newton":
            dx = traj.states - previous.states
            lam_bar = sol.v + np.einsum("tij,tj->ti", sol.V, dx)
        if hybrid and active == "ddp":
            streak = streak + 1 if outcome.alpha < config.hybrid_alpha_switch else 0

        if abs(dj_realized) <= config.step_tol:
            is_converged, reason = True, "step"
            break

    return SolveResult(
        trajectory=traj, records=tuple(records), converged=is_converged,
        reason=reason, multipliers=lam_bar, trial_logs=tuple(trial_logs))


def write_iterations_csv(path, records):
    header = ("index,J,dJ_pred,dJ_realized,alpha,min_quu,grad_norm,"
              "linear_pred,method,status")
    lines = [header]
    for r in records:
        lines.append(",".join([
            str(r.index),
            f"{r.cost:.17g}",
            f"{r.dj_pred:.17g}",
            f"{r.dj_realized:.17g}",
            f"{r.alpha:.17g}",
            f"{r.min_quu:.17g}",
            f"{r.grad_norm:.17g}",
            f"{r.linear_pred:.17g}",
            r.method_active,
            r.status,
        ]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trials_csv(path, logs):
    lines = ["iteration,trial,alpha,J_candidate,ratio"]
    for iteration, rows in logs:
        for trial, (alpha, cost_val, ratio) in enumerate(rows):
            lines.append(",".join([
                str(iteration), str(trial),
                f"{alpha:.17g}", f"{cost_val:.17g}", f"{ratio:.17g}",
            ]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def summary_dict(result, method, wall_time):
    return {
        "method": method,
        "converged": bool(result.converged),
        "reason": result.reason,
        "iterations": result.iterations,
        "final_cost": result.final_cost,
        "wall_time": wall_time,
    }
