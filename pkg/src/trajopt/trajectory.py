"""Trajectory container, nonlinear rollout, and linearized rollout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DivergenceError

__all__ = [
    "Trajectory",
    "PerturbationPath",
    "STATE_MAGNITUDE_LIMIT",
    "total_cost",
    "rollout",
    "linear_rollout",
    "check_feasible",
    "write_trajectory_csv",
]

# Rollouts abort once any state component passes this magnitude. Without a
# guard, an over-long step on an unstable system overflows to inf and poisons
# every cost comparison downstream; the line search instead sees a rejection
# and shrinks the step.
STATE_MAGNITUDE_LIMIT = 1e8


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States x_0..x_T, controls u_0..u_{T-1}, and their total cost."""

    states: np.ndarray   # (T+1, n)
    controls: np.ndarray  # (T, m)
    cost: float

    @property
    def horizon(self) -> int:
        return self.controls.shape[0]


@dataclass(frozen=True, eq=False)
class PerturbationPath:
    """State/control deviations from a nominal, dx_0 = 0 by construction."""

    dx: np.ndarray  # (T+1, n)
    du: np.ndarray  # (T, m)


def total_cost(cost, states, controls) -> float:
    """Sum of stage costs plus the terminal cost.

    Accumulates left to right in plain float arithmetic so repeated calls on
    the same data are bit-identical.
    """
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    if states.shape[0] != controls.shape[0] + 1:
        raise DimensionError("need exactly one more state than controls")
    j = 0.0
    for t in range(controls.shape[0]):
        j += cost.stage_cost(states[t], controls[t])
    return j + cost.terminal_cost(states[-1])


def rollout(model, cost, x0, controls) -> Trajectory:
    """Roll the controls through the nonlinear dynamics and price the result.

    Raises DivergenceError naming the offending timestep if any state goes
    non-finite or beyond STATE_MAGNITUDE_LIMIT.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u_seq = np.atleast_2d(np.asarray(controls, dtype=float))
    if u_seq.shape[0] == 1 and u_seq.shape[1] != model.control_dim:
        u_seq = u_seq.T
    horizon = u_seq.shape[0]
    if horizon < 1:
        raise DimensionError("need at least one control")
    if u_seq.shape[1] != model.control_dim:
        raise DimensionError("control width does not match the model")

    states = np.zeros((horizon + 1, model.state_dim))
    states[0] = x0
    for t in range(horizon):
        nxt = model.step(states[t], u_seq[t])
        if not np.isfinite(nxt).all() or np.max(np.abs(nxt)) > STATE_MAGNITUDE_LIMIT:
            raise DivergenceError(t + 1)
        states[t + 1] = nxt
    return Trajectory(states, u_seq, total_cost(cost, states, u_seq))


def linear_rollout(exp, sol, alpha) -> PerturbationPath:
    """Propagate the gains through the linearized dynamics.

    du_t = -alpha k_t - K_t dx_t with dx_0 = 0; only the feedforward term is
    scaled by alpha, the feedback stays at full strength. At alpha = 1 this
    path is the exact minimizer of the quadratic subproblem the gains came
    from (certified by the dense KKT oracle).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    horizon = sol.k.shape[0]
    if exp.fx.shape[0] != horizon:
        raise DimensionError("gain horizon does not match the expansion")
    n, m = exp.fx.shape[1], exp.fu.shape[2]
    dx = np.zeros((horizon + 1, n))
    du = np.zeros((horizon, m))
    for t in range(horizon):
        du[t] = -alpha * sol.k[t] - sol.K[t] @ dx[t]
        dx[t + 1] = exp.fx[t] @ dx[t] + exp.fu[t] @ du[t]
    return PerturbationPath(dx, du)


def check_feasible(model, traj, tol=1e-12) -> bool:
    """True if every transition satisfies the dynamics to within tol."""
    for t in range(traj.horizon):
        err = np.max(np.abs(traj.states[t + 1] - model.step(traj.states[t], traj.controls[t])))
        if err > tol:
            return False
    return True


def write_trajectory_csv(path, traj, cost):
    """One row per timestep: t, state, control, stage cost.

    The final row holds the terminal state with empty control cells and the
    terminal cost in the cost column.
    """
    n = traj.states.shape[1]
    m = traj.controls.shape[1]
    header = (["t"] + [f"x{i}" for i in range(n)]
              + [f"u{i}" for i in range(m)] + ["stage_cost"])
    lines = [",".join(header)]
    for t in range(traj.horizon):
        cells = [str(t)]
        cells += [f"{v:.17g}" for v in traj.states[t]]
        cells += [f"{v:.17g}" for v in traj.controls[t]]
        cells.append(f"{cost.stage_cost(traj.states[t], traj.controls[t]):.17g}")
        lines.append(",".join(cells))
    cells = [str(traj.horizon)]
    cells += [f"{v:.17g}" for v in traj.states[-1]]
    cells += ["" for _ in range(m)]
    cells.append(f"{cost.terminal_cost(traj.states[-1]):.17g}")
    lines.append(",".join(cells))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
