"""Local model of the problem along a nominal trajectory.

One call collects, per timestep, the dynamics Jacobians and Hessian tensors
together with the cost derivatives, all evaluated on the nominal. Every
backward pass and the dense QP oracle consume this one structure, so they are
guaranteed to linearize the same problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, TrajoptError

__all__ = ["ExpansionSequence", "expand_along"]


@dataclass(frozen=True, eq=False)
class ExpansionSequence:
    fx: np.ndarray    # (T, n, n)
    fu: np.ndarray    # (T, n, m)
    fxx: np.ndarray   # (T, n, n, n)
    fxu: np.ndarray   # (T, n, n, m)
    lx: np.ndarray    # (T, n)   stage cost gradient wrt state
    lxx: np.ndarray   # (T, n, n)
    ru: np.ndarray    # (T, m)   stage cost gradient wrt control (R u_t)
    r: np.ndarray     # (m, m)   constant control weight
    ct_x: np.ndarray  # (n,)     terminal gradient
    ct_xx: np.ndarray  # (n, n)  terminal Hessian
    nominal_cost: float

    @property
    def horizon(self) -> int:
        return self.fx.shape[0]

    @property
    def state_dim(self) -> int:
        return self.fx.shape[1]

    @property
    def control_dim(self) -> int:
        return self.fu.shape[2]


def expand_along(model, cost, traj) -> ExpansionSequence:
    """Evaluate all derivatives along a feasible nominal trajectory."""
    horizon = traj.horizon
    n, m = model.state_dim, model.control_dim
    if traj.states.shape[1] != n or traj.controls.shape[1] != m:
        raise DimensionError("trajectory does not match the model dimensions")

    fx = np.zeros((horizon, n, n))
    fu = np.zeros((horizon, n, m))
    fxx = np.zeros((horizon, n, n, n))
    fxu = np.zeros((horizon, n, n, m))
    lx = np.zeros((horizon, n))
    lxx = np.zeros((horizon, n, n))
    ru = np.zeros((horizon, m))

    for t in range(horizon):
        bundle = model.derivatives(traj.states[t], traj.controls[t])
        fx[t], fu[t] = bundle.fx, bundle.fu
        fxx[t], fxu[t] = bundle.fxx, bundle.fxu
        lx[t], lxx[t], ru[t], r = cost.stage_derivatives(traj.states[t], traj.controls[t])
        if not (np.isfinite(fx[t]).all() and np.isfinite(fu[t]).all()
                and np.isfinite(fxx[t]).all() and np.isfinite(fxu[t]).all()
                and np.isfinite(lx[t]).all() and np.isfinite(lxx[t]).all()
                and np.isfinite(ru[t]).all()):
            raise TrajoptError(f"non-finite derivative at timestep {t}")

    ct_x, ct_xx = cost.terminal_derivatives(traj.states[-1])
    if not (np.isfinite(ct_x).all() and np.isfinite(ct_xx).all()):
        raise TrajoptError(f"non-finite terminal derivative at timestep {horizon}")

    return ExpansionSequence(
        fx=fx, fu=fu, fxx=fxx, fxu=fxu,
        lx=lx, lxx=lxx, ru=ru, r=np.asarray(r, dtype=float),
        ct_x=np.asarray(ct_x, dtype=float), ct_xx=np.asarray(ct_xx, dtype=float),
        nominal_cost=traj.cost)
