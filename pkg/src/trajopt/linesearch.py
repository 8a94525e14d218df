"""Forward pass on the nonlinear system with backtracking step acceptance.

A candidate step is accepted when the realized cost change is at least a
sigma-fraction of its first-order prediction:

    (J_new - J_old) / (alpha * d'grad) > sigma,

where d is the full-step direction from the linearized rollout and grad the
exact cost gradient. The denominator is negative for a descent direction, so
acceptance implies a strict cost decrease. If the direction fails to predict
descent at all (possible for the Newton and DDP sweeps), shrinking alpha
cannot fix the sign and the search refuses to run instead of backtracking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, NonDescentError
from .trajectory import (STATE_MAGNITUDE_LIMIT, Trajectory, linear_rollout,
                         total_cost)

__all__ = [
    "LineSearchConfig",
    "LineSearchOutcome",
    "forward_pass",
    "accept",
    "directional_derivative",
    "line_search",
]


@dataclass(frozen=True)
class LineSearchConfig:
    sigma: float = 0.1       # acceptance threshold on the realized/predicted ratio
    rho: float = 0.5         # backtracking factor
    alpha_min: float = 1e-8  # smallest step tried before giving up
    alpha_init: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must be in (0, 1)")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must be in (0, 1)")
        if not 0.0 < self.alpha_min < self.alpha_init <= 1.0:
            raise ValueError("need 0 < alpha_min < alpha_init <= 1")


@dataclass(frozen=True, eq=False)
class LineSearchOutcome:
    trajectory: Trajectory
    alpha: float
    trials: int
    status: str  # "ACCEPTED" or "FLOOR_HIT"
    trial_log: tuple = field(default_factory=tuple)  # (alpha, cost, ratio) rows


def forward_pass(model, cost, nominal, sol, alpha) -> Trajectory:
    """Apply the gains to the nonlinear system along the nominal.

    u_t = ubar_t - alpha k_t - K_t (x_t - xbar_t), rolled through the true
    dynamics from the nominal's initial state. Raises DivergenceError if the
    closed-loop rollout blows up, which callers treat as a rejected step.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    horizon = nominal.horizon
    if sol.horizon != horizon:
        raise ValueError("gain horizon does not match the nominal")

    states = np.zeros_like(nominal.states)
    controls = np.zeros_like(nominal.controls)
    states[0] = nominal.states[0]
    for t in range(horizon):
        controls[t] = (nominal.controls[t] - alpha * sol.k[t]
                       - sol.K[t] @ (states[t] - nominal.states[t]))
        nxt = model.step(states[t], controls[t])
        if not np.isfinite(nxt).all() or np.max(np.abs(nxt)) > STATE_MAGNITUDE_LIMIT:
            raise DivergenceError(t + 1)
        states[t + 1] = nxt
    return Trajectory(states, controls, total_cost(cost, states, controls))


def accept(j_old, j_new, alpha, linear_pred, sigma) -> bool:
    """Ratio acceptance test against the first-order prediction."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if linear_pred >= 0.0:
        raise NonDescentError(
            f"first-order prediction {linear_pred:.3e} is not a descent slope")
    return (j_new - j_old) / (alpha * linear_pred) > sigma


def directional_derivative(exp, sol, grad) -> float:
    """d'grad for the full step d = du from the alpha = 1 linearized rollout."""
    path = linear_rollout(exp, sol, 1.0)
    return float(np.sum(path.du * grad))


def line_search(model, cost, nominal, exp, sol, grad, config) -> LineSearchOutcome:
    """Backtrack on alpha until the ratio test accepts or the floor is hit.

    Raises NonDescentError if the direction predicts no decrease to begin
    with. A FLOOR_HIT outcome returns the nominal unchanged.
    """
    linear_pred = directional_derivative(exp, sol, grad)
    if linear_pred >= 0.0:
        raise NonDescentError(
            f"direction predicts {linear_pred:.3e}; refusing to backtrack")

    log = []
    trials = 0
    alpha = config.alpha_init
    while alpha >= config.alpha_min:
        trials += 1
        try:
            candidate = forward_pass(model, cost, nominal, sol, alpha)
        except DivergenceError:
            log.append((alpha, float("inf"), float("nan")))
            alpha *= config.rho
            continue
        ratio = (candidate.cost - nominal.cost) / (alpha * linear_pred)
        log.append((alpha, candidate.cost, ratio))
        if ratio > config.sigma:
            return LineSearchOutcome(candidate, alpha, trials, "ACCEPTED", tuple(log))
        alpha *= config.rho
    return LineSearchOutcome(nominal, 0.0, trials, "FLOOR_HIT", tuple(log))
