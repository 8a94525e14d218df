"""Riccati backward passes: iLQR, Newton-LQR, and DDP.

All three sweeps share one recursion; they differ only in the weight placed
on the dynamics Hessian tensors:

  * iLQR ignores the tensors entirely (first-order dynamics model),
  * Newton-LQR contracts them with a fixed costate sequence carried over
    from the previous iteration, which makes the sweep the exact Newton
    step on the constrained problem,
  * DDP contracts them with its own value gradient as it is computed.

With positive semidefinite state cost Hessians and R positive definite, the
iLQR value Hessians stay positive semidefinite and every Quu is positive
definite, so the iLQR step is always a descent direction. Neither property
survives the Hessian contractions: Newton-LQR and DDP may produce indefinite
Quu, which is recorded rather than repaired (no regularization anywhere).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BackwardPassError

__all__ = [
    "BackwardSolution",
    "backward_ilqr",
    "backward_newton",
    "backward_ddp",
    "multipliers_from",
    "expected_reduction",
    "quu_spectrum",
    "write_gain_profile_csv",
]

PSD_SLACK = 1e-10  # tolerated eigenvalue undershoot from rounding


@dataclass(frozen=True, eq=False)
class BackwardSolution:
    """Value expansion and gains from one backward sweep.

    v:   (T+1, n) value gradients along the nominal.
    V:   (T+1, n, n) symmetric value Hessians.
    k:   (T, m) feedforward gains, control update du = -alpha k - K dx.
    K:   (T, m, n) feedback gains.
    quu: (T, m, m) control curvature R + fu' V_{t+1} fu at each stage.
    method: one of "ilqr", "newton", "ddp".
    """

    v: np.ndarray
    V: np.ndarray
    k: np.ndarray
    K: np.ndarray
    quu: np.ndarray
    method: str

    @property
    def horizon(self) -> int:
        return self.k.shape[0]


def _solve_sym(quu_t, rhs, t):
    """Solve against the (possibly indefinite) symmetric Quu block."""
    if quu_t.shape[0] == 1:
        pivot = quu_t[0, 0]
        if pivot == 0.0 or not np.isfinite(pivot):
            raise BackwardPassError(t, "singular control curvature")
        return rhs / pivot
    try:
        return scipy.linalg.solve(quu_t, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise BackwardPassError(t, f"singular control curvature ({exc})") from exc


def _sweep(exp, method, lam_bar=None):
    horizon, n, m = exp.horizon, exp.state_dim, exp.control_dim
    use_own_gradient = method == "ddp"
    if method == "newton":
        lam_bar = np.asarray(lam_bar, dtype=float)
        if lam_bar.shape != (horizon + 1, n):
            raise ValueError("multiplier sequence must have shape (T+1, n)")

    v = np.zeros((horizon + 1, n))
    big_v = np.zeros((horizon + 1, n, n))
    k = np.zeros((horizon, m))
    feedback = np.zeros((horizon, m, n))
    quu = np.zeros((horizon, m, m))

    v[horizon] = exp.ct_x
    big_v[horizon] = 0.5 * (exp.ct_xx + exp.ct_xx.T)
    r_min = float(np.linalg.eigvalsh(exp.r)[0])

    for t in reversed(range(horizon)):
        fx, fu = exp.fx[t], exp.fu[t]
        vn, big_vn = v[t + 1], big_v[t + 1]

        qu = exp.ru[t] + fu.T @ vn
        qx = exp.lx[t] + fx.T @ vn
        quu_t = exp.r + fu.T @ big_vn @ fu
        qux = fu.T @ big_vn @ fx
        qxx = exp.lxx[t] + fx.T @ big_vn @ fx

        if method != "ilqr":
            weight = vn if use_own_gradient else lam_bar[t + 1]
            qxx = qxx + np.einsum("i,ijk->jk", weight, exp.fxx[t])
            qux = qux + np.einsum("i,ijk->kj", weight, exp.fxu[t])

        quu_t = 0.5 * (quu_t + quu_t.T)
        quu[t] = quu_t

        if method == "ilqr":
            # R > 0 plus PSD value Hessian propagation make these impossible
            # to violate for valid cost models; treat violations as bugs.
            if float(np.linalg.eigvalsh(quu_t)[0]) < r_min - PSD_SLACK:
                raise BackwardPassError(t, "iLQR control curvature lost definiteness")

        sol = _solve_sym(quu_t, np.concatenate([qu[:, None], qux], axis=1), t)
        k[t] = sol[:, 0]
        feedback[t] = sol[:, 1:]

        v[t] = qx - qux.T @ k[t]
        vt = qxx - qux.T @ feedback[t]
        big_v[t] = 0.5 * (vt + vt.T)

        if not (np.isfinite(v[t]).all() and np.isfinite(big_v[t]).all()
                and np.isfinite(k[t]).all() and np.isfinite(feedback[t]).all()):
            raise BackwardPassError(t, "backward recursion produced non-finite values")
        if method == "ilqr":
            if float(np.linalg.eigvalsh(big_v[t])[0]) < -PSD_SLACK:
                raise BackwardPassError(t, "iLQR value Hessian lost semidefiniteness")

    return BackwardSolution(v=v, V=big_v, k=k, K=feedback, quu=quu, method=method)


def backward_ilqr(exp) -> BackwardSolution:
    """First-order-dynamics sweep; always yields a descent direction."""
    return _sweep(exp, "ilqr")


def backward_newton(exp, multipliers) -> BackwardSolution:
    """Exact Newton sweep with a fixed (T+1, n) costate sequence.

    The Hessian tensors are contracted with the supplied costates, which play
    the role of the dynamics-constraint multipliers frozen at the previous
    iterate. With all-zero multipliers the sweep reduces exactly to iLQR.
    """
    return _sweep(exp, "newton", lam_bar=multipliers)


def backward_ddp(exp) -> BackwardSolution:
    """DDP sweep: Hessian tensors weighted by the concurrent value gradient.

    Identical to the Newton sweep with the frozen costates replaced by the
    value gradient computed in the same sweep, which is what the classical
    DDP recursion does. Indefinite Quu blocks are kept (inspect them through
    `quu_spectrum`); only an exactly singular block aborts the sweep.
    """
    return _sweep(exp, "ddp")


def multipliers_from(sol, path=None) -> np.ndarray:
    """Dynamics-constraint multipliers along a perturbation path.

    lam_t = -v_t - V_t dx_t, the sign convention of the stacked QP's equality
    multipliers (so lam_T = -C_x - C_xx dx_T at the terminal stage). With no
    path the multipliers are evaluated on the nominal, lam_t = -v_t.
    """
    if path is None:
        return -sol.v.copy()
    dx = np.asarray(path.dx, dtype=float)
    if dx.shape != sol.v.shape:
        raise ValueError("path horizon does not match the solution")
    return -sol.v - np.einsum("tij,tj->ti", sol.V, dx)


def expected_reduction(sol, exp, alpha) -> float:
    """Quadratic-model cost change for a step with feedforward scaled by alpha.

    Equals -(alpha - alpha^2/2) * sum_t g_t' Quu_t^{-1} g_t with g_t the stage
    control gradient R u_t + fu' v_{t+1}; since k_t = Quu_t^{-1} g_t the sum is
    accumulated as g_t . k_t. Nonpositive whenever every Quu is positive
    definite; an indefinite sweep (Newton/DDP) can make it positive, which is
    reported as-is.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    total = 0.0
    for t in range(sol.horizon):
        g = exp.ru[t] + exp.fu[t].T @ sol.v[t + 1]
        total += float(g @ sol.k[t])
    return -(alpha - 0.5 * alpha * alpha) * total


def quu_spectrum(sol) -> np.ndarray:
    """Minimum eigenvalue of each stage's control curvature block."""
    horizon = sol.horizon
    out = np.zeros(horizon)
    for t in range(horizon):
        out[t] = np.linalg.eigvalsh(sol.quu[t])[0]
    return out


def write_gain_profile_csv(path, sol):
    """Per-stage curvature and gain magnitudes: t, min eig Quu, |k|, ||K||_F."""
    spectrum = quu_spectrum(sol)
    lines = ["t,min_eig_quu,k_norm,K_norm"]
    for t in range(sol.horizon):
        lines.append(",".join([
            str(t),
            f"{spectrum[t]:.17g}",
            f"{np.linalg.norm(sol.k[t]):.17g}",
            f"{np.linalg.norm(sol.K[t]):.17g}",
        ]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
