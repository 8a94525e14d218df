"""Control-affine benchmark systems and quadratic costs with analytic derivatives.

The discrete dynamics are an explicit Euler step of the continuous equations
of motion. Euler is used deliberately: it keeps the discrete map exactly
affine in the control whenever the continuous dynamics are, which is the
structural assumption every solver in this package relies on (all second
derivatives with respect to the control vanish). Higher-order integrators
would re-introduce control nonlinearity through the stage compositions.

Every model provides analytic first derivatives (Jacobians) and second
derivative tensors of the discrete map, plus a finite-difference verifier
(`check_derivatives`) that certifies them against central differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

__all__ = [
    "DerivativeBundle",
    "SystemModel",
    "PendulumModel",
    "CartPoleModel",
    "LinearModel",
    "CostModel",
    "QuadraticCost",
    "DerivativeCheck",
    "DerivativeCheckReport",
    "check_derivatives",
    "make_benchmark",
    "PENDULUM_DEFAULTS",
    "CARTPOLE_DEFAULTS",
]


@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    """First and second derivatives of the discrete map at one point.

    fx:  (n, n) Jacobian wrt state.
    fu:  (n, m) Jacobian wrt control.
    fxx: (n, n, n) tensor, fxx[i] = d^2 f_i / dx dx (symmetric in the last two axes).
    fxu: (n, n, m) tensor, fxu[i] = d^2 f_i / dx du.

    The control-control block is identically zero for control-affine maps and
    is therefore not stored.
    """

    fx: np.ndarray
    fu: np.ndarray
    fxx: np.ndarray
    fxu: np.ndarray


class SystemModel:
    """Base class for discrete-time dynamics x' = f(x, u), affine in u."""

    state_dim: int = 0
    control_dim: int = 0
    dt: float = 0.0

    # sampling box used by the finite-difference verifier and seeded sweeps
    state_low: np.ndarray
    state_high: np.ndarray
    control_low: np.ndarray
    control_high: np.ndarray

    @property
    def params(self) -> dict:
        return {}

    def _validate(self, x, u):
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        if x.shape != (self.state_dim,):
            raise DimensionError(
                f"state has shape {x.shape}, expected ({self.state_dim},)")
        if u.shape != (self.control_dim,):
            raise DimensionError(
                f"control has shape {u.shape}, expected ({self.control_dim},)")
        if not (np.isfinite(x).all() and np.isfinite(u).all()):
            raise DimensionError("non-finite state or control input")
        return x, u

    def step(self, x, u) -> np.ndarray:
        """One discrete dynamics step."""
        x, u = self._validate(x, u)
        return self._step(x, u)

    def derivatives(self, x, u) -> DerivativeBundle:
        """Analytic derivatives of the discrete map at (x, u)."""
        x, u = self._validate(x, u)
        return self._derivatives(x, u)

    def _step(self, x, u):
        raise NotImplementedError

    def _derivatives(self, x, u):
        raise NotImplementedError


class PendulumModel(SystemModel):
    """Torque-driven pendulum, state [theta, theta_dot].

    theta = 0 hangs down, theta = pi is upright. The continuous dynamics are

        theta_ddot = -(g/l) sin(theta) - b/(m l^2) theta_dot + u/(m l^2)

    discretized with an explicit Euler step of length dt.
    """

    state_dim = 2
    control_dim = 1

    def __init__(self, mass=1.0, length=1.0, gravity=9.81, damping=0.1, dt=0.05):
        if dt <= 0:
            raise ValueError("timestep must be positive")
        self.mass = float(mass)
        self.length = float(length)
        self.gravity = float(gravity)
        self.damping = float(damping)
        self.dt = float(dt)
        self.state_low = np.array([-2 * np.pi, -8.0])
        self.state_high = np.array([2 * np.pi, 8.0])
        self.control_low = np.array([-5.0])
        self.control_high = np.array([5.0])

    @property
    def params(self):
        return {
            "mass": self.mass,
            "length": self.length,
            "gravity": self.gravity,
            "damping": self.damping,
            "dt": self.dt,
        }

    def _step(self, x, u):
        th, w = x
        ml2 = self.mass * self.length ** 2
        acc = (-(self.gravity / self.length) * np.sin(th)
               - self.damping / ml2 * w + u[0] / ml2)
        return np.array([th + self.dt * w, w + self.dt * acc])

    def _derivatives(self, x, u):
        th = x[0]
        dt = self.dt
        ml2 = self.mass * self.length ** 2
        gl = self.gravity / self.length

        fx = np.array([
            [1.0, dt],
            [-dt * gl * np.cos(th), 1.0 - dt * self.damping / ml2],
        ])
        fu = np.array([[0.0], [dt / ml2]])
        fxx = np.zeros((2, 2, 2))
        fxx[1, 0, 0] = dt * gl * np.sin(th)
        fxu = np.zeros((2, 2, 1))
        return DerivativeBundle(fx, fu, fxx, fxu)


class CartPoleModel(SystemModel):
    """Cart-pole, state [p, p_dot, theta, theta_dot], force on the cart.

    The pole is a point mass at distance `pole_com` from the pivot; theta = 0
    hangs down and theta = pi balances upright. With s = sin(theta),
    c = cos(theta) and D = M + m s^2:

        p_ddot     = (F + m s (L w^2 + g c)) / D
        theta_ddot = (-F c - m L w^2 s c - (M + m) g s) / (L D)

    These are control-affine (F enters linearly, D is control-free), so the
    Euler map keeps all control-control second derivatives at zero.
    """

    state_dim = 4
    control_dim = 1

    def __init__(self, cart_mass=1.0, pole_mass=0.1, pole_com=0.5,
                 gravity=9.81, dt=0.02):
        if dt <= 0:
            raise ValueError("timestep must be positive")
        self.cart_mass = float(cart_mass)
        self.pole_mass = float(pole_mass)
        self.pole_com = float(pole_com)
        self.gravity = float(gravity)
        self.dt = float(dt)
        self.state_low = np.array([-2.0, -3.0, -2 * np.pi, -6.0])
        self.state_high = np.array([2.0, 3.0, 2 * np.pi, 6.0])
        self.control_low = np.array([-10.0])
        self.control_high = np.array([10.0])

    @property
    def params(self):
        return {
            "cart_mass": self.cart_mass,
            "pole_mass": self.pole_mass,
            "pole_com": self.pole_com,
            "gravity": self.gravity,
            "dt": self.dt,
        }

    def _accel(self, th, w, force):
        M, m = self.cart_mass, self.pole_mass
        L, g = self.pole_com, self.gravity
        s, c = np.sin(th), np.cos(th)
        den = M + m * s * s
        a_cart = (force + m * s * (L * w * w + g * c)) / den
        a_pole = (-force * c - m * L * w * w * s * c - (M + m) * g * s) / (L * den)
        return a_cart, a_pole

    def _step(self, x, u):
        p, v, th, w = x
        a_cart, a_pole = self._accel(th, w, u[0])
        dt = self.dt
        return np.array([p + dt * v, v + dt * a_cart, th + dt * w, w + dt * a_pole])

    def _derivatives(self, x, u):
        M, m = self.cart_mass, self.pole_mass
        L, g = self.pole_com, self.gravity
        th, w = x[2], x[3]
        force = u[0]
        dt = self.dt

        s, c = np.sin(th), np.cos(th)
        s2 = 2.0 * s * c          # sin(2 theta)
        c2 = c * c - s * s        # cos(2 theta)
        den = M + m * s * s
        dden = m * s2             # d den / d theta
        ddden = 2.0 * m * c2      # d^2 den / d theta^2

        # cart acceleration a1 = n1 / den
        n1 = force + m * L * w * w * s + m * g * s * c
        n1_t = m * L * w * w * c + m * g * c2
        n1_w = 2.0 * m * L * w * s
        n1_tt = -m * L * w * w * s - 2.0 * m * g * s2
        n1_tw = 2.0 * m * L * w * c
        n1_ww = 2.0 * m * L * s
        a1 = n1 / den
        a1_t = (n1_t - a1 * dden) / den
        a1_w = n1_w / den
        a1_f = 1.0 / den
        a1_tt = (n1_tt - 2.0 * a1_t * dden - a1 * ddden) / den
        a1_tw = (n1_tw - a1_w * dden) / den
        a1_ww = n1_ww / den
        a1_tf = -dden / (den * den)

        # pole acceleration a2 = n2 / (L den)
        n2 = -force * c - m * L * w * w * s * c - (M + m) * g * s
        n2_t = force * s - m * L * w * w * c2 - (M + m) * g * c
        n2_w = -m * L * w * s2
        n2_tt = force * c + 2.0 * m * L * w * w * s2 + (M + m) * g * s
        n2_tw = -2.0 * m * L * w * c2
        n2_ww = -m * L * s2
        a2 = n2 / (L * den)
        a2_t = (n2_t / L - a2 * dden) / den
        a2_w = n2_w / (L * den)
        a2_f = -c / (L * den)
        a2_tt = (n2_tt / L - 2.0 * a2_t * dden - a2 * ddden) / den
        a2_tw = (n2_tw / L - a2_w * dden) / den
        a2_ww = n2_ww / (L * den)
        a2_tf = (s + c * dden / den) / (L * den)

        fx = np.eye(4)
        fx[0, 1] += dt
        fx[1, 2] += dt * a1_t
        fx[1, 3] += dt * a1_w
        fx[2, 3] += dt
        fx[3, 2] += dt * a2_t
        fx[3, 3] += dt * a2_w

        fu = np.array([[0.0], [dt * a1_f], [0.0], [dt * a2_f]])

        fxx = np.zeros((4, 4, 4))
        fxx[1, 2, 2] = dt * a1_tt
        fxx[1, 2, 3] = fxx[1, 3, 2] = dt * a1_tw
        fxx[1, 3, 3] = dt * a1_ww
        fxx[3, 2, 2] = dt * a2_tt
        fxx[3, 2, 3] = fxx[3, 3, 2] = dt * a2_tw
        fxx[3, 3, 3] = dt * a2_ww

        fxu = np.zeros((4, 4, 1))
        fxu[1, 2, 0] = dt * a1_tf
        fxu[3, 2, 0] = dt * a2_tf
        return DerivativeBundle(fx, fu, fxx, fxu)


class LinearModel(SystemModel):
    """Exactly linear dynamics x' = A x + B u, used for golden-case tests."""

    def __init__(self, a, b, dt=1.0):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError("A must be square")
        if b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise DimensionError("B must be (n, m)")
        self.a = a
        self.b = b
        self.state_dim = a.shape[0]
        self.control_dim = b.shape[1]
        self.dt = float(dt)
        self.state_low = -np.ones(self.state_dim)
        self.state_high = np.ones(self.state_dim)
        self.control_low = -np.ones(self.control_dim)
        self.control_high = np.ones(self.control_dim)

    @property
    def params(self):
        return {"a": self.a.tolist(), "b": self.b.tolist(), "dt": self.dt}

    def _step(self, x, u):
        return self.a @ x + self.b @ u

    def _derivatives(self, x, u):
        n, m = self.state_dim, self.control_dim
        return DerivativeBundle(
            self.a.copy(), self.b.copy(),
            np.zeros((n, n, n)), np.zeros((n, n, m)))


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------

class CostModel:
    """Separable cost: stage l(x) + 0.5 u'Ru, terminal C(x).

    Subclasses provide the state-dependent pieces and their derivatives. The
    control weight R must be symmetric positive definite so control updates
    are always well posed; the state Hessians must stay positive semidefinite
    wherever they are evaluated.
    """

    control_weight: np.ndarray

    def state_cost(self, x) -> float:
        raise NotImplementedError

    def terminal_cost(self, x) -> float:
        raise NotImplementedError

    def state_grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def state_hess(self, x) -> np.ndarray:
        raise NotImplementedError

    def terminal_grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def terminal_hess(self, x) -> np.ndarray:
        raise NotImplementedError

    def stage_cost(self, x, u) -> float:
        u = np.asarray(u, dtype=float).reshape(-1)
        return self.state_cost(x) + 0.5 * float(u @ self.control_weight @ u)

    def stage_derivatives(self, x, u):
        """Return (l_x, l_xx, R u, R) at the point (x, u)."""
        u = np.asarray(u, dtype=float).reshape(-1)
        return (self.state_grad(x), self.state_hess(x),
                self.control_weight @ u, self.control_weight)

    def terminal_derivatives(self, x):
        """Return (C_x, C_xx) at the terminal state x."""
        return self.terminal_grad(x), self.terminal_hess(x)


class QuadraticCost(CostModel):
    """0.5 (x-goal)'Q(x-goal) + 0.5 u'Ru per stage, Qt-weighted terminal.

    Purely quadratic with no state-control coupling, so the total cost of any
    trajectory is bounded below by zero: the physically attainable minimum.
    """

    def __init__(self, q, r, q_terminal, goal):
        q = np.asarray(q, dtype=float)
        r = np.asarray(r, dtype=float)
        qt = np.asarray(q_terminal, dtype=float)
        goal = np.asarray(goal, dtype=float).reshape(-1)
        n = goal.shape[0]
        if q.shape != (n, n) or qt.shape != (n, n):
            raise DimensionError("Q and Q_terminal must be (n, n)")
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise DimensionError("R must be square")
        for name, mat in (("Q", q), ("R", r), ("Q_terminal", qt)):
            if not np.allclose(mat, mat.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(r)[0] <= 0:
            raise ValueError("R must be positive definite")
        if np.linalg.eigvalsh(q)[0] < -1e-12 or np.linalg.eigvalsh(qt)[0] < -1e-12:
            raise ValueError("Q and Q_terminal must be positive semidefinite")
        self.q = q
        self.control_weight = r
        self.q_terminal = qt
        self.goal = goal

    def state_cost(self, x):
        e = np.asarray(x, dtype=float).reshape(-1) - self.goal
        return 0.5 * float(e @ self.q @ e)

    def terminal_cost(self, x):
        e = np.asarray(x, dtype=float).reshape(-1) - self.goal
        return 0.5 * float(e @ self.q_terminal @ e)

    def state_grad(self, x):
        return self.q @ (np.asarray(x, dtype=float).reshape(-1) - self.goal)

    def state_hess(self, x):
        return self.q.copy()

    def terminal_grad(self, x):
        return self.q_terminal @ (np.asarray(x, dtype=float).reshape(-1) - self.goal)

    def terminal_hess(self, x):
        return self.q_terminal.copy()


# ---------------------------------------------------------------------------
# Benchmark defaults
# ---------------------------------------------------------------------------

PENDULUM_DEFAULTS = {
    "horizon": 100,
    "timestep": 0.05,
    "q_diag": (1.0, 0.1),
    "r_scale": 0.1,
    "qt_scale": 100.0,
    "x0": (0.0, 0.0),
    "goal": (np.pi, 0.0),
}

CARTPOLE_DEFAULTS = {
    "horizon": 200,
    "timestep": 0.02,
    "q_diag": (2.0, 0.5, 10.0, 0.5),
    "r_scale": 0.1,
    "qt_scale": 100.0,
    "x0": (0.0, 0.0, 0.0, 0.0),
    "goal": (0.0, 0.0, np.pi, 0.0),
}


def make_benchmark(system, horizon=None, timestep=None, q_diag=None,
                   r_scale=None, qt_scale=None, x0=None, goal=None):
    """Build (model, cost, x0, horizon) for a named benchmark.

    Any keyword left as None falls back to the benchmark defaults above.
    """
    if system == "pendulum":
        defaults = PENDULUM_DEFAULTS
    elif system == "cartpole":
        defaults = CARTPOLE_DEFAULTS
    else:
        raise ValueError(f"unknown system '{system}'")

    horizon = int(defaults["horizon"] if horizon is None else horizon)
    timestep = float(defaults["timestep"] if timestep is None else timestep)
    q_diag = np.asarray(defaults["q_diag"] if q_diag is None else q_diag, float)
    r_scale = float(defaults["r_scale"] if r_scale is None else r_scale)
    qt_scale = float(defaults["qt_scale"] if qt_scale is None else qt_scale)
    x0 = np.asarray(defaults["x0"] if x0 is None else x0, float)
    goal = np.asarray(defaults["goal"] if goal is None else goal, float)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")

    if system == "pendulum":
        model = PendulumModel(dt=timestep)
    else:
        model = CartPoleModel(dt=timestep)
    if q_diag.shape != (model.state_dim,):
        raise DimensionError("q_diag length must match the state dimension")
    if x0.shape != (model.state_dim,) or goal.shape != (model.state_dim,):
        raise DimensionError("x0 and goal length must match the state dimension")

    q = np.diag(q_diag)
    r = r_scale * np.eye(model.control_dim)
    cost = QuadraticCost(q, r, qt_scale * q, goal)
    return model, cost, x0, horizon


# ---------------------------------------------------------------------------
# Finite-difference verification
# ---------------------------------------------------------------------------

FD_STEP = 1e-5  # scaled per coordinate by (1 + |value|)


def _fd_jacobian(fn, z, out_dim):
    """Central-difference Jacobian of fn: R^k -> R^out_dim."""
    z = np.asarray(z, dtype=float)
    jac = np.zeros((out_dim, z.size))
    for j in range(z.size):
        h = FD_STEP * (1.0 + abs(z[j]))
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        jac[:, j] = (np.asarray(fn(zp)) - np.asarray(fn(zm))).reshape(-1) / (2 * h)
    return jac


@dataclass(frozen=True)
class DerivativeCheck:
    name: str
    max_rel_err: float
    worst_sample: int
    ok: bool


@dataclass(frozen=True)
class DerivativeCheckReport:
    tol: float
    sample_count: int
    checks: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.ok]

    def summary(self) -> str:
        lines = [f"derivative check: {self.sample_count} samples, tol {self.tol:g}"]
        for c in self.checks:
            status = "ok" if c.ok else f"FAIL (sample {c.worst_sample})"
            lines.append(f"  {c.name:12s} max rel err {c.max_rel_err:.3e}  {status}")
        return "\n".join(lines)


def _rel_err(approx, exact):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return float(np.max(np.abs(approx - exact) / (1.0 + np.abs(exact))))


def check_derivatives(model, cost, sample_count=100, tol=1e-5, seed=0):
    """Certify analytic derivatives against central finite differences.

    First derivatives are differenced from the values; second derivatives are
    differenced from the analytic first derivatives (a step of 1e-5 on a
    nested difference of values would drown in rounding error). Each named
    derivative gets the maximum relative error over all seeded samples drawn
    from the model's sampling box.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    n, m = model.state_dim, model.control_dim
    worst = {}

    def record(name, err, idx):
        if name not in worst or err > worst[name][0]:
            worst[name] = (err, idx)

    for idx in range(sample_count):
        x = rng.uniform(model.state_low, model.state_high)
        u = rng.uniform(model.control_low, model.control_high)
        bundle = model.derivatives(x, u)

        fd_fx = _fd_jacobian(lambda z: model.step(z, u), x, n)
        fd_fu = _fd_jacobian(lambda z: model.step(x, z), u, n)
        record("fx", _rel_err(fd_fx, bundle.fx), idx)
        record("fu", _rel_err(fd_fu, bundle.fu), idx)

        # d(fx)/dx_k -> fxx[:, :, k], d(fx)/du_l -> fxu[:, :, l]
        fd_fxx = _fd_jacobian(
            lambda z: model.derivatives(z, u).fx.reshape(-1), x, n * n)
        fd_fxu = _fd_jacobian(
            lambda z: model.derivatives(x, z).fx.reshape(-1), u, n * n)
        fd_fuu = _fd_jacobian(
            lambda z: model.derivatives(x, z).fu.reshape(-1), u, n * m)
        record("fxx", _rel_err(fd_fxx.reshape(n, n, n), bundle.fxx), idx)
        record("fxu", _rel_err(fd_fxu.reshape(n, n, m), bundle.fxu), idx)
        record("fuu", _rel_err(fd_fuu, np.zeros_like(fd_fuu)), idx)

        lx, lxx, ru, r = cost.stage_derivatives(x, u)
        fd_lx = _fd_jacobian(lambda z: [cost.state_cost(z)], x, 1)[0]
        fd_lxx = _fd_jacobian(lambda z: cost.state_grad(z), x, n)
        fd_ru = _fd_jacobian(lambda z: [cost.stage_cost(x, z)], u, 1)[0]
        fd_r = _fd_jacobian(lambda z: cost.stage_derivatives(x, z)[2], u, m)
        record("lx", _rel_err(fd_lx, lx), idx)
        record("lxx", _rel_err(fd_lxx, lxx), idx)
        record("control_grad", _rel_err(fd_ru, ru), idx)
        record("control_hess", _rel_err(fd_r, r), idx)

        ct_x, ct_xx = cost.terminal_derivatives(x)
        fd_ct_x = _fd_jacobian(lambda z: [cost.terminal_cost(z)], x, 1)[0]
        fd_ct_xx = _fd_jacobian(lambda z: cost.terminal_grad(z), x, n)
        record("terminal_grad", _rel_err(fd_ct_x, ct_x), idx)
        record("terminal_hess", _rel_err(fd_ct_xx, ct_xx), idx)

    checks = tuple(
        DerivativeCheck(name, err, idx, err <= tol)
        for name, (err, idx) in sorted(worst.items()))
    return DerivativeCheckReport(tol=tol, sample_count=sample_count, checks=checks)
