"""Model dynamics, analytic derivatives, and the finite-difference verifier."""

import numpy as np
import pytest

from trajopt import (DimensionError, LinearModel, PendulumModel,
                     QuadraticCost, check_derivatives, make_benchmark)


def test_pendulum_downward_equilibrium_is_fixed_point():
    model = PendulumModel(damping=0.0)
    nxt = model.step([0.0, 0.0], [0.0])
    assert np.array_equal(nxt, [0.0, 0.0])


def test_pendulum_upright_equilibrium_is_fixed_point():
    model = PendulumModel(damping=0.0)
    nxt = model.step([np.pi, 0.0], [0.0])
    assert np.allclose(nxt, [np.pi, 0.0], atol=1e-12)


def test_pendulum_hand_euler_step():
    # theta_dot picks up dt * (-g sin(pi/2)) = -0.05 * 9.81 = -0.4905
    model = PendulumModel(mass=1.0, length=1.0, gravity=9.81, damping=0.0, dt=0.05)
    nxt = model.step([np.pi / 2, 0.0], [0.0])
    assert np.allclose(nxt, [np.pi / 2, -0.4905], atol=1e-12)


def test_pendulum_jacobian_entry_at_origin():
    model = PendulumModel(mass=1.0, length=1.0, gravity=9.81, damping=0.0, dt=0.05)
    bundle = model.derivatives([0.0, 0.0], [0.0])
    assert bundle.fx[1, 0] == pytest.approx(-0.4905, abs=1e-12)


def test_linear_model_derivatives_are_the_matrices():
    a = np.array([[0.9, 0.2], [0.0, 1.1]])
    b = np.array([[0.5], [1.0]])
    model = LinearModel(a, b)
    x = np.array([0.3, -0.7])
    u = np.array([0.2])
    assert np.array_equal(model.step(x, u), a @ x + b @ u)
    bundle = model.derivatives(x, u)
    assert np.array_equal(bundle.fx, a)
    assert np.array_equal(bundle.fu, b)
    assert not bundle.fxx.any()
    assert not bundle.fxu.any()


@pytest.mark.parametrize("system", ["pendulum", "cartpole"])
def test_control_affine_three_point_collinearity(system):
    # f(x, u0 + 2d) - f(x, u0) must equal 2 (f(x, u0 + d) - f(x, u0))
    model, _, _, _ = make_benchmark(system)
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.uniform(model.state_low, model.state_high)
        u0 = rng.uniform(model.control_low, model.control_high)
        d = rng.uniform(-1.0, 1.0, size=model.control_dim)
        f0 = model.step(x, u0)
        f1 = model.step(x, u0 + d)
        f2 = model.step(x, u0 + 2 * d)
        assert np.allclose(f2 - f0, 2 * (f1 - f0), atol=1e-9)


@pytest.mark.parametrize("system", ["pendulum", "cartpole"])
def test_hessian_symmetry_and_cost_definiteness(system):
    model, cost, _, _ = make_benchmark(system)
    rng = np.random.default_rng(11)
    r = cost.control_weight
    assert np.array_equal(r, r.T)
    assert np.linalg.eigvalsh(r)[0] > 0
    for _ in range(25):
        x = rng.uniform(model.state_low, model.state_high)
        u = rng.uniform(model.control_low, model.control_high)
        bundle = model.derivatives(x, u)
        for i in range(model.state_dim):
            assert np.allclose(bundle.fxx[i], bundle.fxx[i].T, atol=1e-14)
        _, lxx, _, _ = cost.stage_derivatives(x, u)
        _, ct_xx = cost.terminal_derivatives(x)
        assert np.linalg.eigvalsh(lxx)[0] >= -1e-12
        assert np.linalg.eigvalsh(ct_xx)[0] >= -1e-12


@pytest.mark.parametrize("system", ["pendulum", "cartpole"])
def test_analytic_derivatives_match_finite_differences(system):
    model, cost, _, _ = make_benchmark(system)
    report = check_derivatives(model, cost, sample_count=100, tol=1e-5, seed=0)
    assert report.passed, report.summary()


def test_check_derivatives_linear_model_is_machine_exact():
    model = LinearModel(np.array([[1.0, 0.3], [0.1, 0.9]]), np.array([[0.0], [1.0]]))
    cost = QuadraticCost(np.eye(2), np.eye(1), np.eye(2), np.zeros(2))
    report = check_derivatives(model, cost, sample_count=20, tol=1e-9, seed=1)
    assert report.passed
    fx_check = next(c for c in report.checks if c.name == "fx")
    assert fx_check.max_rel_err < 1e-10


class _CorruptedPendulum(PendulumModel):
    def _derivatives(self, x, u):
        bundle = super()._derivatives(x, u)
        fx = bundle.fx.copy()
        fx[0, 1] += 0.1
        return type(bundle)(fx, bundle.fu, bundle.fxx, bundle.fxu)


def test_check_derivatives_flags_injected_jacobian_fault():
    model = _CorruptedPendulum()
    _, cost, _, _ = make_benchmark("pendulum")
    report = check_derivatives(model, cost, sample_count=5, tol=1e-5, seed=0)
    assert not report.passed
    assert [c.name for c in report.failures()] == ["fx"]


def test_quadratic_cost_derivatives_at_special_points():
    q = np.diag([2.0, 0.5])
    cost = QuadraticCost(q, 0.1 * np.eye(1), 100 * q, goal=np.array([np.pi, 0.0]))
    lx, lxx, ru, r = cost.stage_derivatives([np.pi, 0.0], [0.0])
    assert np.array_equal(lx, np.zeros(2))          # gradient vanishes at the goal
    assert np.array_equal(lxx, q)
    assert np.array_equal(ru, np.zeros(1))          # zero control, zero gradient
    assert np.array_equal(r, 0.1 * np.eye(1))
    ct_x, ct_xx = cost.terminal_derivatives([np.pi, 0.0])
    assert np.array_equal(ct_x, np.zeros(2))
    assert np.array_equal(ct_xx, 100 * q)


def test_quadratic_cost_centered_at_zero():
    cost = QuadraticCost(np.eye(2), np.eye(1), np.eye(2), np.zeros(2))
    assert cost.state_cost([0.0, 0.0]) == 0.0
    lx, lxx, _, _ = cost.stage_derivatives([0.0, 0.0], [0.3])
    assert np.array_equal(lx, np.zeros(2))
    assert np.array_equal(lxx, np.eye(2))


def test_dimension_and_finiteness_contracts():
    model = PendulumModel()
    with pytest.raises(DimensionError):
        model.step([0.0, 0.0, 0.0], [0.0])
    with pytest.raises(DimensionError):
        model.step([0.0, 0.0], [0.0, 0.0])
    with pytest.raises(DimensionError):
        model.step([np.nan, 0.0], [0.0])
    with pytest.raises(DimensionError):
        model.derivatives([0.0, np.inf], [0.0])


def test_cost_validation_rejects_bad_weights():
    with pytest.raises(ValueError):
        QuadraticCost(np.eye(2), np.zeros((1, 1)), np.eye(2), np.zeros(2))  # R singular
    with pytest.raises(ValueError):
        QuadraticCost(-np.eye(2), np.eye(1), np.eye(2), np.zeros(2))  # Q indefinite
    with pytest.raises(ValueError):
        q = np.array([[1.0, 0.5], [0.0, 1.0]])
        QuadraticCost(q, np.eye(1), np.eye(2), np.zeros(2))  # asymmetric


def test_make_benchmark_rejects_mismatched_vectors():
    with pytest.raises(DimensionError):
        make_benchmark("pendulum", q_diag=(1.0, 1.0, 1.0))
    with pytest.raises(DimensionError):
        make_benchmark("cartpole", x0=(0.0, 0.0))
    with pytest.raises(ValueError):
        make_benchmark("spring")
