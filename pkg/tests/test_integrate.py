import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dsmflow.errors import InvalidConfig, SingularMatrix
from dsmflow.integrate import IntegratorConfig, StopReason, euler_step, integrate
from dsmflow.solvers import newton_flow_rhs


def decay(t, u):
    return -u


def test_exponential_decay():
    traj, reason = integrate(decay, [1.0], IntegratorConfig(t_max=1.0))
    assert reason is StopReason.HORIZON_REACHED
    assert traj.t[-1] == 1.0
    assert abs(traj.final_u[0] - np.exp(-1)) <= 1e-8


def test_constant_flow_is_exact():
    traj, reason = integrate(lambda t, u: np.zeros_like(u), [3.0, 4.0],
                             IntegratorConfig(t_max=10.0))
    assert reason is StopReason.HORIZON_REACHED
    np.testing.assert_array_equal(traj.final_u, [3.0, 4.0])


def test_forced_decay_closed_form():
    # u' = -u + e^{-t}, u(0) = 0  =>  u(t) = t e^{-t}
    traj, _ = integrate(lambda t, u: -u + np.exp(-t), [0.0], IntegratorConfig(t_max=2.0))
    assert abs(traj.final_u[0] - 2 * np.exp(-2)) <= 1e-8


def test_agrees_with_reference_integrator_on_nonlinear_system():
    def vdp(t, y):
        return np.array([y[1], 0.5 * (1 - y[0] ** 2) * y[1] - y[0]])

    traj, _ = integrate(vdp, [2.0, 0.0], IntegratorConfig(t_max=5.0))
    ref = solve_ivp(vdp, (0, 5), [2.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(traj.final_u, ref.y[:, -1], atol=1e-7)


def test_error_decreases_with_tolerance():
    errors = []
    for k in range(4, 11):
        cfg = IntegratorConfig(rtol=10.0 ** -k, atol=1e-14, t_max=1.0)
        traj, _ = integrate(decay, [1.0], cfg)
        errors.append(abs(traj.final_u[0] - np.exp(-1)))
    assert all(b < a for a, b in zip(errors, errors[1:])), errors


def test_deterministic():
    cfg = IntegratorConfig(t_max=3.0, checkpoint_grid=(0.5, 1.0, 2.0))
    rhs = lambda t, u: np.sin(u) - 0.3 * u  # noqa: E731
    a, _ = integrate(rhs, [1.0, -2.0], cfg)
    b, _ = integrate(rhs, [1.0, -2.0], cfg)
    for f in ("t", "u", "accepted_step", "is_checkpoint"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_checkpoints_hit_exactly():
    grid = (0.1, 0.3, 1 / 3, 0.7, 1.25, 2.0, 2.5)
    traj, _ = integrate(decay, [1.0], IntegratorConfig(t_max=2.5, checkpoint_grid=grid))
    got = traj.t[traj.checkpoint_indices()]
    np.testing.assert_array_equal(got, grid)
    assert traj.t[0] == 0.0 and np.all(np.diff(traj.t) > 0)
    np.testing.assert_array_equal(traj.u[0], [1.0])


def test_checkpoint_at_zero_marked():
    traj, _ = integrate(decay, [1.0], IntegratorConfig(t_max=1.0, checkpoint_grid=(0.0, 0.5)))
    assert traj.is_checkpoint[0]


def test_residual_stop_via_monitor():
    cfg = IntegratorConfig(t_max=50.0, residual_stop=1e-3)
    traj, reason = integrate(decay, [1.0], cfg,
                             monitor=lambda t, u: (abs(u[0]), 0.0, abs(u[0])))
    assert reason is StopReason.RESIDUAL_CONVERGED
    assert traj.residual_norm[-1] <= 1e-3
    assert traj.t[-1] == pytest.approx(np.log(1e3), abs=0.2)


def test_divergence_detected():
    traj, reason = integrate(lambda t, u: np.ones_like(u), [0.0],
                             IntegratorConfig(t_max=100.0, divergence_norm=10.0))
    assert reason is StopReason.DIVERGED
    assert abs(traj.final_u[0]) >= 10.0


def test_step_underflow_on_blowup():
    # u' = u^2 from u0 = 1 blows up at t = 1
    traj, reason = integrate(lambda t, u: u**2, [1.0],
                             IntegratorConfig(t_max=2.0, divergence_norm=1e300))
    assert reason is StopReason.STEP_UNDERFLOW
    assert traj.final_t < 1.0


def test_linear_solve_failure_propagates():
    def rhs(t, u):
        if t > 0.5:
            raise SingularMatrix("boom")
        return -u

    _, reason = integrate(rhs, [1.0], IntegratorConfig(t_max=1.0))
    assert reason is StopReason.LINEAR_SOLVE_FAILED


@pytest.mark.parametrize("kw", [
    dict(rtol=0.0), dict(atol=-1.0), dict(hmin=1e-3, h0=1e-3), dict(h0=2.0, hmax=1.0),
    dict(checkpoint_grid=(1.0, 0.5)), dict(checkpoint_grid=(1.0, 60.0)),
    dict(checkpoint_grid=(-1.0, 1.0)),
])
def test_config_validation(kw):
    with pytest.raises(InvalidConfig):
        IntegratorConfig(**kw)


def test_euler_step_examples(linear_spd):
    assert euler_step(decay, np.array([1.0]), 0.0, 1.0)[0] == 0.0
    assert euler_step(decay, np.array([1.0]), 0.0, 0.5)[0] == 0.5
    rhs = lambda t, u: newton_flow_rhs(linear_spd, u)  # noqa: E731
    np.testing.assert_allclose(euler_step(rhs, np.zeros(2), 0.0, 1.0), [1 / 3, 1 / 3],
                               rtol=1e-15)


def test_euler_step_requires_positive_h():
    with pytest.raises(ValueError):
        euler_step(decay, np.array([1.0]), 0.0, 0.0)
