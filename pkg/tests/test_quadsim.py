import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisparse.errors import ContractError, SimulationDiverged
from multisparse.quadsim import (ControlInput, DisturbanceSchedule, Gains, QuadParams, QuadState,
                                 ResidualModel, TrajectoryConfig, flat_to_desired,
                                 geometric_controller, hat, residual_targets, simulate, step,
                                 tracking_nmse, true_dynamics, vee)
from multisparse.quadsim.so3 import attitude_error, expm_so3, orthonormality_error, project_so3

vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=50)
@given(vec3, vec3)
def test_hat_vee(a, b):
    a, b = np.array(a), np.array(b)
    np.testing.assert_allclose(vee(hat(a)), a)
    np.testing.assert_allclose(hat(a) @ b, np.cross(a, b), atol=1e-9)


def test_vee_rejects_non_skew():
    with pytest.raises(ContractError):
        vee(np.eye(3))


@settings(max_examples=50)
@given(vec3)
def test_expm_is_rotation(w):
    R = expm_so3(np.array(w))
    assert orthonormality_error(R) < 1e-12
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


def test_expm_small_angle_branch():
    w = np.array([1e-7, -2e-7, 3e-7])
    np.testing.assert_allclose(expm_so3(w), np.eye(3) + hat(w), atol=1e-13)


def test_project_restores_orthonormality(rng):
    R = expm_so3(rng.standard_normal(3)) + 1e-4 * rng.standard_normal((3, 3))
    P = project_so3(R)
    assert orthonormality_error(P) < 1e-12 and np.linalg.det(P) > 0


def test_attitude_error_zero_and_symmetric(rng):
    R = expm_so3(rng.standard_normal(3))
    np.testing.assert_allclose(attitude_error(R, R), 0, atol=1e-15)
    Rd = expm_so3(rng.standard_normal(3))
    np.testing.assert_allclose(attitude_error(R, Rd), -attitude_error(Rd, R), atol=1e-14)


def test_true_dynamics_free_fall():
    p = QuadParams()
    d = true_dynamics(QuadState.hover(), ControlInput(0.0, np.zeros(3)), p)
    np.testing.assert_allclose(d.v_dot, [0, 0, p.g])
    np.testing.assert_allclose(d.R_dot, 0)


def test_wind_and_mass_schedule():
    p = QuadParams()
    sched = DisturbanceSchedule([(1.0, 2.0, 1.2)], [(1.0, 2.0, [0.1, 0.1, 0.1])], [0.1, 0, 0])
    assert sched.mass(p, 1.5) == pytest.approx(1.5)
    assert sched.mass(p, 1.0) == pytest.approx(1.5)  # exact start matches
    assert sched.mass(p, 2.5) == p.m
    np.testing.assert_allclose(np.diag(sched.inertia(p, 1.5)), [1.2, 1.2, 2.3])
    d = true_dynamics(QuadState.hover(), ControlInput(p.m * p.g, np.zeros(3)), p, sched, 0.0)
    np.testing.assert_allclose(d.v_dot, [0.1 * p.g, 0, 0], atol=1e-12)


def test_overlapping_steps_rejected():
    with pytest.raises(ContractError):
        DisturbanceSchedule([(0.0, 2.0, 1.1), (1.0, 3.0, 1.2)])


def test_hover_thrust():
    p = QuadParams()
    des = flat_to_desired(0.0, TrajectoryConfig((0, 0, 0), (0.8, 0.4, 0.4)), p.g)
    u = geometric_controller(QuadState.hover(), des, Gains(), p)
    assert u.F == pytest.approx(12.2625, abs=1e-12)
    np.testing.assert_allclose(u.M, 0, atol=1e-12)


def test_hover_is_stationary():
    p = QuadParams()
    s = QuadState.hover()
    u = ControlInput(p.m * p.g, np.zeros(3))
    for k in range(1000):
        s2 = step(s, u, p, t=k * 1e-3, dt=1e-3)
        for a, b in ((s.r, s2.r), (s.v, s2.v), (s.R, s2.R), (s.Omega, s2.Omega)):
            assert np.max(np.abs(a - b)) < 1e-10
        s = s2


def test_closed_loop_hover_stays_put():
    log = simulate(traj=TrajectoryConfig((0, 0, 0), (0.8, 0.4, 0.4)), tf=2.0)
    assert np.max(np.abs(np.diff(log.r, axis=0))) < 1e-10
    np.testing.assert_allclose(log.F, 12.2625, atol=1e-10)


def test_nominal_tracking_and_orthonormality():
    log = simulate(tf=16.0, check_every_step=True)
    assert len(log) == 1600
    assert log.max_orthonormality_error < 1e-6 and log.max_det_error < 1e-6
    nmse = tracking_nmse(log.t, log.r, log.r_d)
    assert np.all(nmse < 0.02)


def test_zero_horizon_gives_empty_log():
    log = simulate(tf=0.0)
    assert len(log) == 0 and log.r.shape == (0, 3)


def test_nmse_trim_and_empty():
    t = np.arange(0, 3, 0.01)
    r_d = np.column_stack([np.sin(t)] * 3)
    assert tracking_nmse(t, r_d, r_d).max() == 0.0
    assert tracking_nmse(t[:100], r_d[:100], r_d[:100]) is None
    e = r_d + 0.1
    nmse = tracking_nmse(t, e, r_d)
    keep = t >= 2.0
    ref = r_d[keep, 0] - r_d[keep, 0].mean()
    assert nmse[0] == pytest.approx(np.sum(0.01 * keep) / np.sum(ref ** 2))


def test_divergence_carries_partial_log():
    weak = Gains(k_r=[1e-3] * 3, k_v=[1e-3] * 3, k_R=[1e-3] * 3, k_Omega=[1e-3] * 3)
    # a 50 g lateral wind against negligible gains leaves the 1 km ball in seconds
    sched = DisturbanceSchedule(wind=[50.0, 0.0, 0.0])
    with pytest.raises(SimulationDiverged) as info:
        simulate(gains=weak, schedule=sched, tf=16.0)
    partial = info.value.partial_log
    assert 0 < len(partial) < 1600
    assert partial.diverged_at is not None


def test_residual_targets_recover_wind():
    p = QuadParams()
    sched = DisturbanceSchedule(wind=[0.17, 0.18, 0.16])
    log = simulate(schedule=sched, tf=3.0)
    Q, Y = residual_targets(log, p)
    assert Q.shape == (300, 9)
    np.testing.assert_allclose(Y[:, :3], np.tile(p.m * p.g * np.array([0.17, 0.18, 0.16]), (300, 1)),
                               atol=1e-9)
    np.testing.assert_allclose(Y[:, 3:], 0, atol=1e-9)


def test_residual_targets_null_without_disturbance():
    _, Y = residual_targets(simulate(tf=3.0), QuadParams())
    assert np.max(np.abs(Y)) < 1e-9


class _Const:
    def __init__(self, c):
        self.c = c

    def predict_mean(self, Q):
        return np.full(np.atleast_2d(Q).shape[0], self.c)


def test_oracle_residual_removes_wind_error():
    p = QuadParams()
    w = np.array([0.17, 0.18, 0.16])
    sched = DisturbanceSchedule(wind=w)
    oracle = ResidualModel([_Const(c) for c in p.m * p.g * w] + [_Const(0.0)] * 3, "oracle")
    base = tracking_nmse(*_trk(simulate(schedule=sched, tf=8.0)))
    fixed = tracking_nmse(*_trk(simulate(schedule=sched, tf=8.0, residual_model=oracle)))
    assert np.all(fixed < base)


def _trk(log):
    return log.t, log.r, log.r_d


def test_residual_model_needs_six():
    with pytest.raises(ContractError):
        ResidualModel([_Const(0.0)] * 5)


def test_bad_time_steps():
    with pytest.raises(ContractError):
        simulate(dt=0.02, control_dt=0.01)
