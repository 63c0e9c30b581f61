import dataclasses

import numpy as np
import pytest

from quadtwist.controllers import SlidingConfig
from quadtwist.dynamics import AttitudeState, QuadParams, kinetic_energy
from quadtwist.errors import GimbalLock, ValidationError
from quadtwist.sim import (DisturbanceSource, ReferenceSchedule, SimConfig, StepEvent, disturbance_source,
                           integrate_open_loop, integrate_step, run_closed_loop)

SOLO = QuadParams()
CFG = SlidingConfig()
SHORT = SimConfig(t_end=0.6)
ROLL_STEP = ReferenceSchedule((StepEvent(0.1, 0, np.radians(-10)),))


class TestConfig:
    def test_defaults(self):
        sim = SimConfig()
        assert sim.substeps == 2 and sim.n_ctrl == 100_000

    @pytest.mark.parametrize("kwargs", [
        {"dt_plant": 3e-5}, {"dt_plant": 1e-4}, {"t_end": 0.0}, {"integrator": "rk45"}, {"kinematics": "exact"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            SimConfig(**kwargs)

    def test_schedule_order_and_range(self):
        with pytest.raises(ValidationError):
            ReferenceSchedule((StepEvent(1.0, 0, 0.1), StepEvent(0.5, 1, 0.1)))
        with pytest.raises(ValidationError):
            ReferenceSchedule((StepEvent(1.0, 1, 2.0),))
        with pytest.raises(ValidationError):
            ReferenceSchedule((StepEvent(1.0, 3, 0.1),))

    def test_schedule_lookup(self):
        sched = ReferenceSchedule((StepEvent(0.5, 0, -0.1), StepEvent(1.0, 0, 0.2)))
        np.testing.assert_array_equal(sched.angles_at(0.4), 0.0)
        assert sched.angles_at(0.5)[0] == -0.1 and sched.angles_at(2.0)[0] == 0.2
        assert sched.previous_target(1) == -0.1


class TestIntegrator:
    @pytest.mark.parametrize("kind", ["rk4", "euler"])
    @pytest.mark.parametrize("kinematics", ["approx", "full"])
    def test_rest_is_fixed_point(self, kind, kinematics):
        x = integrate_open_loop(np.zeros(6), np.zeros((500, 3)), SOLO, 1e-3, 4, kind=kind, kinematics=kinematics)
        np.testing.assert_array_equal(x, 0.0)

    def test_constant_acceleration_exact(self):
        # a single-axis torque keeps the gyroscopic term at zero, so omega_dot is constant
        a = 0.05 / SOLO.inertia_diag[1]
        x = integrate_open_loop(np.zeros(6), np.tile([0, 0.05, 0], (1000, 1)), SOLO, 1e-3, 1)
        T = 1.0
        assert abs(x[-1, 4] - a * T) < 1e-10
        assert abs(x[-1, 1] - 0.5 * a * T * T) < 1e-10

    def test_full_kinematics_gimbal_lock(self):
        with pytest.raises(GimbalLock):
            integrate_step(AttitudeState([0, np.pi / 2 - 1e-9, 0], [0, 0, 0]), [0, 0, 0], [0, 0, 0], SOLO, 1e-3,
                           kinematics="full")

    def test_nonpositive_dt(self):
        with pytest.raises(ValueError):
            integrate_step(AttitudeState(), [0, 0, 0], [0, 0, 0], SOLO, 0.0)

    def test_euler_is_first_order(self):
        u = np.tile([0.01, -0.02, 0.005], (200, 1))
        x0 = [0, 0, 0, 1.0, 0.5, -0.3]
        ref = integrate_open_loop(x0, u, SOLO, 1e-3, 16)[-1]
        e1 = np.abs(integrate_open_loop(x0, u, SOLO, 1e-3, 1, kind="euler")[-1] - ref).max()
        e2 = np.abs(integrate_open_loop(x0, u, SOLO, 1e-3, 2, kind="euler")[-1] - ref).max()
        assert 1.7 < e1 / e2 < 2.3

    def test_energy_conserved_torque_free(self):
        inertia = np.array([[0.02, 0.003, -0.001], [0.003, 0.03, 0.002], [-0.001, 0.002, 0.04]])
        params = SOLO.with_inertia(inertia)
        w0 = np.array([1.0, -0.7, 0.4])
        x = integrate_open_loop(np.r_[0, 0, 0, w0], np.zeros((10_000, 3)), params, 1e-3, 1)
        E0 = kinetic_energy(w0, inertia)
        drift = max(abs(kinetic_energy(w, inertia) - E0) for w in x[::500, 3:]) / E0
        assert drift <= 1e-8


class TestDisturbance:
    def test_none(self):
        assert DisturbanceSource().sample(123) == (0.0, 0.0, 0.0)

    def test_constant_bias(self):
        src = DisturbanceSource("constant_bias", 0.5)
        assert src.sample(0) == src.sample(10**6) == (0.5, 0.5, 0.5)
        np.testing.assert_array_equal(disturbance_source("constant_bias", 0.5, 0, t=3.2).d, 0.5)

    def test_uniform_noise_statistics(self):
        src = DisturbanceSource("uniform_noise", 0.5, seed=3)
        draws = np.array([src.sample(k) for k in range(100_000)])
        assert abs(draws.mean() - 0.5) < 0.01
        assert draws.min() >= 0.4 and draws.max() <= 0.6

    def test_uniform_noise_reproducible(self):
        a, b = DisturbanceSource("uniform_noise", 0.5, seed=3), DisturbanceSource("uniform_noise", 0.5, seed=3)
        assert [a.sample(k) for k in (5, 70_000, 1)] == [b.sample(k) for k in (5, 70_000, 1)]
        assert DisturbanceSource("uniform_noise", 0.5, seed=4).sample(5) != a.sample(5)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            DisturbanceSource("gust", 0.5)
        with pytest.raises(ValidationError):
            DisturbanceSource("constant_bias", -1.0)


class TestClosedLoop:
    def test_equilibrium_holds(self):
        log = run_closed_loop("adaptive-twisting", SOLO, CFG, SimConfig(), ReferenceSchedule())
        assert not log.failed and len(log) == 100_001
        assert np.max(np.abs(log.Theta)) <= 1e-9

    def test_log_layout(self):
        log = run_closed_loop("adaptive-twisting", SOLO, CFG, SHORT, ROLL_STEP)
        assert len(log) == SHORT.n_ctrl + 1
        np.testing.assert_allclose(np.diff(log.t), SHORT.dt_ctrl, rtol=1e-9)
        assert np.all(np.isfinite(log.V))
        assert log.ref[log.index_at(0.1), 0] == np.radians(-10) and log.ref[log.index_at(0.1) - 1, 0] == 0.0

    def test_zero_order_hold_replay(self):
        # replaying the logged torques open loop must reproduce the logged states bit for bit
        log = run_closed_loop("adaptive-twisting", SOLO, CFG, SHORT, ROLL_STEP)
        x = integrate_open_loop(np.zeros(6), log.u[:-1], SOLO, SHORT.dt_ctrl, SHORT.substeps)
        np.testing.assert_array_equal(x[:, :3], log.Theta)
        np.testing.assert_array_equal(x[:, 3:], log.omega)

    def test_twisting_output_two_valued(self):
        log = run_closed_loop("adaptive-twisting", SOLO, CFG, SHORT, ROLL_STEP)
        k = log.index_at(0.1)
        sigma, alpha, uD = log.sigma[k:, 0], log.alpha[k:, 0], log.u_D[k:, 0]
        low = np.isclose(uD, -0.25 * alpha * np.sign(sigma), rtol=0, atol=1e-15)
        high = np.isclose(uD, -alpha * np.sign(sigma), rtol=0, atol=1e-15)
        assert np.all(low | high)

    def test_deterministic(self):
        sim = SimConfig(t_end=0.3, seed=11)
        dist = lambda: DisturbanceSource("uniform_noise", 0.5, seed=11)  # noqa: E731
        a = run_closed_loop("adaptive-twisting", SOLO, CFG, sim, ROLL_STEP, dist())
        b = run_closed_loop("adaptive-twisting", SOLO, CFG, sim, ROLL_STEP, dist())
        c = run_closed_loop("adaptive-twisting", SOLO, CFG, sim, ROLL_STEP,
                            DisturbanceSource("uniform_noise", 0.5, seed=12))
        assert a.equals(b)
        assert not a.equals(c)

    def test_blowup_returns_partial_log(self):
        log = run_closed_loop("pid", SOLO, CFG, SHORT, ROLL_STEP, DisturbanceSource("constant_bias", 50.0))
        assert log.failed and "envelope" in log.error
        assert 1 < len(log) < SHORT.n_ctrl + 1
        assert np.all(np.isfinite(log.Theta))

    def test_general_inertia_plant_runs(self):
        plant = SOLO.with_inertia(1.5 * SOLO.inertia + np.array([[0, 0.0044, -0.0077], [0.0044, 0, 0.0115],
                                                                 [-0.0077, 0.0115, 0]]))
        log = run_closed_loop("adaptive-twisting", plant, CFG, SHORT, ROLL_STEP, controller_params=SOLO)
        assert not log.failed

    def test_model_sigma_dot_option(self):
        cfg = dataclasses.replace(CFG, sigma_dot_source="model")
        log = run_closed_loop("adaptive-twisting", SOLO, cfg, SHORT, ROLL_STEP)
        assert not log.failed and abs(np.degrees(log.Theta[-1, 0]) + 10) < 1.0
