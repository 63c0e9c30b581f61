"""
Acceptance suite. Each test checks one criterion at its stated tolerance and
emits a single PASS/FAIL line (repeated in the terminal summary).
"""

import dataclasses

import numpy as np
import pytest

from quadtwist.controllers import SlidingConfig, adapt_gain, twisting_term, undershoot_allowance
from quadtwist.dynamics import AttitudeState, QuadParams, attitude_accel, kinetic_energy, mix_forces, \
    rotation_matrix, unmix_torques
from quadtwist.errors import WindowTooShort
from quadtwist.metrics import all_step_metrics, compare_controllers, lyapunov_monotonicity, step_metrics
from quadtwist.scenario import preset, run_scenario
from quadtwist.sim import SimConfig, integrate_open_loop, run_closed_loop

PROPOSED = "adaptive-twisting"
FIELD = ("smc", "twisting", "atsm", PROPOSED)


def _fmt(metrics, attr, scale=1.0, digits=3):
    return "/".join(f"{getattr(m, attr) * scale:.{digits}f}" for m in metrics)


def test_c1_nominal_step_response(runs, report):
    log = runs("nominal", PROPOSED)
    metrics = all_step_metrics(log)
    settle_ok = all(m.settling_time_2pct <= 1.5 for m in metrics)
    overshoot_ok = all(m.overshoot_pct <= 10.0 for m in metrics)
    wall = log.meta["wall_time"]
    ok = report("C1", settle_ok and overshoot_ok and wall < 5.0 and not log.failed,
                f"ts2% [s] {_fmt(metrics, 'settling_time_2pct')} (<=1.5), "
                f"overshoot [%] {_fmt(metrics, 'overshoot_pct')} (<=10), wall {wall:.2f}s for 5 s simulated (<5)")
    assert ok


def test_c2_disturbance_rejection(runs, report):
    nominal = all_step_metrics(runs("nominal", PROPOSED))
    try:
        disturbed = all_step_metrics(runs("disturbance", PROPOSED))
    except WindowTooShort as exc:
        report("C2", False, f"an axis never entered the 2% band: {exc}")
        pytest.fail(str(exc))
    ratios = [d.settling_time_2pct / n.settling_time_2pct for d, n in zip(disturbed, nominal)]
    ok = report("C2", all(r <= 1.5 for r in ratios),
                f"all axes settle; ts2% [s] {_fmt(disturbed, 'settling_time_2pct')} vs nominal "
                f"{_fmt(nominal, 'settling_time_2pct')}, ratios {'/'.join(f'{r:.3f}' for r in ratios)} (<=1.5)")
    assert ok


def test_c3_parameter_variation(runs, report):
    cfg = SlidingConfig()
    nominal = all_step_metrics(runs("nominal", PROPOSED))
    log = runs("variation", PROPOSED)
    varied = all_step_metrics(log)
    ts_dev = [abs(v.settling_time_2pct / n.settling_time_2pct - 1) for v, n in zip(varied, nominal)]
    os_dev = [abs(v.overshoot_pct / n.overshoot_pct - 1) for v, n in zip(varied, nominal)]
    delta = undershoot_allowance(cfg, SimConfig().dt_ctrl, np.abs(log.sigma).max(axis=0))
    lo = cfg.arr("alpha_m") - delta
    gains_ok = bool(np.all(log.alpha >= lo) and np.all(log.alpha <= cfg.arr("alpha_M")))
    ok = report("C3", all(d <= 0.15 for d in ts_dev) and all(d <= 0.15 for d in os_dev) and gains_ok,
                f"settling dev {'/'.join(f'{d:.1%}' for d in ts_dev)}, overshoot dev "
                f"{'/'.join(f'{d:.1%}' for d in os_dev)} (each <=15%; overshoot {_fmt(varied, 'overshoot_pct')}% "
                f"vs {_fmt(nominal, 'overshoot_pct')}%), alpha in [{log.alpha.min():.4f}, {log.alpha.max():.4f}] "
                f"within [2.001-{delta.max():.4f}, 2.12]: {gains_ok}")
    assert ok


def test_c4_controller_ordering(runs, report):
    dist = compare_controllers({k: runs("disturbance", k) for k in FIELD})
    var = compare_controllers({k: runs("variation", k) for k in FIELD})
    rms = {k: dist.overall_rms(k) for k in FIELD}
    settle = {k: var.mean_settling(k) for k in FIELD}
    rms_ok = all(rms[PROPOSED] < rms[k] for k in FIELD if k != PROPOSED)
    settle_ok = all(settle[PROPOSED] < settle[k] for k in FIELD if k != PROPOSED)
    yaw = {k: step_metrics(runs("disturbance", k), 2).rms_tracking_error for k in ("smc", "atsm", PROPOSED)}
    yaw_ok = all(yaw[PROPOSED] < yaw[k] for k in ("smc", "atsm"))
    ok = report("C4", rms_ok and settle_ok and yaw_ok,
                "disturbance pooled steady RMS [deg] "
                + ", ".join(f"{k} {np.degrees(v):.5f}" for k, v in rms.items())
                + f" (proposed strictly smallest: {rms_ok}); yaw RMS smallest among smc/atsm/proposed: {yaw_ok}; "
                "variation mean ts2% [s] " + ", ".join(f"{k} {v:.4f}" for k, v in settle.items())
                + f" (proposed strictly smallest: {settle_ok})")
    assert ok


def test_c5_lyapunov_decrease(runs, report):
    cfg = SlidingConfig()
    parts, ok = [], True
    for name in ("nominal", "disturbance", "variation"):
        log = runs(name, PROPOSED)
        every = lyapunov_monotonicity(log, cfg, tol=1e-6, mode="all")
        some = lyapunov_monotonicity(log, cfg, tol=1e-6, mode="any")
        ok &= every.ok and some.ok
        parts.append(f"{name}: {every.violations}/{every.checked} (all-axis premises), "
                     f"{some.violations}/{some.checked} (any-axis premises)")
    ok = report("C5", ok, "violations/checked steps; " + "; ".join(parts))
    assert ok


def _convergence_order():
    """Observed RK4 order on the nominal closed loop with the control rate held fixed."""
    spec = preset("nominal")
    dt = 1e-3
    states, switches = [], []
    for h in (dt, dt / 2, dt / 8):
        sim = SimConfig(dt_plant=h, dt_ctrl=dt, t_end=spec.sim.t_end)
        log = run_closed_loop(PROPOSED, spec.plant_params(), spec.sliding, sim, spec.schedule,
                              controller_params=spec.controller_params())
        states.append(np.hstack([log.Theta, log.omega]))
        switches.append(np.sign(log.u_D))
    e1 = np.max(np.abs(states[0] - states[2]))
    e2 = np.max(np.abs(states[1] - states[2]))
    same_switching = all(np.array_equal(switches[0], s) for s in switches[1:])
    return float(np.log2(e1 / e2)), same_switching


def _energy_drift():
    inertia = np.array([[0.02, 0.003, -0.001], [0.003, 0.03, 0.002], [-0.001, 0.002, 0.04]])
    params = QuadParams().with_inertia(inertia)
    w0 = np.array([1.0, -0.7, 0.4])
    x = integrate_open_loop(np.r_[0, 0, 0, w0], np.zeros((10_000, 3)), params, 1e-3, 1)
    E = np.array([kinetic_energy(w, inertia) for w in x[:, 3:]])
    return float(np.max(np.abs(E - E[0])) / E[0])


def test_c6_numerical_integrity(report):
    order, same_switching = _convergence_order()
    drift = _energy_drift()
    spec = dataclasses.replace(preset("nominal"), disturbance_kind="uniform_noise", disturbance_magnitude=0.5)
    a, b = run_scenario(spec, PROPOSED, seed=5), run_scenario(spec, PROPOSED, seed=5)
    identical = a.equals(b)
    ok = report("C6", order >= 3.8 and drift <= 1e-8 and identical,
                f"RK4 observed order {order:.3f} (>=3.8, identical switching {same_switching}), "
                f"10 s torque-free energy drift {drift:.2e} (<=1e-8), identical-seed logs bit-identical: {identical}")
    assert ok


def test_c7_property_suites(report):
    rng = np.random.default_rng(7)
    n = 2000
    solo = QuadParams()
    cfg = SlidingConfig()

    rot = max(max(np.max(np.abs((R := rotation_matrix(th)).T @ R - np.eye(3))), abs(np.linalg.det(R) - 1))
              for th in rng.uniform(-np.pi, np.pi, (n, 3)))

    mix = 0.0
    for F in rng.uniform(0, solo.f_max, (n, 4)):
        torque, thrust = mix_forces(F, solo)
        mix = max(mix, np.max(np.abs(unmix_torques(torque, thrust, solo) - F)))

    path = 0.0
    for _ in range(n):
        params = solo.with_inertia(rng.uniform(1e-3, 5e-2, 3))
        state = AttitudeState(rng.uniform(-1, 1, 3), rng.normal(scale=5, size=3))
        u, d = rng.normal(scale=0.5, size=3), rng.normal(scale=0.5, size=3)
        a = attitude_accel(state, u, d, params, general=False)
        b = attitude_accel(state, u, d, params, general=True)
        path = max(path, np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a))))

    sigma, sigma_dot = rng.normal(size=n), rng.normal(size=n)
    alpha = rng.uniform(2.001, 2.12, n)
    out = twisting_term(sigma, sigma_dot, alpha, 0.25)
    two_valued = bool(np.all(np.isclose(out, -0.25 * alpha * np.sign(sigma), rtol=0, atol=1e-15)
                             ^ np.isclose(out, -alpha * np.sign(sigma), rtol=0, atol=1e-15)))

    dt, smax = SimConfig().dt_ctrl, 3.0
    lo = cfg.arr("alpha_m") - undershoot_allowance(cfg, dt, smax)
    hi = cfg.arr("alpha_M")
    bounded = True
    for _ in range(n):
        nxt = adapt_gain(rng.uniform(lo, hi), rng.uniform(-smax, smax, 3), cfg, dt)
        bounded &= bool(np.all(nxt >= lo) and np.all(nxt <= hi))

    ok = report("C7", rot <= 1e-12 and mix <= 1e-12 and path <= 1e-12 and two_valued and bounded,
                f"{n} cases each: rotation {rot:.1e}, mixer round-trip {mix:.1e}, accel paths {path:.1e} "
                f"(all <=1e-12), twisting two-valued {two_valued}, gain bounds preserved {bounded}")
    assert ok

