"""
Fixed-step closed-loop simulation.

The plant is integrated at ``dt_plant`` with RK4 (or explicit Euler) while
the controller runs every ``dt_ctrl`` and its torque is held constant in
between. The inner loop works on plain floats; going through numpy for
3-vectors costs more than the arithmetic itself at these step sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controllers import ControllerKind, Reference, SlidingConfig, control_law
from .dynamics import AttitudeState, QuadParams, _check_inertia
from .errors import GimbalLock, NumericalBlowup, QuadTwistError, ValidationError

BLOWUP_LIMIT = 1e6
AXES = ("phi", "theta", "psi")
INTEGRATORS = ("rk4", "euler")
KINEMATICS = ("approx", "full")
DISTURBANCE_KINDS = ("none", "constant_bias", "uniform_noise")


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    The defaults run the controller at 20 kHz with two RK4 plant substeps.
    The twisting term is a relay on a relative-degree-one surface, so its
    discrete-time limit cycle leaves a residual tracking offset that shrinks
    linearly with ``dt_ctrl``; at 1 kHz that offset on roll is about a degree.
    """

    dt_plant: float = 2.5e-5
    dt_ctrl: float = 5e-5
    t_end: float = 5.0
    integrator: str = "rk4"
    seed: int = 0
    kinematics: str = "approx"

    def __post_init__(self):
        if not (self.dt_plant > 0 and self.dt_ctrl > 0 and self.t_end > 0):
            raise ValidationError("dt_plant, dt_ctrl and t_end must be positive")
        if self.dt_plant > self.dt_ctrl * (1 + 1e-12):
            raise ValidationError("dt_plant must not exceed dt_ctrl")
        ratio = self.dt_ctrl / self.dt_plant
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValidationError(f"dt_ctrl must be an integer multiple of dt_plant (ratio {ratio})")
        if self.integrator not in INTEGRATORS:
            raise ValidationError(f"integrator must be one of {INTEGRATORS}")
        if self.kinematics not in KINEMATICS:
            raise ValidationError(f"kinematics must be one of {KINEMATICS}")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_ctrl / self.dt_plant))

    @property
    def n_ctrl(self) -> int:
        return int(round(self.t_end / self.dt_ctrl))


@dataclass(frozen=True)
class StepEvent:
    time: float
    axis: int
    target: float  # rad


@dataclass(frozen=True)
class ReferenceSchedule:
    """Piecewise-constant angle references built from step events."""

    events: tuple = ()

    def __post_init__(self):
        events = tuple(e if isinstance(e, StepEvent) else StepEvent(float(e[0]), int(e[1]), float(e[2]))
                       for e in self.events)
        object.__setattr__(self, "events", events)
        times = [e.time for e in events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValidationError("reference events must be ordered by time")
        for e in events:
            if e.axis not in (0, 1, 2):
                raise ValidationError(f"axis must be 0, 1 or 2, got {e.axis}")
            limit = math.pi if e.axis == 2 else math.pi / 2
            if not abs(e.target) < limit + (1e-12 if e.axis == 2 else 0):
                raise ValidationError(f"target {e.target} rad outside the admissible range for axis {e.axis}")

    def angles_at(self, t: float, tol: float = 1e-9) -> np.ndarray:
        angles = np.zeros(3)
        for e in self.events:
            if e.time <= t + tol:
                angles[e.axis] = e.target
        return angles

    def reference_at(self, t: float) -> Reference:
        return Reference(self.angles_at(t))

    def previous_target(self, index: int) -> float:
        """Target on the event's axis just before event ``index`` fires."""
        event = self.events[index]
        value = 0.0
        for e in self.events[:index]:
            if e.axis == event.axis:
                value = e.target
        return value


@dataclass(frozen=True)
class Disturbance:
    """Torque disturbance with an optional per-axis magnitude bound."""

    d: np.ndarray
    bound: np.ndarray | None = None

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float).reshape(3)
        if self.bound is not None:
            bound = np.broadcast_to(np.asarray(self.bound, dtype=float), (3,))
            if np.any(np.abs(d) > bound):
                raise ValidationError(f"disturbance {d.tolist()} exceeds bound {bound.tolist()}")
            object.__setattr__(self, "bound", bound)
        object.__setattr__(self, "d", d)


class DisturbanceSource:
    """Deterministic disturbance stream indexed by plant step.

    ``uniform_noise`` draws i.i.d. values in ``[0.8 m, 1.2 m]`` per axis per
    plant step from a generator seeded with ``seed``.
    """

    _BLOCK = 65536

    def __init__(self, kind: str = "none", magnitude: float = 0.0, seed: int = 0):
        if kind not in DISTURBANCE_KINDS:
            raise ValidationError(f"disturbance kind must be one of {DISTURBANCE_KINDS}")
        if magnitude < 0:
            raise ValidationError("disturbance magnitude must be non-negative")
        self.kind = kind
        self.magnitude = float(magnitude)
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._samples = np.empty((0, 3))
        self._constant = (self.magnitude,) * 3 if kind == "constant_bias" else (0.0, 0.0, 0.0)

    def _extend(self, n: int) -> None:
        while len(self._samples) < n:
            block = self._rng.uniform(0.8 * self.magnitude, 1.2 * self.magnitude, size=(self._BLOCK, 3))
            self._samples = np.vstack([self._samples, block])

    def sample(self, k: int):
        """Disturbance tuple for plant step ``k``."""
        if self.kind != "uniform_noise":
            return self._constant
        if k >= len(self._samples):
            self._extend(k + 1)
        return tuple(self._samples[k])


def disturbance_source(kind: str, magnitude: float, seed: int, t: float, dt: float = 2.5e-5) -> Disturbance:
    """Disturbance at time ``t`` of the stream ``DisturbanceSource(kind, magnitude, seed)``."""
    k = int(round(t / dt))
    return Disturbance(DisturbanceSource(kind, magnitude, seed).sample(k))


def _make_rhs(params: QuadParams, kinematics: str):
    """Float-only state derivative ``rhs(x, u, d) -> list``.

    Mirrors :func:`quadtwist.dynamics.state_derivative`.
    """
    inertia = params.inertia
    _check_inertia(inertia)
    full = kinematics == "full"
    if params.is_diagonal:
        Ixx, Iyy, Izz = (float(v) for v in np.diag(inertia))

        def accel(p, q, r, tx, ty, tz):
            return (((Iyy - Izz) * q * r + tx) / Ixx,
                    ((Izz - Ixx) * p * r + ty) / Iyy,
                    ((Ixx - Iyy) * p * q + tz) / Izz)
    else:
        (a, b, c), (_, e, f), (_, _, i) = inertia.tolist()
        inv = np.linalg.inv(inertia).tolist()
        (j00, j01, j02), (j10, j11, j12), (j20, j21, j22) = inv

        def accel(p, q, r, tx, ty, tz):
            hx = a * p + b * q + c * r
            hy = b * p + e * q + f * r
            hz = c * p + f * q + i * r
            # -omega x (I omega)
            gx = -(q * hz - r * hy) + tx
            gy = -(r * hx - p * hz) + ty
            gz = -(p * hy - q * hx) + tz
            return (j00 * gx + j01 * gy + j02 * gz,
                    j10 * gx + j11 * gy + j12 * gz,
                    j20 * gx + j21 * gy + j22 * gz)

    def rhs(x, u, d):
        phi, theta, _, p, q, r = x
        if full:
            cth = math.cos(theta)
            if abs(cth) < 1e-6:
                raise GimbalLock(f"pitch {math.degrees(theta):.6f} deg is at the Euler singularity")
            sphi, cphi, tth = math.sin(phi), math.cos(phi), math.tan(theta)
            rates = (p + sphi * tth * q + cphi * tth * r, cphi * q - sphi * r, (sphi * q + cphi * r) / cth)
        else:
            rates = (p, q, r)
        acc = accel(p, q, r, u[0] + d[0], u[1] + d[1], u[2] + d[2])
        return (rates[0], rates[1], rates[2], acc[0], acc[1], acc[2])

    return rhs


def _rk4(rhs, x, u, d, h):
    k1 = rhs(x, u, d)
    k2 = rhs([xi + 0.5 * h * ki for xi, ki in zip(x, k1)], u, d)
    k3 = rhs([xi + 0.5 * h * ki for xi, ki in zip(x, k2)], u, d)
    k4 = rhs([xi + h * ki for xi, ki in zip(x, k3)], u, d)
    h6 = h / 6.0
    return [xi + h6 * (a + 2.0 * b + 2.0 * c + e) for xi, a, b, c, e in zip(x, k1, k2, k3, k4)]


def _euler(rhs, x, u, d, h):
    return [xi + h * ki for xi, ki in zip(x, rhs(x, u, d))]


_STEPPERS = {"rk4": _rk4, "euler": _euler}


def _check_state(x) -> None:
    for v in x:
        if not math.isfinite(v) or abs(v) > BLOWUP_LIMIT:
            raise NumericalBlowup(f"state component {v} is non-finite or exceeds {BLOWUP_LIMIT:g}")
    if abs(x[0]) >= math.pi / 2 or abs(x[1]) >= math.pi / 2 or abs(x[2]) > math.pi:
        raise NumericalBlowup(
            "attitude left the admissible envelope: " + ", ".join(f"{math.degrees(a):.2f} deg" for a in x[:3]))


def integrate_step(state: AttitudeState, u, d, params: QuadParams, dt: float,
                   kind: str = "rk4", kinematics: str = "approx") -> AttitudeState:
    """Advance the plant by ``dt`` with ``u`` and ``d`` held constant."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    rhs = _make_rhs(params, kinematics)
    x = _STEPPERS[kind](rhs, state.as_vector().tolist(), tuple(map(float, u)), tuple(map(float, d)), dt)
    for v in x:
        if not math.isfinite(v) or abs(v) > BLOWUP_LIMIT:
            raise NumericalBlowup(f"state component {v} is non-finite or exceeds {BLOWUP_LIMIT:g}")
    return AttitudeState.from_vector(x)


def integrate_open_loop(x0, u_seq, params: QuadParams, dt_hold: float, substeps: int,
                        kind: str = "rk4", kinematics: str = "approx", d=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Integrate a held torque sequence; returns the state at every hold boundary.

    Used for torque-free and replayed-input checks where no controller is in
    the loop.
    """
    rhs = _make_rhs(params, kinematics)
    step = _STEPPERS[kind]
    h = dt_hold / substeps
    x = [float(v) for v in x0]
    d = tuple(map(float, d))
    out = [list(x)]
    for u in np.asarray(u_seq, dtype=float).tolist():
        u = tuple(u)
        for _ in range(substeps):
            x = step(rhs, x, u, d, h)
        out.append(list(x))
    return np.array(out)


LOG_FIELDS = ("Theta", "omega", "ref", "sigma", "sigma_dot", "u", "u_eq", "u_D", "alpha", "d", "sat")


@dataclass
class RunLog:
    """Time series recorded at every control update.

    Angles and references are stored in rad here; the CSV writer converts
    angles to degrees.
    """

    t: np.ndarray
    Theta: np.ndarray
    omega: np.ndarray
    ref: np.ndarray
    sigma: np.ndarray
    sigma_dot: np.ndarray
    u: np.ndarray
    u_eq: np.ndarray
    u_D: np.ndarray
    alpha: np.ndarray
    d: np.ndarray
    V: np.ndarray
    sat: np.ndarray
    controller: str = ""
    scenario: str = ""
    schedule: ReferenceSchedule = field(default_factory=ReferenceSchedule)
    dt_ctrl: float = 1e-3
    meta: dict = field(default_factory=dict)
    failed: bool = False
    error: str = ""

    def __len__(self) -> int:
        return len(self.t)

    @property
    def error_angles(self) -> np.ndarray:
        return self.Theta - self.ref

    def index_at(self, t: float) -> int:
        return int(np.searchsorted(self.t, t - 1e-9 * self.dt_ctrl))

    def equals(self, other: "RunLog") -> bool:
        """Bit-for-bit equality of every recorded array."""
        names = ("t", "V") + LOG_FIELDS
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names) \
            and self.failed == other.failed


def run_closed_loop(kind, plant: QuadParams, cfg: SlidingConfig, sim: SimConfig,
                    schedule: ReferenceSchedule, disturbance: DisturbanceSource | None = None,
                    controller_params: QuadParams | None = None, scenario: str = "custom") -> RunLog:
    """Simulate the closed loop and return the full log.

    ``plant`` is the true vehicle; ``controller_params`` is what the
    controller believes (defaults to the plant with its off-diagonal inertia
    dropped). A :class:`~quadtwist.errors.NumericalBlowup` or
    :class:`~quadtwist.errors.GimbalLock` stops the run and yields a partial
    log with ``failed=True``.
    """
    kind = ControllerKind.parse(kind)
    if controller_params is None:
        controller_params = plant.with_inertia(np.diag(plant.inertia))
    disturbance = disturbance or DisturbanceSource()
    rhs = _make_rhs(plant, sim.kinematics)
    step = _STEPPERS[sim.integrator]
    h, nsub, n = sim.dt_plant, sim.substeps, sim.n_ctrl

    rows = {name: np.zeros((n + 1, 3)) for name in LOG_FIELDS}
    rows["sat"] = np.zeros((n + 1, 3), dtype=bool)
    V = np.zeros(n + 1)
    t = np.arange(n + 1) * sim.dt_ctrl

    I_nom = tuple(controller_params.inertia_diag.tolist())
    J = plant.inertia.tolist()
    alpha_M = cfg.alpha_M
    inv_2gamma = tuple(1.0 / (2.0 * g) for g in cfg.gamma_lyap)
    zero = (0.0, 0.0, 0.0)

    x = [0.0] * 6
    alpha = list(cfg.alpha_m)
    u_prev, sigma_prev, integral = [0.0] * 3, None, [0.0] * 3
    failed, error, last = False, "", n
    for k in range(n + 1):
        target = schedule.angles_at(t[k]).tolist()
        res = control_law(kind, cfg, I_nom, controller_params.tau_max, sim.dt_ctrl,
                          x[:3], x[3:], target, zero, zero, alpha, u_prev, sigma_prev, integral)
        sigma = res["sigma"]
        gap = [a - b for a, b in zip(res["alpha"], alpha_M)]
        V[k] = 0.5 * sum(sigma[a] * J[a][b] * sigma[b] for a in range(3) for b in range(3)) \
            + sum(g * g * w for g, w in zip(gap, inv_2gamma))
        rows["Theta"][k] = x[:3]
        rows["omega"][k] = x[3:]
        rows["ref"][k] = target
        rows["d"][k] = disturbance.sample(k * nsub)
        for name in ("sigma", "sigma_dot", "u", "u_eq", "u_D", "alpha", "sat"):
            rows[name][k] = res[name]
        if k == n:
            break
        alpha, u_prev, sigma_prev, integral = res["alpha_next"], res["u"], sigma, res["integral"]
        u = u_prev
        try:
            for j in range(nsub):
                x = step(rhs, x, u, disturbance.sample(k * nsub + j), h)
            _check_state(x)
        except QuadTwistError as exc:
            failed, error, last = True, f"t={t[k + 1]:.4f}s: {exc}", k
            break

    keep = slice(0, last + 1)
    return RunLog(
        t=t[keep], V=V[keep], **{name: arr[keep] for name, arr in rows.items()},
        controller=kind.value, scenario=scenario, schedule=schedule, dt_ctrl=sim.dt_ctrl,
        failed=failed, error=error,
    )
