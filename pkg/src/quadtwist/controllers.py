"""
Sliding-mode attitude controllers.

Every controller shares the same structure ``u = sat(u_eq + u_D)``: the
equivalent control cancels the nominal rigid-body dynamics and the
discontinuous part ``u_D`` is what differs between kinds:

========================  ==================================================
kind                      discontinuous term
========================  ==================================================
``smc``                   ``-K sign(sigma)``
``twisting``              twisting law with a fixed gain
``atsm``                  twisting law, gain ``max(alpha_*, gamma |sigma|^rho)``
``adaptive-twisting``     twisting law, gain integrated by :func:`adapt_gain`
``pid``                   no equivalent control; per-axis angle PID
========================  ==================================================

All vector quantities are ordered (roll, pitch, yaw).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .dynamics import AttitudeState, QuadParams, coupling_torque
from .errors import ValidationError


class ControllerKind(str, enum.Enum):
    SMC = "smc"
    TWIST_FIXED = "twisting"
    ATSM = "atsm"
    ATSM_ADAPTIVE = "adaptive-twisting"
    PID = "pid"

    @classmethod
    def parse(cls, value) -> "ControllerKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"proposed": cls.ATSM_ADAPTIVE, "atsm-adaptive": cls.ATSM_ADAPTIVE, "twist-fixed": cls.TWIST_FIXED}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValidationError(f"unknown controller {value!r} (expected one of {names})") from None


SIGMA_DOT_SOURCES = ("model", "difference")

_TRIPLES = (
    "lam", "mu", "rho", "epsilon", "omega_bar", "alpha_m", "alpha_M", "eta", "Xi_M",
    "gamma_accel", "gamma_lyap", "alpha_star", "alpha_fixed", "k_smc", "pid_kp", "pid_ki", "pid_kd",
)


def _triple(value):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (3,))
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class SlidingConfig:
    """Controller constants. Defaults reproduce the Solo attitude tuning.

    Per-axis fields accept a scalar (broadcast) or three values.
    """

    lam: tuple = (4.68, 4.68, 3.84)
    mu: tuple = (0.25, 0.25, 0.25)
    rho: tuple = (3.0, 3.0, 3.0)
    epsilon: tuple = (0.6, 0.6, 0.6)
    omega_bar: tuple = (200.0, 200.0, 200.0)
    alpha_m: tuple = (2.001, 2.001, 2.001)
    alpha_M: tuple = (2.12, 2.12, 2.12)
    eta: tuple = (0.01, 0.01, 0.01)
    Xi_M: tuple = (0.5, 0.5, 0.5)
    # gamma in the accelerated-gain rule and gamma in V are kept separate
    gamma_accel: tuple = (1.0, 1.0, 1.0)
    gamma_lyap: tuple = (1.0, 1.0, 1.0)
    alpha_star: tuple = (2.0, 2.0, 2.0)
    alpha_fixed: tuple = (2.001, 2.001, 2.001)
    k_smc: tuple = (2.0, 2.0, 2.0)
    pid_kp: tuple = (6.0, 6.0, 6.0)
    pid_ki: tuple = (0.0, 0.0, 0.0)
    pid_kd: tuple = (3.0, 3.0, 3.0)
    sigma_dot_source: str = "difference"

    def __post_init__(self):
        for name in _TRIPLES:
            object.__setattr__(self, name, _triple(getattr(self, name)))
        self.validate()
        arrays = {}
        for name in _TRIPLES:
            arrays[name] = np.array(getattr(self, name))
            arrays[name].flags.writeable = False
        object.__setattr__(self, "_arrays", arrays)
        object.__setattr__(self, "_consts", {name: getattr(self, name) for name in _TRIPLES})

    def validate(self) -> None:
        def positive(name):
            vals = np.array(getattr(self, name))
            if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
                raise ValidationError(f"{name} must be positive on every axis, got {list(vals)}")

        for name in ("lam", "rho", "epsilon", "omega_bar", "eta", "Xi_M", "gamma_accel",
                     "gamma_lyap", "alpha_star", "alpha_fixed", "k_smc"):
            positive(name)
        mu = np.array(self.mu)
        if np.any(mu <= 0) or np.any(mu >= 1):
            raise ValidationError(f"mu must lie in (0, 1), got {list(mu)}")
        a_m, a_M = np.array(self.alpha_m), np.array(self.alpha_M)
        if np.any(a_m <= 0) or np.any(a_m >= a_M):
            raise ValidationError(f"need 0 < alpha_m < alpha_M, got {list(a_m)} / {list(a_M)}")
        if np.any(a_m < np.array(self.Xi_M) / mu):
            raise ValidationError("alpha_m must be at least Xi_M / mu so the reaching condition holds")
        for name in ("pid_kp", "pid_ki", "pid_kd"):
            if np.any(np.array(getattr(self, name)) < 0):
                raise ValidationError(f"{name} must be non-negative")
        if self.sigma_dot_source not in SIGMA_DOT_SOURCES:
            raise ValidationError(f"sigma_dot_source must be one of {SIGMA_DOT_SOURCES}")

    def arr(self, name: str) -> np.ndarray:
        """Read-only numpy view of a per-axis field."""
        return self._arrays[name]


@dataclass(frozen=True)
class Reference:
    """Desired angles with their first and second derivatives."""

    X_1d: np.ndarray = field(default_factory=lambda: np.zeros(3))
    X_1d_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    X_1d_ddot: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("X_1d", "X_1d_dot", "X_1d_ddot"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))


@dataclass(frozen=True)
class AdaptiveGainState:
    """Everything a controller carries from one update to the next.

    ``alpha`` is the adaptive twisting gain; ``u_prev`` and ``sigma_prev``
    feed the sliding-variable derivative; ``integral`` is the PID integrator.
    """

    alpha: np.ndarray
    u_prev: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sigma_prev: np.ndarray | None = None
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def initial(cls, cfg: SlidingConfig) -> "AdaptiveGainState":
        return cls(alpha=cfg.arr("alpha_m"))


@dataclass(frozen=True)
class ControlOutput:
    u: np.ndarray
    u_eq: np.ndarray
    u_D: np.ndarray
    sigma: np.ndarray
    sigma_dot: np.ndarray
    alpha: np.ndarray
    saturated: np.ndarray


def sign(x):
    """``np.sign`` with the explicit convention sign(0) = 0."""
    return np.sign(x)


def tracking_error(state: AttitudeState, ref: Reference):
    """Angle error ``e`` and its rate, taking ``Theta_dot = omega``."""
    return state.Theta - ref.X_1d, state.omega - ref.X_1d_dot


def sliding_surface(state: AttitudeState, ref: Reference, cfg: SlidingConfig,
                    params: QuadParams | None = None, u_prev=None):
    """Sliding variable and its model-based rate.

    ``sigma = e_dot + Lambda e``. ``sigma_dot`` follows from the nominal
    (diagonal-inertia, disturbance-free) model driven by ``u_prev``:
    ``-X_1d_ddot + I^-1 (f(X) + u_prev) + Lambda e_dot``. Without ``params``
    the rate is returned as zeros.
    """
    lam = cfg.arr("lam")
    e, e_dot = tracking_error(state, ref)
    sigma = e_dot + lam * e
    if params is None:
        return sigma, np.zeros(3)
    u_prev = np.zeros(3) if u_prev is None else np.asarray(u_prev, dtype=float)
    I_nom = params.inertia_diag
    accel = (coupling_torque(state.omega, I_nom) + u_prev) / I_nom
    sigma_dot = -ref.X_1d_ddot + accel + lam * e_dot
    return sigma, sigma_dot


def equivalent_control(state: AttitudeState, ref: Reference, cfg: SlidingConfig, params: QuadParams) -> np.ndarray:
    """``I (X_1d_ddot - Lambda e_dot) - f(X)`` with the nominal diagonal inertia."""
    _, e_dot = tracking_error(state, ref)
    I_nom = params.inertia_diag
    return I_nom * (ref.X_1d_ddot - cfg.arr("lam") * e_dot) - coupling_torque(state.omega, I_nom)


def twisting_term(sigma, sigma_dot, alpha, mu):
    """Twisting switching law, elementwise.

    Gain ``mu * alpha`` while ``sigma`` is heading to zero
    (``sigma * sigma_dot <= 0``), full ``alpha`` otherwise.
    """
    sigma = np.asarray(sigma, dtype=float)
    converging = sigma * np.asarray(sigma_dot, dtype=float) <= 0
    gain = np.where(converging, np.asarray(mu) * np.asarray(alpha), np.asarray(alpha, dtype=float))
    return -gain * sign(sigma)


def accelerated_gain(sigma, gamma, rho, alpha_star):
    """One-stage accelerated twisting gain ``max(alpha_*, gamma |sigma|^rho)``."""
    return np.maximum(alpha_star, np.asarray(gamma) * np.abs(sigma) ** np.asarray(rho))


def gain_rate(alpha, sigma, cfg: SlidingConfig) -> np.ndarray:
    """Right-hand side of the gain adaptation ODE."""
    alpha = np.asarray(alpha, dtype=float)
    mag = np.abs(np.asarray(sigma, dtype=float))
    grow_or_decay = cfg.arr("omega_bar") * mag * sign(mag ** cfg.arr("rho") - cfg.arr("epsilon"))
    return np.where(alpha > cfg.arr("alpha_m"), grow_or_decay, cfg.arr("eta"))


def adapt_gain(alpha, sigma, cfg: SlidingConfig, dt: float) -> np.ndarray:
    """One explicit-Euler step of the adaptation ODE, capped at ``alpha_M``.

    There is no lower clamp: starting above ``alpha_m`` the step can undershoot
    it by at most ``omega_bar |sigma| dt``, after which the ``eta`` branch
    pulls the gain back up.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    stepped = np.asarray(alpha, dtype=float) + dt * gain_rate(alpha, sigma, cfg)
    return np.minimum(stepped, cfg.arr("alpha_M"))


def undershoot_allowance(cfg: SlidingConfig, dt: float, sigma_max) -> np.ndarray:
    """Largest dip below ``alpha_m`` one Euler step can produce."""
    return cfg.arr("omega_bar") * dt * np.abs(np.asarray(sigma_max, dtype=float))


def lyapunov_value(sigma, alpha, cfg: SlidingConfig, params: QuadParams) -> float:
    """``0.5 sigma' I sigma + sum (alpha_i - alpha_M_i)^2 / (2 gamma_i)``; monitoring only."""
    sigma = np.asarray(sigma, dtype=float)
    gap = np.asarray(alpha, dtype=float) - cfg.arr("alpha_M")
    return float(0.5 * sigma @ params.inertia @ sigma + np.sum(gap ** 2 / (2.0 * cfg.arr("gamma_lyap"))))


def _sgn(x: float) -> float:
    return 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)


def control_law(kind: ControllerKind, cfg: SlidingConfig, I_nom, tau_max: float, dt: float,
                Theta, omega, X_1d, X_1d_dot, X_1d_ddot, alpha, u_prev, sigma_prev, integral):
    """Float-only control update shared by :func:`controller_step` and the simulator.

    Sequences are length-3 (roll, pitch, yaw); ``sigma_prev`` may be ``None``
    on the first call. Returns a dict of 3-lists with keys ``u, u_eq, u_D,
    sigma, sigma_dot, alpha, sat, alpha_next, integral``.
    """
    c = cfg._consts
    Ixx, Iyy, Izz = I_nom
    p, q, r = omega
    f = ((Iyy - Izz) * q * r, (Izz - Ixx) * p * r, (Ixx - Iyy) * p * q)
    differenced = cfg.sigma_dot_source == "difference" and sigma_prev is not None
    keys = ("u", "u_eq", "u_D", "sigma", "sigma_dot", "alpha", "sat", "alpha_next", "integral")
    res = {k: [0.0, 0.0, 0.0] for k in keys}
    for i in range(3):
        lam, Ii = c["lam"][i], I_nom[i]
        e = Theta[i] - X_1d[i]
        e_dot = omega[i] - X_1d_dot[i]
        sigma = e_dot + lam * e
        if differenced:
            sigma_dot = (sigma - sigma_prev[i]) / dt
        else:
            sigma_dot = -X_1d_ddot[i] + (f[i] + u_prev[i]) / Ii + lam * e_dot
        a = alpha[i]
        a_next = a
        integ = integral[i]
        if kind is ControllerKind.PID:
            integ = integ + e * dt
            u_eq = 0.0
            u_D = -(c["pid_kp"][i] * e + c["pid_ki"][i] * integ + c["pid_kd"][i] * e_dot)
        else:
            u_eq = Ii * (X_1d_ddot[i] - lam * e_dot) - f[i]
            if kind is ControllerKind.SMC:
                a = c["k_smc"][i]
                u_D = -a * _sgn(sigma)
            else:
                if kind is ControllerKind.TWIST_FIXED:
                    a = c["alpha_fixed"][i]
                elif kind is ControllerKind.ATSM:
                    a = max(c["alpha_star"][i], c["gamma_accel"][i] * abs(sigma) ** c["rho"][i])
                gain = c["mu"][i] * a if sigma * sigma_dot <= 0 else a
                u_D = -gain * _sgn(sigma)
                if kind is ControllerKind.ATSM_ADAPTIVE:
                    mag = abs(sigma)
                    if a > c["alpha_m"][i]:
                        rate = c["omega_bar"][i] * mag * _sgn(mag ** c["rho"][i] - c["epsilon"][i])
                    else:
                        rate = c["eta"][i]
                    a_next = min(a + dt * rate, c["alpha_M"][i])
        raw = u_eq + u_D
        res["u"][i] = min(max(raw, -tau_max), tau_max)
        res["sat"][i] = abs(raw) > tau_max
        res["u_eq"][i] = u_eq
        res["u_D"][i] = u_D
        res["sigma"][i] = sigma
        res["sigma_dot"][i] = sigma_dot
        res["alpha"][i] = a
        res["alpha_next"][i] = a_next
        res["integral"][i] = integ
    return res


def controller_step(kind, state: AttitudeState, ref: Reference, gain_state: AdaptiveGainState,
                    cfg: SlidingConfig, params: QuadParams, dt: float):
    """Evaluate one control update.

    ``params`` is the controller's model of the vehicle; only its principal
    moments are used. Returns the :class:`ControlOutput` and the state to pass
    to the next call. The gain is only integrated for the adaptive kind, and
    ``u`` is saturated at ``params.tau_max`` after summing both parts.
    """
    kind = ControllerKind.parse(kind)
    res = control_law(
        kind, cfg, tuple(params.inertia_diag.tolist()), params.tau_max, dt,
        state.Theta.tolist(), state.omega.tolist(),
        ref.X_1d.tolist(), ref.X_1d_dot.tolist(), ref.X_1d_ddot.tolist(),
        np.asarray(gain_state.alpha, dtype=float).tolist(), np.asarray(gain_state.u_prev, dtype=float).tolist(),
        None if gain_state.sigma_prev is None else np.asarray(gain_state.sigma_prev, dtype=float).tolist(),
        np.asarray(gain_state.integral, dtype=float).tolist(),
    )
    out = ControlOutput(
        u=np.array(res["u"]), u_eq=np.array(res["u_eq"]), u_D=np.array(res["u_D"]),
        sigma=np.array(res["sigma"]), sigma_dot=np.array(res["sigma_dot"]),
        alpha=np.array(res["alpha"]), saturated=np.array(res["sat"], dtype=bool),
    )
    new_state = AdaptiveGainState(alpha=np.array(res["alpha_next"]), u_prev=out.u,
                                  sigma_prev=out.sigma, integral=np.array(res["integral"]))
    return out, new_state
