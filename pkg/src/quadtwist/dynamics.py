"""
Rigid-body attitude model of the quadcopter.

Covers the Euler-rate transform, body-to-earth rotation, gyroscopic torque,
the four-rotor mixer and the attitude state derivative consumed by the
integrators in :mod:`quadtwist.sim`.

Conventions
-----------
* ``Theta = (phi, theta, psi)`` roll/pitch/yaw in rad, z axis pointing down.
* ``omega = (p, q, r)`` body rates in rad/s.
* Disturbances ``d`` are torques in N m added to the control torque.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GimbalLock, SingularInertia, Unrealizable, ValidationError

GIMBAL_TOL = 1e-6
COND_LIMIT = 1e12

# Solo airframe values
SOLO_MASS = 1.50
SOLO_ARM = 0.205
GRAVITY = 9.81
SOLO_INERTIA = (8.85e-3, 15.5e-3, 23.09e-3)


def _as_inertia(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape == (3,):
        arr = np.diag(arr)
    if arr.shape != (3, 3):
        raise ValidationError(f"inertia must be 3 diagonal entries or 3x3, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class QuadParams:
    """Physical constants of the vehicle.

    ``I`` is stored as a 3x3 nested tuple so the dataclass stays hashable and
    comparable; use :attr:`inertia` for the numpy view.
    """

    m: float = SOLO_MASS
    l: float = SOLO_ARM
    g: float = GRAVITY
    I: tuple = field(default_factory=lambda: tuple(map(tuple, np.diag(SOLO_INERTIA))))
    c: float = 0.01
    tau_max: float = 2.0
    f_max: float = 8.0

    def __post_init__(self):
        inertia = _as_inertia(self.I)
        object.__setattr__(self, "I", tuple(tuple(float(v) for v in row) for row in inertia))
        for name in ("m", "l", "c", "tau_max", "f_max"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive, got {value}")
        if not np.allclose(inertia, inertia.T, rtol=0, atol=1e-15):
            raise ValidationError("inertia matrix must be symmetric")
        if np.linalg.eigvalsh(inertia).min() <= 0:
            raise ValidationError("inertia matrix must be positive definite")
        inertia.flags.writeable = False
        diagonal = np.diag(inertia).copy()
        diagonal.flags.writeable = False
        object.__setattr__(self, "_inertia", inertia)
        object.__setattr__(self, "_diagonal", diagonal)

    @property
    def inertia(self) -> np.ndarray:
        """Read-only 3x3 inertia."""
        return self._inertia

    @property
    def inertia_diag(self) -> np.ndarray:
        return self._diagonal

    @property
    def is_diagonal(self) -> bool:
        return not np.any(self._inertia - np.diag(self._diagonal))

    @property
    def hover_thrust(self) -> float:
        return self.m * self.g

    def with_inertia(self, inertia) -> "QuadParams":
        return QuadParams(self.m, self.l, self.g, _as_inertia(inertia), self.c, self.tau_max, self.f_max)


@dataclass(frozen=True)
class AttitudeState:
    """Euler angles and body rates."""

    Theta: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "Theta", np.asarray(self.Theta, dtype=float).reshape(3))
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).reshape(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.Theta, self.omega])

    @classmethod
    def from_vector(cls, x) -> "AttitudeState":
        x = np.asarray(x, dtype=float)
        return cls(x[:3], x[3:6])

    def within_limits(self) -> bool:
        """Roll/pitch inside (-pi/2, pi/2), yaw inside [-pi, pi], all finite."""
        phi, theta, psi = self.Theta
        return bool(
            np.all(np.isfinite(self.as_vector()))
            and abs(phi) < np.pi / 2
            and abs(theta) < np.pi / 2
            and abs(psi) <= np.pi
        )


def euler_rate_matrix(Theta) -> np.ndarray:
    """Matrix ``W`` with ``omega = W @ Theta_dot``.

    Raises
    ------
    GimbalLock
        If ``|cos(theta)| < 1e-6``; the inverse map used in full-kinematics
        mode does not exist there.
    """
    phi, theta, _ = np.asarray(Theta, dtype=float)
    sphi, cphi = np.sin(phi), np.cos(phi)
    sth, cth = np.sin(theta), np.cos(theta)
    if abs(cth) < GIMBAL_TOL:
        raise GimbalLock(f"pitch {np.degrees(theta):.6f} deg is at the Euler singularity")
    return np.array([
        [1.0, 0.0, -sth],
        [0.0, cphi, cth * sphi],
        [0.0, -sphi, cth * cphi],
    ])


def euler_rates(Theta, omega) -> np.ndarray:
    """Invert :func:`euler_rate_matrix` in closed form: ``Theta_dot = W^-1 omega``."""
    phi, theta, _ = np.asarray(Theta, dtype=float)
    p, q, r = np.asarray(omega, dtype=float)
    cth = np.cos(theta)
    if abs(cth) < GIMBAL_TOL:
        raise GimbalLock(f"pitch {np.degrees(theta):.6f} deg is at the Euler singularity")
    sphi, cphi, tth = np.sin(phi), np.cos(phi), np.tan(theta)
    return np.array([
        p + sphi * tth * q + cphi * tth * r,
        cphi * q - sphi * r,
        (sphi * q + cphi * r) / cth,
    ])


def rotation_matrix(Theta) -> np.ndarray:
    """Body-to-earth rotation for ZYX Euler angles."""
    phi, theta, psi = np.asarray(Theta, dtype=float)
    sphi, cphi = np.sin(phi), np.cos(phi)
    sth, cth = np.sin(theta), np.cos(theta)
    spsi, cpsi = np.sin(psi), np.cos(psi)
    return np.array([
        [cpsi * cth, cpsi * sth * sphi - spsi * cphi, cpsi * sth * cphi + spsi * sphi],
        [spsi * cth, spsi * sth * sphi + cpsi * cphi, spsi * sth * cphi - cpsi * sphi],
        [-sth, cth * sphi, cth * cphi],
    ])


def skew(omega) -> np.ndarray:
    """Cross-product matrix: ``skew(w) @ v == np.cross(w, v)``."""
    p, q, r = np.asarray(omega, dtype=float)
    return np.array([
        [0.0, -r, q],
        [r, 0.0, -p],
        [-q, p, 0.0],
    ])


def gyro_torque(omega, I) -> np.ndarray:
    """Body gyroscopic torque ``-S(omega) I omega``."""
    omega = np.asarray(omega, dtype=float)
    return -skew(omega) @ (_as_inertia(I) @ omega)


def coupling_torque(omega, I) -> np.ndarray:
    """Component form of the gyroscopic coupling for a diagonal inertia.

    Only the diagonal of ``I`` is used (a 3-vector of principal moments is
    accepted too), which is exactly what the controller's nominal model
    assumes.
    """
    p, q, r = omega
    I = np.asarray(I, dtype=float)
    Ixx, Iyy, Izz = np.diag(I) if I.ndim == 2 else I
    return np.array([(Iyy - Izz) * q * r, (Izz - Ixx) * p * r, (Ixx - Iyy) * p * q])


def allocation_matrix(params: QuadParams) -> np.ndarray:
    """4x4 map from rotor thrusts (F1..F4) to (tau_phi, tau_theta, tau_psi, F)."""
    l, c = params.l, params.c
    return np.array([
        [0.0, l, 0.0, -l],
        [-l, 0.0, l, 0.0],
        [-c, c, -c, c],
        [1.0, 1.0, 1.0, 1.0],
    ])


def mix_forces(forces, params: QuadParams):
    """Rotor thrusts to body torques and total thrust.

    Returns
    -------
    torque : ndarray, shape (3,)
    thrust : float
    """
    out = allocation_matrix(params) @ np.asarray(forces, dtype=float)
    return out[:3], float(out[3])


def unmix_torques(u, thrust: float, params: QuadParams, tol: float = 1e-9) -> np.ndarray:
    """Rotor thrusts that realise torque ``u`` at total ``thrust``.

    Values within ``tol`` of the admissible range are snapped onto it; anything
    further out raises :class:`Unrealizable` carrying the raw thrusts.
    """
    rhs = np.append(np.asarray(u, dtype=float), float(thrust))
    forces = np.linalg.solve(allocation_matrix(params), rhs)
    if np.any(forces < -tol) or np.any(forces > params.f_max + tol):
        raise Unrealizable(
            f"motor thrusts {np.round(forces, 4).tolist()} outside [0, {params.f_max}] N",
            forces=forces,
        )
    return np.clip(forces, 0.0, params.f_max)


def _check_inertia(inertia: np.ndarray) -> None:
    if np.linalg.cond(inertia) > COND_LIMIT:
        raise SingularInertia(f"inertia condition number exceeds {COND_LIMIT:g}")


def attitude_accel(state: AttitudeState, u, d, params: QuadParams, *, general: bool | None = None) -> np.ndarray:
    """Angular acceleration ``I^-1 (f(X) + u + d)``.

    The diagonal-inertia case uses the per-axis component form; otherwise the
    full gyroscopic torque ``-S(omega) I omega`` is combined with a linear
    solve against the true inertia. ``general=True`` forces the matrix path
    (used to cross-check the two).
    """
    inertia = params.inertia
    _check_inertia(inertia)
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    if general is None:
        general = not params.is_diagonal
    if not general:
        return (coupling_torque(state.omega, inertia) + u + d) / np.diag(inertia)
    return np.linalg.solve(inertia, gyro_torque(state.omega, inertia) + u + d)


def state_derivative(state: AttitudeState, u, d, params: QuadParams, kinematics: str = "approx") -> AttitudeState:
    """Time derivative of the attitude state.

    ``kinematics="approx"`` uses ``Theta_dot = omega`` (small angles);
    ``"full"`` inverts the Euler-rate matrix and can raise :class:`GimbalLock`.
    """
    if kinematics == "approx":
        theta_dot = state.omega.copy()
    elif kinematics == "full":
        theta_dot = euler_rates(state.Theta, state.omega)
    else:
        raise ValueError(f"unknown kinematics mode {kinematics!r}")
    return AttitudeState(theta_dot, attitude_accel(state, u, d, params))


def kinetic_energy(omega, I) -> float:
    omega = np.asarray(omega, dtype=float)
    return 0.5 * float(omega @ _as_inertia(I) @ omega)
