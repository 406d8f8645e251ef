"""Rigid-body equations of motion, RK4 integration, and penalty contact.

State convention (NED): position/velocity in the inertial frame, attitude
as Z-Y'-X'' Euler angles, body rates about the body axes. Gravity is
+Z inertial.
"""

import math
from dataclasses import dataclass

import numpy as np

from .model import body_rotation, gravity_moment

PITCH_GUARD = math.pi / 2 - 1e-6


class DynamicsError(ValueError):
    pass


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass
class VehicleState:
    position_m: np.ndarray
    velocity_mps: np.ndarray
    attitude_rad: np.ndarray
    body_rates_radps: np.ndarray

    def __post_init__(self):
        self.position_m = np.asarray(self.position_m, dtype=float)
        self.velocity_mps = np.asarray(self.velocity_mps, dtype=float)
        self.attitude_rad = np.asarray(self.attitude_rad, dtype=float)
        self.body_rates_radps = np.asarray(self.body_rates_radps, dtype=float)
        for v in (self.position_m, self.velocity_mps,
                  self.attitude_rad, self.body_rates_radps):
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise DynamicsError("state components must be finite 3-vectors")
        phi, theta, psi = self.attitude_rad
        if not (abs(phi) < math.pi / 2 and abs(theta) < math.pi / 2):
            raise DynamicsError(
                f"attitude out of range: phi={phi:.4f}, theta={theta:.4f}")
        self.attitude_rad[2] = wrap_angle(psi)

    @classmethod
    def at_rest(cls, position=(0.0, 0.0, 0.0), yaw=0.0):
        return cls(np.asarray(position, dtype=float), np.zeros(3),
                   np.array([0.0, 0.0, yaw]), np.zeros(3))

    def to_vector(self):
        return np.concatenate([self.position_m, self.velocity_mps,
                               self.attitude_rad, self.body_rates_radps])

    @classmethod
    def from_vector(cls, x):
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:9].copy(), x[9:12].copy())

    def rotation(self):
        return body_rotation(*self.attitude_rad)

    def tilt_rad(self):
        """Angle between the body Z axis and vertical."""
        r = self.rotation()
        return math.acos(min(1.0, max(-1.0, r[2, 2])))


@dataclass
class Wrench:
    force_n: np.ndarray
    moment_nm: np.ndarray
    frame: str  # "body" | "inertial"

    def __post_init__(self):
        self.force_n = np.asarray(self.force_n, dtype=float)
        self.moment_nm = np.asarray(self.moment_nm, dtype=float)
        if self.frame not in ("body", "inertial"):
            raise DynamicsError(f"unknown frame tag {self.frame!r}")
        if not (np.all(np.isfinite(self.force_n))
                and np.all(np.isfinite(self.moment_nm))):
            raise DynamicsError("wrench components must be finite")

    def stacked(self):
        return np.concatenate([self.force_n, self.moment_nm])


def rate_matrix_forward(attitude):
    """Map from Euler rates to body rates: omega = W(Phi) Phidot."""
    phi, theta, _ = attitude
    cph, sph = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    return np.array([
        [1.0, 0.0, -sth],
        [0.0, cph, sph * cth],
        [0.0, -sph, cph * cth],
    ])


def euler_rate_matrix(attitude):
    """eta(Phi): Phidot = eta(Phi) omega.

    Exact inverse of the forward map (eta @ W == I); guarded away from the
    pitch singularity.
    """
    phi, theta, _ = attitude
    if abs(theta) >= PITCH_GUARD:
        raise DynamicsError(f"pitch {theta:.6f} too close to singularity")
    cph, sph = math.cos(phi), math.sin(phi)
    tth = math.tan(theta)
    sec = 1.0 / math.cos(theta)
    return np.array([
        [1.0, sph * tth, cph * tth],
        [0.0, cph, -sph],
        [0.0, sph * sec, cph * sec],
    ])


def euler_rate_matrix_dot(attitude, attitude_rate):
    """Time derivative of eta(Phi) given Phidot (analytic)."""
    phi, theta, _ = attitude
    dphi, dtheta, _ = attitude_rate
    cph, sph = math.cos(phi), math.sin(phi)
    cth = math.cos(theta)
    tth = math.tan(theta)
    sec = 1.0 / cth
    sec2 = sec * sec
    d_dphi = np.array([
        [0.0, cph * tth, -sph * tth],
        [0.0, -sph, -cph],
        [0.0, cph * sec, -sph * sec],
    ])
    d_dtheta = np.array([
        [0.0, sph * sec2, cph * sec2],
        [0.0, 0.0, 0.0],
        [0.0, sph * sec * tth, cph * sec * tth],
    ])
    return d_dphi * dphi + d_dtheta * dtheta


def total_wrench(model, attitude, u):
    """Body-frame wrench produced by rotor command u at the attitude."""
    u = np.asarray(u, dtype=float)
    force = model.L @ u
    moment = gravity_moment(model, attitude) + model.M @ u
    return Wrench(force, moment, "body")


def derivatives(model, state, u, ext_wrench=None):
    """State derivative (pdot, vdot, Phidot, omegadot) as a 12-vector.

    ext_wrench: optional body-frame Wrench applied in addition to the
    rotors (contact, tether, ...).
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DynamicsError("rotor command must be finite")
    r_ib = state.rotation()
    eta = euler_rate_matrix(state.attitude_rad)
    omega = state.body_rates_radps

    force_b = model.L @ u
    moment_b = gravity_moment(model, state.attitude_rad) + model.M @ u
    if ext_wrench is not None:
        force_b = force_b + ext_wrench.force_n
        moment_b = moment_b + ext_wrench.moment_nm

    accel = np.array([0.0, 0.0, model.gravity]) + r_ib @ force_b / model.mass_kg
    att_rate = eta @ omega
    i_omega = model.inertia @ omega
    gyro = np.array([omega[1] * i_omega[2] - omega[2] * i_omega[1],
                     omega[2] * i_omega[0] - omega[0] * i_omega[2],
                     omega[0] * i_omega[1] - omega[1] * i_omega[0]])
    omega_dot = model.inertia_inv @ (moment_b - gyro)
    return np.concatenate([state.velocity_mps, accel, att_rate, omega_dot])


def step_rk4(model, state, u, dt, ext_wrench=None, ext_wrench_fn=None):
    """Classical four-stage Runge-Kutta step; yaw renormalized afterwards.

    ext_wrench_fn(state) -> Wrench lets stage evaluations see
    state-dependent external loads (e.g. contact).
    """
    if not (0.0 < dt <= 0.05):
        raise DynamicsError(f"dt {dt} outside (0, 0.05]")

    def f(x):
        try:
            st = VehicleState.from_vector(x)
        except DynamicsError as exc:
            raise DynamicsError(
                f"state left valid attitude range mid-step: {exc}") from exc
        w = ext_wrench_fn(st) if ext_wrench_fn is not None else ext_wrench
        return derivatives(model, st, u, w)

    x0 = state.to_vector()
    k1 = f(x0)
    k2 = f(x0 + 0.5 * dt * k1)
    k3 = f(x0 + 0.5 * dt * k2)
    k4 = f(x0 + dt * k3)
    x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return VehicleState.from_vector(x1)


# ---------------------------------------------------------------------------
# Penalty contact


@dataclass
class ContactSurface:
    """Plane through `point_m` with unit outward normal (toward free space).

    Normal compliance is a spring-damper (k_wall, c_wall); tangential
    friction is Coulomb with coefficient mu.
    """

    point_m: np.ndarray
    normal: np.ndarray
    mu: float = 0.0
    k_wall: float = 5000.0
    c_wall: float = 50.0

    def __post_init__(self):
        self.point_m = np.asarray(self.point_m, dtype=float)
        self.normal = np.asarray(self.normal, dtype=float)
        n = np.linalg.norm(self.normal)
        if abs(n - 1.0) > 1e-9:
            raise DynamicsError("contact surface normal must be unit length")


def contact_force(surface, ee_position, ee_velocity):
    """Inertial contact wrench on the robot's end effector.

    Zero without penetration; otherwise a clamped spring-damper normal
    force plus Coulomb friction opposing the tangential velocity
    (below 1e-6 m/s tangential speed the friction is zero).
    """
    ee_position = np.asarray(ee_position, dtype=float)
    ee_velocity = np.asarray(ee_velocity, dtype=float)
    n = surface.normal
    depth = float(n @ (surface.point_m - ee_position))
    if depth <= 0.0:
        return Wrench(np.zeros(3), np.zeros(3), "inertial")
    approach_speed = float(-(ee_velocity @ n))
    fn = max(0.0, surface.k_wall * depth + surface.c_wall * approach_speed)
    force = fn * n
    v_t = ee_velocity - (ee_velocity @ n) * n
    speed_t = np.linalg.norm(v_t)
    if speed_t >= 1e-6 and fn > 0.0:
        force = force - surface.mu * fn * v_t / speed_t
    return Wrench(force, np.zeros(3), "inertial")
