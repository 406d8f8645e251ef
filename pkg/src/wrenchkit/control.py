"""Cascaded PID loops, dynamic-inversion allocation, prioritized
saturation, hybrid position-force combination, and the wrench optimizer.

Controllers hold their own integrator/history state and are single-owner;
everything else here is pure.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import wrenchset as ws
from .dynamics import (Wrench, euler_rate_matrix, euler_rate_matrix_dot,
                       wrap_angle)
from .model import body_rotation, gravity_moment


class ControlError(ValueError):
    pass


@dataclass
class PidGains:
    kp: np.ndarray
    ki: np.ndarray
    kd: np.ndarray
    integral_limit: np.ndarray
    output_limit: np.ndarray = None
    # integral separation: integrate only within this error band
    integral_band: float = math.inf

    def __post_init__(self):
        self.kp = np.asarray(self.kp, dtype=float)
        self.ki = np.asarray(self.ki, dtype=float)
        self.kd = np.asarray(self.kd, dtype=float)
        self.integral_limit = np.asarray(self.integral_limit, dtype=float)
        if self.output_limit is not None:
            self.output_limit = np.asarray(self.output_limit, dtype=float)
        if np.any(self.kp < 0) or np.any(self.ki < 0) or np.any(self.kd < 0):
            raise ControlError("gains must be non-negative")


def _integrate_conditional(integral, err, dt, raw, clipped, limit):
    """Clamped integration that freezes any axis whose error would push the
    already-saturated output further into saturation."""
    advance = (raw == clipped) | (np.sign(err) != np.sign(raw))
    return np.clip(integral + np.where(advance, err * dt, 0.0),
                   -limit, limit)


class PositionPid:
    """Outer position loop: desired inertial force with gravity compensated.

    Derivative acts on the velocity measurement (no setpoint kick); the
    integrator is clamped element-wise and frozen while saturated.
    """

    def __init__(self, gains, mass_kg, gravity):
        self.gains = gains
        self.mass_kg = mass_kg
        self.gravity = gravity
        self.integral = np.zeros(3)

    def reset(self):
        self.integral = np.zeros(3)

    def update(self, state, position_sp, velocity_sp, dt):
        if dt <= 0:
            raise ControlError("dt must be positive")
        g = self.gains
        err = np.asarray(position_sp, dtype=float) - state.position_m
        vel_err = np.asarray(velocity_sp, dtype=float) - state.velocity_mps
        raw = g.kp * err + g.ki * self.integral + g.kd * vel_err
        accel = raw
        if g.output_limit is not None:
            accel = np.clip(raw, -g.output_limit, g.output_limit)
        self.integral = _integrate_conditional(
            self.integral, err, dt, raw, accel, g.integral_limit)
        return self.mass_kg * (accel - np.array([0.0, 0.0, self.gravity]))


class AttitudePid:
    """Inner attitude loop on Euler-angle error; yaw error wraps to the
    shortest arc. Output is the desired Euler angular acceleration."""

    def __init__(self, gains):
        self.gains = gains
        self.integral = np.zeros(3)

    def reset(self):
        self.integral = np.zeros(3)

    def update(self, state, setpoint, dt):
        if dt <= 0:
            raise ControlError("dt must be positive")
        g = self.gains
        err = np.asarray(setpoint.euler, dtype=float) - state.attitude_rad
        err[2] = wrap_angle(err[2])
        att_rate = euler_rate_matrix(state.attitude_rad) @ state.body_rates_radps
        raw = g.kp * err + g.ki * self.integral - g.kd * att_rate
        out = raw
        if g.output_limit is not None:
            out = np.clip(raw, -g.output_limit, g.output_limit)
        self.integral = _integrate_conditional(
            self.integral, err, dt, raw, out, g.integral_limit)
        return out


@dataclass
class AccelSetpoint:
    linear_accel_mps2: np.ndarray
    euler_accel_radps2: np.ndarray

    def __post_init__(self):
        self.linear_accel_mps2 = np.asarray(self.linear_accel_mps2, dtype=float)
        self.euler_accel_radps2 = np.asarray(self.euler_accel_radps2, dtype=float)


def output_map(model, state):
    """(J_y, drift) of the double-differentiated output [p; Phi]:
    ydd = drift + J_y u."""
    r_ib = state.rotation()
    eta = euler_rate_matrix(state.attitude_rad)
    omega = state.body_rates_radps
    att_rate = eta @ omega
    eta_dot = euler_rate_matrix_dot(state.attitude_rad, att_rate)
    mgrav = gravity_moment(model, state.attitude_rad)
    ib_inv = model.inertia_inv
    J_y = np.vstack([
        r_ib @ model.L / model.mass_kg,
        eta @ ib_inv @ model.M,
    ])
    drift = np.concatenate([
        [0.0, 0.0, model.gravity],
        eta_dot @ omega + eta @ ib_inv @ (
            mgrav - np.cross(omega, model.inertia @ omega)),
    ])
    return J_y, drift


def allocate(model, state, accel_sp):
    """Exact dynamic inversion: rotor command realizing the demanded output
    acceleration. Square systems solve exactly; redundant ones take the
    minimum-norm solution."""
    J_y, drift = output_map(model, state)
    rank = np.linalg.matrix_rank(J_y, tol=1e-12 * max(1.0, np.abs(J_y).max()))
    if rank < min(J_y.shape):
        raise ControlError("decoupling matrix is rank deficient at this state")
    ydd = np.concatenate([accel_sp.linear_accel_mps2,
                          accel_sp.euler_accel_radps2])
    u, *_ = np.linalg.lstsq(J_y, ydd - drift, rcond=None)
    return u


def allocate_wrench(model, attitude, f_sp_body, m_sp_body):
    """Solve [L; M] u = [F_sp; M_sp - M_grav] (minimum-norm when redundant).

    Returns (u, residual_norm); a nonzero residual means the request has a
    component outside the craft's wrench range space.
    """
    target = np.concatenate([
        np.asarray(f_sp_body, dtype=float),
        np.asarray(m_sp_body, dtype=float) - gravity_moment(model, attitude),
    ])
    A = model.allocation_matrix
    u, *_ = np.linalg.lstsq(A, target, rcond=None)
    residual = float(np.linalg.norm(A @ u - target))
    return u, residual


def _max_feasible_scale(base, step, u_min, u_max, tol):
    """Largest s in [0, 1] with u_min <= base + s*step <= u_max, or None."""
    lo, hi = 0.0, 1.0
    for i in range(len(base)):
        lo_i, hi_i = u_min[i] - base[i], u_max[i] - base[i]
        if abs(step[i]) <= tol:
            if lo_i > tol or hi_i < -tol:
                return None
            continue
        a, b = lo_i / step[i], hi_i / step[i]
        if a > b:
            a, b = b, a
        lo, hi = max(lo, a), min(hi, b)
    if lo > hi + 1e-12:
        return None
    return hi


def saturate_priority(model, u):
    """Bound the command to the rotor limits, prioritizing roll/pitch
    moments over yaw moment and thrust.

    The requested wrench is split into roll/pitch, yaw, and force parts;
    thrust is surrendered first (gamma), then yaw (beta); if the
    roll/pitch part alone is out of bounds it is scaled down (alpha).
    """
    u = np.asarray(u, dtype=float)
    u_min, u_max = model.u_min, model.u_max
    tol = 1e-9 * max(1.0, float(np.max(u_max)))
    if np.all(u >= u_min - tol) and np.all(u <= u_max + tol):
        return np.clip(u, u_min, u_max)

    A = model.allocation_matrix
    w = A @ u
    pinv = np.linalg.pinv(A)
    u_rp = pinv @ np.array([0, 0, 0, w[3], w[4], 0.0])
    u_yaw = pinv @ np.array([0, 0, 0, 0, 0, w[5]])
    u_thrust = pinv @ np.array([w[0], w[1], w[2], 0, 0, 0.0])

    # keep roll/pitch and yaw, give up thrust first
    gamma = _max_feasible_scale(u_rp + u_yaw, u_thrust, u_min, u_max, tol)
    if gamma is not None:
        return np.clip(u_rp + u_yaw + gamma * u_thrust, u_min, u_max)
    # then give up yaw
    beta = _max_feasible_scale(u_rp, u_yaw, u_min, u_max, tol)
    if beta is not None:
        return np.clip(u_rp + beta * u_yaw, u_min, u_max)
    # roll/pitch alone is infeasible: scale it
    alpha = _max_feasible_scale(np.zeros_like(u), u_rp, u_min, u_max, tol)
    if alpha is not None:
        return np.clip(alpha * u_rp, u_min, u_max)
    return np.clip(np.zeros_like(u), u_min, u_max)


class ForcePid:
    """Incremental (velocity-form) force PID in the contact frame.

    Measured end-effector forces are transformed to the contact frame; the
    loop emits changes to the last output, so engaging it from an
    arbitrary operating point is bumpless. kff feeds desired-force steps
    straight through.
    """

    def __init__(self, gains, kff=1.0):
        self.gains = gains
        self.kff = kff
        self.prev_error = np.zeros(3)
        self.prev_error2 = np.zeros(3)
        self.prev_desired = None

    def reset(self):
        self.prev_error = np.zeros(3)
        self.prev_error2 = np.zeros(3)
        self.prev_desired = None

    def update(self, measured_force_ee, desired_force_contact, r_ic, r_ie,
               dt, last_output_inertial):
        if dt <= 0:
            raise ControlError("dt must be positive")
        r_ic = np.asarray(r_ic, dtype=float)
        measured_c = r_ic.T @ (np.asarray(r_ie, dtype=float)
                               @ np.asarray(measured_force_ee, dtype=float))
        desired_c = np.asarray(desired_force_contact, dtype=float)
        err = desired_c - measured_c
        g = self.gains
        delta = (g.kp * (err - self.prev_error)
                 + g.ki * err * dt
                 + g.kd * (err - 2 * self.prev_error + self.prev_error2) / dt)
        if self.prev_desired is not None:
            delta = delta + self.kff * (desired_c - self.prev_desired)
        self.prev_error2 = self.prev_error
        self.prev_error = err
        self.prev_desired = desired_c
        last_c = r_ic.T @ np.asarray(last_output_inertial, dtype=float)
        return r_ic @ (last_c + delta)


@dataclass
class SelectionMatrices:
    """Diagonal 0/1 selection of contact-frame directions.

    s_p routes directions to the position path, s_f to the force path;
    their Hadamard product must vanish.
    """

    s_p: np.ndarray
    s_f: np.ndarray
    contact_rotation: np.ndarray

    def __post_init__(self):
        self.s_p = np.asarray(self.s_p, dtype=float)
        self.s_f = np.asarray(self.s_f, dtype=float)
        self.contact_rotation = np.asarray(self.contact_rotation, dtype=float)
        for m in (self.s_p, self.s_f):
            if m.shape != (3, 3) or np.any(m - np.diag(np.diagonal(m))):
                raise ControlError("selection matrices must be 3x3 diagonal")
            if not np.all(np.isin(np.diagonal(m), (0.0, 1.0))):
                raise ControlError("selection entries must be 0 or 1")
        if np.any(self.s_p * self.s_f):
            raise ControlError("selection matrices must not overlap")

    @classmethod
    def natural(cls, contact_rotation, force_axes=(2,)):
        """Complementary matrices: the given contact axes go to the force
        path, the rest to the position path."""
        s_f = np.zeros((3, 3))
        for ax in force_axes:
            s_f[ax, ax] = 1.0
        return cls(np.eye(3) - s_f, s_f, contact_rotation)


def hpfc_combine(f_pos_des_inertial, f_force_des_inertial, sel):
    """Merge position-path and force-path forces through the contact-frame
    selection: each contact direction is served by exactly one path."""
    r_ic = sel.contact_rotation
    r_ci = r_ic.T
    return r_ic @ (sel.s_p @ (r_ci @ np.asarray(f_pos_des_inertial, dtype=float))
                   + sel.s_f @ (r_ci @ np.asarray(f_force_des_inertial, dtype=float)))


PRESERVE_DIRECTION = "preserve_direction"
PRESERVE_MOMENT = "preserve_moment"


def default_anchor(model, attitude, wrench_set=None, tol=1e-7):
    """Feasible operating point for clipping: the zero-command wrench if it
    is attainable, else the gravity-compensating hover wrench."""
    wrench_set = wrench_set if wrench_set is not None else ws.wrench_set_6d(
        model, attitude)
    mgrav = gravity_moment(model, attitude)
    zero = np.concatenate([np.zeros(3), mgrav])
    if geo.contains(wrench_set, zero, tol):
        return Wrench(np.zeros(3), mgrav, "body")
    r_bi = body_rotation(*attitude).T
    hover_f = r_bi @ np.array([0.0, 0.0, -model.hover_thrust_n()])
    hover = np.concatenate([hover_f, np.zeros(3)])
    if geo.contains(wrench_set, hover, tol):
        return Wrench(hover_f, np.zeros(3), "body")
    raise ControlError("no feasible anchor wrench (zero and hover both outside)")


def wrench_optimize(model, attitude, f_sp_body, m_sp_body, anchor=None,
                    priority=PRESERVE_DIRECTION, wrench_set=None, tol=1e-6):
    """Pull an infeasible wrench setpoint back inside the wrench set.

    Feasible setpoints pass through unchanged. preserve_direction clips
    the 6-D ray from the anchor toward the setpoint; preserve_moment holds
    the requested moment exactly by slicing the set at it and clipping
    only the force (falling back to preserve_direction when the moment
    alone is unattainable).
    """
    if priority not in (PRESERVE_DIRECTION, PRESERVE_MOMENT):
        raise ControlError(f"unknown priority {priority!r}")
    f_sp = np.asarray(f_sp_body, dtype=float)
    m_sp = np.asarray(m_sp_body, dtype=float)
    W = wrench_set if wrench_set is not None else ws.wrench_set_6d(model, attitude)
    target = np.concatenate([f_sp, m_sp])
    if geo.contains(W, target, tol):
        return f_sp.copy(), m_sp.copy()

    if anchor is None:
        anchor = default_anchor(model, attitude, wrench_set=W)
    anchor6 = anchor.stacked()
    if not geo.contains(W, anchor6, max(tol, 1e-7)):
        raise ControlError("anchor wrench is infeasible")

    if priority == PRESERVE_MOMENT:
        sliced = _slice_at_moment(W, m_sp)
        if sliced is not None and not sliced.is_empty:
            if geo.contains(sliced, anchor.force_n, max(tol, 1e-7)):
                start = anchor.force_n
            else:
                start = geo.interior_point(sliced)
            f_new = geo.ray_clip(sliced, start, f_sp)
            return f_new, m_sp.copy()

    clipped = geo.ray_clip(W, anchor6, target)
    return clipped[:3], clipped[3:]


def _slice_at_moment(wrench_set, m_sp):
    # after each slice the next moment component is again coordinate 3
    poly = wrench_set
    for value in m_sp:
        poly = geo.slice_fix_coordinate(poly, 3, float(value))
        if poly.is_empty:
            return None
    return poly
