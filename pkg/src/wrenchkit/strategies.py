"""Attitude-setpoint and thrust-setpoint generation for fully-actuated craft.

Attitude strategies turn a yaw reference (plus strategy-specific inputs)
into a full orientation setpoint; thrust strategies turn the inertial
desired force into a body-frame setpoint honoring the lateral limit.
All functions are pure and stateless.
"""

import math
from dataclasses import dataclass

import numpy as np

from .model import body_rotation


class StrategyError(ValueError):
    pass


@dataclass(frozen=True)
class AttitudeSetpoint:
    rotation: np.ndarray  # R_IS
    euler: tuple          # (phi, theta, psi)

    @property
    def tilt_rad(self):
        return math.acos(min(1.0, max(-1.0, self.rotation[2, 2])))


@dataclass(frozen=True)
class ThrustSetpoint:
    force_body_n: np.ndarray


def rotation_to_euler(r):
    """Euler angles (Z-Y'-X'') of a rotation matrix; errors near gimbal lock."""
    r = np.asarray(r, dtype=float)
    if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
        raise StrategyError("matrix is not orthonormal")
    if abs(r[2, 0]) >= 1.0 - 1e-9:
        raise StrategyError("gimbal proximity: |sin(theta)| ~ 1")
    phi = math.atan2(r[2, 1], r[2, 2])
    theta = -math.asin(r[2, 0])
    psi = math.atan2(r[1, 0], r[0, 0])
    return phi, theta, psi


def _setpoint_from_rotation(r):
    return AttitudeSetpoint(rotation=r, euler=rotation_to_euler(r))


def _axes_from_z(k_s, psi_des):
    """X/Y setpoint axes from the yaw-rotated cross-product construction."""
    yaw_ref = np.array([-math.sin(psi_des), math.cos(psi_des), 0.0])
    cross = np.cross(yaw_ref, k_s)
    norm = np.linalg.norm(cross)
    if norm <= 1e-9:
        raise StrategyError("thrust direction parallel to the yaw reference")
    i_s = cross / norm
    j_s = np.cross(k_s, i_s)
    return np.column_stack([i_s, j_s, k_s])


def attitude_zero_tilt(psi_des):
    """Pure-yaw setpoint: the craft stays horizontal."""
    c, s = math.cos(psi_des), math.sin(psi_des)
    r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return AttitudeSetpoint(rotation=r, euler=(0.0, 0.0, psi_des))


def attitude_full_tilt(f_des_inertial, psi_des):
    """Setpoint Z axis opposite the desired thrust (underactuated-style)."""
    f = np.asarray(f_des_inertial, dtype=float)
    norm = np.linalg.norm(f)
    if norm <= 1e-6:
        raise StrategyError("near-zero desired thrust")
    k_s = -f / norm
    return _setpoint_from_rotation(_axes_from_z(k_s, psi_des))


def _rodrigues_z(axis, angle):
    """Rotate the inertial Z unit vector about `axis` by `angle`."""
    k = np.array([0.0, 0.0, 1.0])
    c, s = math.cos(angle), math.sin(angle)
    return ((1.0 - c) * (axis @ k) * axis + k * c + np.cross(axis, k) * s)


def attitude_min_tilt(f_des_inertial, psi_des, f_lmax):
    """Zero tilt while the lateral demand fits, else the minimum tilt that
    brings the residual demand within the lateral limit."""
    f = np.asarray(f_des_inertial, dtype=float)
    norm = np.linalg.norm(f)
    if norm <= 1e-6:
        raise StrategyError("near-zero desired thrust")
    horiz = math.hypot(f[0], f[1])
    if horiz <= f_lmax:
        return attitude_zero_tilt(psi_des)
    lam = math.asin(min(1.0, horiz / norm)) - math.asin(min(1.0, f_lmax / norm))
    axis = np.cross(f, [0.0, 0.0, 1.0])
    axis_norm = np.linalg.norm(axis)
    if axis_norm <= 1e-9:
        raise StrategyError("degenerate tilt axis")
    k_s = _rodrigues_z(axis / axis_norm, lam)
    return _setpoint_from_rotation(_axes_from_z(k_s, psi_des))


def attitude_fixed_tilt(lambda_des, kappa_des, psi_des):
    """Hold tilt `lambda_des` toward inertial direction `kappa_des`."""
    if not 0.0 <= lambda_des < math.pi / 2:
        raise StrategyError("tilt must be in [0, pi/2)")
    if lambda_des == 0.0:
        return attitude_zero_tilt(psi_des)
    axis = np.cross([math.cos(kappa_des), math.sin(kappa_des), 0.0],
                    [0.0, 0.0, 1.0])
    k_s = _rodrigues_z(axis, lambda_des)
    return _setpoint_from_rotation(_axes_from_z(k_s, psi_des))


def attitude_fixed(phi_des, theta_des, psi_des):
    """Direct Euler-angle setpoint."""
    r = body_rotation(phi_des, theta_des, psi_des)
    return AttitudeSetpoint(rotation=r, euler=(phi_des, theta_des, psi_des))


# ---------------------------------------------------------------------------
# Thrust setpoint strategies


def thrust_project(f_des_inertial, r_ib):
    """Plain rotation of the desired force into the body frame."""
    f = np.asarray(f_des_inertial, dtype=float)
    return ThrustSetpoint(force_body_n=np.asarray(r_ib).T @ f)


def _lateral_norm(v):
    return math.hypot(v[0], v[1])


def thrust_keep_vertical(f_des_inertial, attitude, f_lmax):
    """Clamp the lateral body demand while preserving the inertial vertical
    component exactly.

    The vertical and horizontal parts of the demand are projected
    separately; the horizontal part is rescaled to the lateral headroom
    left after the vertical part's share.
    """
    f = np.asarray(f_des_inertial, dtype=float)
    r_bi = body_rotation(*attitude).T
    f_sp = r_bi @ f
    if _lateral_norm(f_sp) <= f_lmax:
        return ThrustSetpoint(force_body_n=f_sp)

    f_ver_b = r_bi @ np.array([0.0, 0.0, f[2]])
    f_hor_b = r_bi @ np.array([f[0], f[1], 0.0])
    used = _lateral_norm(f_ver_b)
    if used > f_lmax:
        raise StrategyError(
            "vertical demand alone exceeds the lateral limit (vertical infeasible)")
    headroom = f_lmax - used
    lat = _lateral_norm(f_hor_b)
    scaled = (headroom / lat) * f_hor_b if lat > 0.0 else f_hor_b * 0.0
    return ThrustSetpoint(force_body_n=f_ver_b + scaled)


def thrust_keep_direction(f_des_inertial, attitude, f_lmax, f_hov):
    """Clamp the demand beyond hover so acceleration direction is kept.

    The hover vector is the zero-acceleration baseline; the residual's
    lateral part is bounded by the headroom the hover share leaves.
    """
    f = np.asarray(f_des_inertial, dtype=float)
    r_bi = body_rotation(*attitude).T
    f_hov_b = r_bi @ np.array([0.0, 0.0, -f_hov])
    used = _lateral_norm(f_hov_b)
    if used > f_lmax:
        raise StrategyError("hover thrust alone exceeds the lateral limit")
    headroom = f_lmax - used
    residual_b = r_bi @ (f - np.array([0.0, 0.0, -f_hov]))
    lat = _lateral_norm(residual_b)
    if lat <= headroom:
        return ThrustSetpoint(force_body_n=f_hov_b + residual_b)
    scale = headroom / lat
    bounded = np.array([residual_b[0] * scale, residual_b[1] * scale,
                        residual_b[2]])
    return ThrustSetpoint(force_body_n=f_hov_b + bounded)


def horizontal_prebound(f_des_inertial, f_lmax):
    """Near-zero-tilt shortcut: cap the inertial horizontal demand."""
    f = np.asarray(f_des_inertial, dtype=float).copy()
    horiz = math.hypot(f[0], f[1])
    if horiz > f_lmax:
        f[0] *= f_lmax / horiz
        f[1] *= f_lmax / horiz
    return f
