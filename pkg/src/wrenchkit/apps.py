"""Wrench-set applications: omni-directional acceleration analysis,
optimal-tilt estimation under a constant external force, and feasibility
reports for interaction planning."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import control as ctl
from . import geometry as geo
from . import wrenchset as ws
from .model import body_rotation
from .strategies import attitude_fixed_tilt, rotation_to_euler


class AppsError(ValueError):
    pass


@dataclass
class OmniResult:
    """Largest guaranteed acceleration in any direction at a tilt.

    radius_n = m * radius_mps2; a negative radius means the required
    equilibrium point lies outside the thrust set (craft overpowered).
    """

    radius_mps2: float
    radius_n: float
    tilt_rad: float
    tilt_dir_rad: float
    center_mps2: np.ndarray = field(default_factory=lambda: np.zeros(3))


def _tilt_attitude(tilt, direction):
    """Euler attitude tilting the body axis by `tilt` toward inertial
    direction `direction` (zero yaw)."""
    if tilt == 0.0:
        return (0.0, 0.0, 0.0)
    sp = attitude_fixed_tilt(tilt, direction, 0.0)
    return sp.euler


def omni_acceleration(model, attitude=(0.0, 0.0, 0.0),
                      f_ext_inertial=(0.0, 0.0, 0.0),
                      center_accel=(0.0, 0.0, 0.0), thrust_set=None):
    """Radius of the largest sphere inside the inertial thrust set centered
    at the equilibrium point -F_ext + m*a_desired."""
    f_ext = np.asarray(f_ext_inertial, dtype=float)
    center_accel = np.asarray(center_accel, dtype=float)
    if thrust_set is None:
        q = ws.WrenchSetQuery(attitude=attitude, frame="inertial")
        thrust_set = ws.thrust_set_by_rotation(model, q)
    if thrust_set.affine_dim < 3:
        raise AppsError("thrust set is degenerate; no inscribed sphere")
    center = -f_ext + model.mass_kg * center_accel
    radius_n = geo.inscribed_radius(thrust_set, center)
    phi, theta, _ = attitude
    tilt = math.acos(min(1.0, max(-1.0, math.cos(phi) * math.cos(theta))))
    return OmniResult(
        radius_mps2=radius_n / model.mass_kg,
        radius_n=radius_n,
        tilt_rad=tilt,
        tilt_dir_rad=0.0,
        center_mps2=center_accel,
    )


def optimal_tilt_sweep(model, f_ext_inertial, tilt_grid=64, dir_grid=64,
                       tilt_max=math.radians(45.0), center_accel=(0, 0, 0)):
    """Grid search over (tilt, direction) maximizing the omni-directional
    acceleration; uses the fixed-pitch base-set fast path.

    Returns the maximizing OmniResult; ties keep the smallest tilt.
    """
    if tilt_grid < 2 or dir_grid < 2:
        raise AppsError("grids must have at least 2 samples")
    f_ext = np.asarray(f_ext_inertial, dtype=float)
    center = -f_ext + model.mass_kg * np.asarray(center_accel, dtype=float)
    base, _ = ws.base_sets(model)
    best = None
    for tilt in np.linspace(0.0, tilt_max, tilt_grid):
        for direction in np.linspace(0.0, 2.0 * math.pi, dir_grid,
                                     endpoint=False):
            att = _tilt_attitude(float(tilt), float(direction))
            r_ib = body_rotation(*att)
            inertial = geo.transform(base, r_ib, np.zeros(3))
            radius_n = geo.inscribed_radius(inertial, center)
            if best is None or radius_n > best.radius_n + 1e-12:
                best = OmniResult(radius_mps2=radius_n / model.mass_kg,
                                  radius_n=radius_n,
                                  tilt_rad=float(tilt),
                                  tilt_dir_rad=float(direction),
                                  center_mps2=np.asarray(center_accel, float))
            if tilt == 0.0:
                break  # all directions coincide at zero tilt
    return best


def sweep_table(model, f_ext_inertial, tilt_grid=64, dir_grid=64,
                tilt_max=math.radians(45.0)):
    """(tilt, direction, radius_mps2) rows over the whole grid."""
    f_ext = np.asarray(f_ext_inertial, dtype=float)
    base, _ = ws.base_sets(model)
    rows = []
    for tilt in np.linspace(0.0, tilt_max, tilt_grid):
        for direction in np.linspace(0.0, 2.0 * math.pi, dir_grid,
                                     endpoint=False):
            att = _tilt_attitude(float(tilt), float(direction))
            r_ib = body_rotation(*att)
            inertial = geo.transform(base, r_ib, np.zeros(3))
            radius_n = geo.inscribed_radius(inertial, -f_ext)
            rows.append((float(tilt), float(direction),
                         radius_n / model.mass_kg))
            if tilt == 0.0:
                break
    return rows


@dataclass
class FeasibilityEntry:
    wrench: np.ndarray
    feasible: bool
    margin: float
    clipped: np.ndarray = None


def interaction_feasibility_report(model, attitude, task_wrenches, tol=1e-6):
    """Per-wrench feasibility, 6-D inscribed margin, and (when infeasible)
    the preserve-direction clipped alternative."""
    W = ws.wrench_set_6d(model, attitude)
    anchor = ctl.default_anchor(model, attitude, wrench_set=W)
    entries = []
    for wrench in task_wrenches:
        stacked = wrench.stacked()
        feasible = geo.contains(W, stacked, tol)
        margin = geo.inscribed_radius(W, stacked) if W.affine_dim == 6 else 0.0
        clipped = None
        if not feasible:
            clipped = geo.ray_clip(W, anchor.stacked(), stacked)
        entries.append(FeasibilityEntry(wrench=stacked, feasible=feasible,
                                        margin=margin, clipped=clipped))
    return entries
