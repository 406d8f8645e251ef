"""Feasible-set estimation: thrust, moment, and 6-D wrench polytopes.

The sets are exact spans of the rotor-command box: every hull of the
2^n_r corner commands equals the full reachable set, so membership of any
in-bounds command's wrench is guaranteed. For fixed-pitch craft a cached
body-frame base set plus a rigid transform replaces recomputation.
"""

import dataclasses
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import geometry as geo
from .model import body_rotation, gravity_moment

MAX_ROTORS_3D = 16
MAX_ROTORS_6D = 12
MAX_PITCH_SAMPLES = 100_000

LATERAL_K_DEFAULT = 500


class WrenchSetError(ValueError):
    pass


@dataclass
class WrenchSetQuery:
    """Attitude/frame/external-force context for a set estimate.

    external_force_n is inertial; gravity m*g*z is added to it when
    include_gravity is set. fixed_components maps wrench indices
    (0..5 = Fx Fy Fz Mx My Mz) to desired values.
    """

    attitude: tuple = (0.0, 0.0, 0.0)
    external_force_n: np.ndarray = field(default_factory=lambda: np.zeros(3))
    frame: str = "body"
    include_gravity: bool = False
    fixed_components: dict = field(default_factory=dict)

    def __post_init__(self):
        self.external_force_n = np.asarray(self.external_force_n, dtype=float)
        if self.frame not in ("body", "inertial"):
            raise WrenchSetError(f"unknown frame {self.frame!r}")
        keys = list(self.fixed_components)
        if len(set(keys)) != len(keys) or any(not 0 <= k < 6 for k in keys):
            raise WrenchSetError("fixed_components keys must be distinct and < 6")

    def total_external_force(self, model):
        f = self.external_force_n.copy()
        if self.include_gravity:
            f[2] += model.mass_kg * model.gravity
        return f


def _corner_commands(model):
    n = model.n_rotors
    lo, hi = model.u_min, model.u_max
    corners = np.array(list(itertools.product(*[(lo[i], hi[i]) for i in range(n)])))
    return corners


def _corner_points(matrix, model):
    """Images of all corner commands under a 3 x n_r or 6 x n_r map."""
    return _corner_commands(model) @ matrix.T


def thrust_set(model, query=None):
    """Feasible thrust polytope: hull of L u over all corner commands.

    Body frame by default; inertial queries rotate by R_IB and shift by
    the external force.
    """
    query = query or WrenchSetQuery()
    if model.n_rotors > MAX_ROTORS_3D:
        raise WrenchSetError(f"corner enumeration guard: n_r > {MAX_ROTORS_3D}")
    poly = geo.convex_hull(_corner_points(model.L, model), 3)
    if query.frame == "inertial":
        r_ib = body_rotation(*query.attitude)
        poly = geo.transform(poly, r_ib, query.total_external_force(model))
    return poly


def moment_set(model, query=None):
    """Feasible moment polytope: hull of M u + M_grav(attitude)."""
    query = query or WrenchSetQuery()
    if model.n_rotors > MAX_ROTORS_3D:
        raise WrenchSetError(f"corner enumeration guard: n_r > {MAX_ROTORS_3D}")
    poly = geo.convex_hull(_corner_points(model.M, model), 3)
    mgrav = gravity_moment(model, query.attitude)
    if query.frame == "inertial":
        r_ib = body_rotation(*query.attitude)
        poly = geo.transform(poly, r_ib, r_ib @ mgrav)
    else:
        poly = geo.transform(poly, np.eye(3), mgrav)
    return poly


def base_sets(model):
    """Cached body-frame (thrust, moment) sets at zero attitude and zero
    external force, for the fixed-pitch rotation fast path."""
    return _base_sets_cached(model)


def _compute_base_sets(model):
    thrust = geo.convex_hull(_corner_points(model.L, model), 3)
    moment = geo.convex_hull(_corner_points(model.M, model), 3)
    return thrust, moment


# One cache entry per model instance; models are immutable.
_BASE_SET_CACHE = {}
_BASE_6D_CACHE = {}


def _base_sets_cached(model):
    key = id(model)
    entry = _BASE_SET_CACHE.get(key)
    if entry is None or entry[0] is not model:
        entry = (model, _compute_base_sets(model))
        _BASE_SET_CACHE[key] = entry
    return entry[1]


def thrust_set_by_rotation(model, query=None):
    """Rotation fast path: transform the cached base thrust set."""
    query = query or WrenchSetQuery()
    base, _ = base_sets(model)
    r_ib = (body_rotation(*query.attitude) if query.frame == "inertial"
            else np.eye(3))
    shift = (query.total_external_force(model) if query.frame == "inertial"
             else np.zeros(3))
    return geo.transform(base, r_ib, shift)


def moment_set_by_rotation(model, query=None):
    query = query or WrenchSetQuery()
    _, base = base_sets(model)
    mgrav = gravity_moment(model, query.attitude)
    if query.frame == "inertial":
        r_ib = body_rotation(*query.attitude)
        return geo.transform(base, r_ib, r_ib @ mgrav)
    return geo.transform(base, np.eye(3), mgrav)


def wrench_set_6d(model, attitude=(0.0, 0.0, 0.0)):
    """Full 6-D body-frame wrench polytope: hull of [L u; M u + M_grav]."""
    if model.n_rotors > MAX_ROTORS_6D:
        raise WrenchSetError(f"corner enumeration guard: n_r > {MAX_ROTORS_6D}")
    base = base_wrench_set_6d(model)
    shift = np.concatenate([np.zeros(3), gravity_moment(model, attitude)])
    return geo.transform(base, np.eye(6), shift)


def base_wrench_set_6d(model):
    """Cached gravity-moment-free 6-D set (hull of [L; M] corner images)."""
    key = id(model)
    entry = _BASE_6D_CACHE.get(key)
    if entry is None or entry[0] is not model:
        if model.n_rotors > MAX_ROTORS_6D:
            raise WrenchSetError(
                f"corner enumeration guard: n_r > {MAX_ROTORS_6D}")
        poly = geo.convex_hull(_corner_points(model.allocation_matrix, model), 6)
        entry = (model, poly)
        _BASE_6D_CACHE[key] = entry
    return entry[1]


def wrench_set_with_fixed(model, attitude=(0.0, 0.0, 0.0), fixed_components=None):
    """Wrench set with desired components fixed, via iterative slicing.

    Fixing k components yields a polytope over the remaining 6-k wrench
    coordinates (in ascending index order). An empty result means the
    craft cannot realize all fixed components simultaneously.
    """
    fixed = dict(fixed_components or {})
    if any(not 0 <= k < 6 for k in fixed):
        raise WrenchSetError("fixed component indices must be in 0..5")
    if len(fixed) > 5:
        raise WrenchSetError("at most 5 components may be fixed")
    poly = wrench_set_6d(model, attitude)
    remaining = list(range(6))
    for index in sorted(fixed):
        axis = remaining.index(index)
        poly = geo.slice_fix_coordinate(poly, axis, fixed[index])
        remaining.pop(axis)
        if poly.is_empty:
            return poly
    return poly


def lateral_thrust_set(model, attitude=(0.0, 0.0, 0.0), fz_desired=0.0,
                       moment_sp=(0.0, 0.0, 0.0), k=LATERAL_K_DEFAULT):
    """Reachable lateral (Fx, Fy) polygon at fixed normal thrust and
    moment setpoint, through the dynamic-inversion allocation.

    The allocation solution is affine in the lateral force, so each
    azimuth's reach is a closed-form clamp against the rotor limits; the
    swept boundary is augmented with the exact corners of the underlying
    constraint polygon. Returns the empty marker when (0, 0, fz, moments)
    itself is infeasible.
    """
    A = model.allocation_matrix
    if np.linalg.matrix_rank(A) < 6:
        raise WrenchSetError("lateral estimation needs a full-rank allocation")
    mgrav = gravity_moment(model, attitude)
    target = np.concatenate([[0.0, 0.0, fz_desired],
                             np.asarray(moment_sp, dtype=float) - mgrav])
    pinv = np.linalg.pinv(A)
    u0 = pinv @ target
    D = pinv[:, :2]  # du/d(Fx, Fy)

    tol = 1e-9 * max(1.0, float(np.max(model.u_max)))
    if np.any(u0 < model.u_min - tol) or np.any(u0 > model.u_max + tol):
        return geo.Polytope.empty(2)

    # Rotor bounds as halfspaces in the lateral plane:
    #   u_min <= u0 + D p <= u_max
    A_lat = np.vstack([D, -D])
    b_lat = np.concatenate([model.u_max - u0, u0 - model.u_min])
    b_lat = np.maximum(b_lat, 0.0)

    points = [np.zeros(2)]
    # exact polygon corners
    corners = geo._enumerate_vertices(A_lat, b_lat, np.zeros((0, 2)),
                                      np.zeros(0), 2, geo.DEFAULT_TOL)
    if corners is not None:
        points.extend(corners)
    # uniform azimuth sweep (k is the density dial)
    thetas = np.linspace(0.0, 2.0 * np.pi, k, endpoint=False)
    dirs = np.column_stack([np.cos(thetas), np.sin(thetas)])
    proj = A_lat @ dirs.T  # (2n, k)
    with np.errstate(divide="ignore"):
        rho = np.where(proj > 1e-15, b_lat[:, None] / proj, np.inf)
    rho_max = rho.min(axis=0)
    finite = np.isfinite(rho_max)
    points.extend(dirs[finite] * rho_max[finite, None])
    return geo.convex_hull(np.asarray(points), 2)


def variable_pitch_wrench_set(model, pitch_ranges, samples_per_rotor=3,
                              vary="phi_y"):
    """6-D wrench set for craft whose rotor pitch can sweep a range.

    pitch_ranges: per-rotor (low, high) for the swept angle; rotors with
    low == high are not swept. For each sampled pitch combination the
    mixers are rebuilt and the corner wrenches collected; the union hull
    contains every per-sample set.
    """
    if vary not in ("phi_y", "phi_x"):
        raise WrenchSetError("vary must be 'phi_y' or 'phi_x'")
    if len(pitch_ranges) != model.n_rotors:
        raise WrenchSetError("need one pitch range per rotor")
    attr = "phi_y_rad" if vary == "phi_y" else "phi_x_rad"

    grids = []
    for low, high in pitch_ranges:
        if high < low:
            raise WrenchSetError("pitch range high < low")
        if high == low:
            grids.append(np.array([low]))
        else:
            grids.append(np.linspace(low, high, samples_per_rotor))
    combos = 1
    for g in grids:
        combos *= len(g)
    if combos > MAX_PITCH_SAMPLES:
        raise WrenchSetError(
            f"pitch sample budget exceeded: {combos} > {MAX_PITCH_SAMPLES}")

    mgrav = gravity_moment(model, (0.0, 0.0, 0.0))
    points = []
    for combo in itertools.product(*grids):
        rotors = [dataclasses.replace(r, **{attr: angle})
                  for r, angle in zip(model.rotors, combo)]
        sample = model.with_rotors(rotors)
        pts = _corner_points(sample.allocation_matrix, sample)
        pts[:, 3:] += mgrav
        points.append(pts)
    return geo.convex_hull(np.vstack(points), 6)


def apply_rotor_failure(model, rotor_index):
    """Copy of the model with the rotor's command limits zeroed."""
    if not 0 <= rotor_index < model.n_rotors:
        raise WrenchSetError(f"rotor index {rotor_index} out of range")
    rotors = list(model.rotors)
    rotors[rotor_index] = dataclasses.replace(
        rotors[rotor_index], u_min=0.0, u_max=0.0)
    return model.with_rotors(rotors, name=f"{model.name}_failed{rotor_index}")


def is_feasible(model, attitude, wrench, tol=1e-9):
    """True iff the body-frame wrench lies in the 6-D wrench set."""
    return geo.contains(wrench_set_6d(model, attitude), wrench.stacked(), tol)
