"""Fixed-pitch multirotor parametrization and control-affine mixer matrices.

The rotor command is u_i = Omega_i^2 (squared rotor speed, rad^2/s^2)
throughout. Frames follow NED: inertial Z down, body Z toward the
vehicle's bottom, rotor thrust along the rotor frame's -Z axis.
"""

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

GRAVITY_DEFAULT = 9.81


class ModelError(ValueError):
    pass


def rotor_rotation(mu, phi_x, phi_y):
    """Rotation from the body frame to a rotor frame.

    Built from the four-step sequence: +90 deg about Z_B, mu about Z_B,
    inward angle phi_x about the new X, sideward angle phi_y about the
    new Y. Returns the body-from-rotor matrix (orthonormal, det +1).
    """
    cm, sm = math.cos(mu), math.sin(mu)
    cx, sx = math.cos(phi_x), math.sin(phi_x)
    cy, sy = math.cos(phi_y), math.sin(phi_y)
    return np.array([
        [-sm * cy - cm * sx * sy, -cm * cx, cm * sx * cy - sm * sy],
        [cm * cy - sm * sx * sy, -sm * cx, cm * sy + sm * sx * cy],
        [-cx * sy, sx, cx * cy],
    ])


def body_rotation(phi, theta, psi):
    """Rotation from body to inertial frame for Z-Y'-X'' Euler angles.

    Pitch and roll are limited to |angle| < pi/2 (tilt singularity guard);
    yaw to (-pi, pi].
    """
    if not (abs(phi) < math.pi / 2 and abs(theta) < math.pi / 2):
        raise ModelError(f"attitude out of range: phi={phi}, theta={theta}")
    if not (-math.pi < psi <= math.pi + 1e-12):
        raise ModelError(f"yaw out of range: psi={psi}")
    cph, sph = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cps, sps = math.cos(psi), math.sin(psi)
    return np.array([
        [cth * cps, sph * sth * cps - cph * sps, cph * sth * cps + sph * sps],
        [cth * sps, sph * sth * sps + cph * cps, cph * sth * sps - sph * cps],
        [-sth, sph * cth, cph * cth],
    ])


@dataclass(frozen=True)
class RotorSpec:
    """Geometry and actuation limits of one rotor.

    position_m: rotor origin in the body frame.
    mu_rad / phi_x_rad / phi_y_rad: frame angles (azimuth, inward, sideward).
    cf / ctau: thrust (N s^2) and reaction-moment (N m s^2) constants.
    direction: 0 spins positive about the rotor Z axis, 1 negative.
    u_min / u_max: command bounds on Omega^2 (rad^2/s^2).
    """

    position_m: tuple
    mu_rad: float = 0.0
    phi_x_rad: float = 0.0
    phi_y_rad: float = 0.0
    cf: float = 1.0e-5
    ctau: float = 0.0
    direction: int = 0
    u_min: float = 0.0
    u_max: float = 1.0e6
    rotor_mass_kg: float = 0.0
    leg_com_m: tuple = (0.0, 0.0, 0.0)
    leg_mass_kg: float = 0.0

    def __post_init__(self):
        if self.cf <= 0:
            raise ModelError("cf must be positive")
        if self.ctau < 0:
            raise ModelError("ctau must be non-negative")
        if self.u_min < 0:
            raise ModelError("negative u_min not supported (rotors cannot reverse)")
        if self.u_min > self.u_max:
            raise ModelError("u_min exceeds u_max")
        if self.rotor_mass_kg < 0 or self.leg_mass_kg < 0:
            raise ModelError("component masses must be non-negative")
        if self.direction not in (0, 1):
            raise ModelError("direction must be 0 or 1")
        if not np.all(np.isfinite(self.position_m)):
            raise ModelError("rotor position must be finite")

    @property
    def arm_length_m(self):
        return float(np.linalg.norm(self.position_m))

    @property
    def azimuth_rad(self):
        """Angle of the arm projection on the body XY plane."""
        x, y, _ = self.position_m
        return math.atan2(y, x)

    @property
    def dihedral_rad(self):
        """Angle between the arm and its projection on the body XY plane."""
        x, y, z = self.position_m
        return math.atan2(-z, math.hypot(x, y))

    @property
    def rotation(self):
        return rotor_rotation(self.mu_rad, self.phi_x_rad, self.phi_y_rad)

    @property
    def thrust_axis(self):
        """Unit thrust direction in the body frame (thrust = cf*u*axis)."""
        return -self.rotation[:, 2]


@dataclass(frozen=True)
class MultirotorModel:
    name: str
    mass_kg: float
    inertia: np.ndarray
    rotors: tuple
    gravity: float = GRAVITY_DEFAULT

    def __post_init__(self):
        if self.mass_kg <= 0:
            raise ModelError("mass must be positive")
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        if self.inertia.shape != (3, 3):
            raise ModelError("inertia must be 3x3")
        object.__setattr__(self, "rotors", tuple(self.rotors))
        if len(self.rotors) < 2:
            raise ModelError("need at least two rotors")

    @property
    def n_rotors(self):
        return len(self.rotors)

    @property
    def u_min(self):
        return np.array([r.u_min for r in self.rotors])

    @property
    def u_max(self):
        return np.array([r.u_max for r in self.rotors])

    @cached_property
    def mixers(self):
        return build_mixer(self)

    @property
    def L(self):
        return self.mixers[0]

    @property
    def G(self):
        return self.mixers[1]

    @property
    def F(self):
        return self.mixers[2]

    @property
    def M(self):
        return self.mixers[3]

    @cached_property
    def allocation_matrix(self):
        """Stacked [L; M] (6 x n_r)."""
        return np.vstack([self.L, self.M])

    @cached_property
    def inertia_inv(self):
        return np.linalg.inv(self.inertia)

    @cached_property
    def gravity_moment_matrix(self):
        """Constant map from the body-frame down direction to the gravity
        moment: M_grav = C @ (R_BI z_I)."""
        C = np.zeros((3, 3))
        for rotor in self.rotors:
            if rotor.rotor_mass_kg:
                C += rotor.rotor_mass_kg * self.gravity * _skew(rotor.position_m)
            if rotor.leg_mass_kg:
                C += rotor.leg_mass_kg * self.gravity * _skew(rotor.leg_com_m)
        return C

    def hover_thrust_n(self):
        """Vertical thrust magnitude balancing the weight."""
        return self.mass_kg * self.gravity

    def with_rotors(self, rotors, name=None):
        return replace(self, rotors=tuple(rotors),
                       name=name if name is not None else self.name)


def build_mixer(model):
    """(L, G, F, M): thrust, reaction-moment, thrust-moment, total-moment
    mixers, each 3 x n_r, acting on u = [Omega_i^2]."""
    n = model.n_rotors
    L = np.zeros((3, n))
    G = np.zeros((3, n))
    F = np.zeros((3, n))
    for i, rotor in enumerate(model.rotors):
        axis = rotor.rotation[:, 2]
        L[:, i] = -rotor.cf * axis
        G[:, i] = (-1) ** rotor.direction * rotor.ctau * axis
        F[:, i] = np.cross(rotor.position_m, L[:, i])
    return L, G, F, F + G


def _skew(v):
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def gravity_moment(model, attitude):
    """Body moment from the weights of rotors and legs at the attitude."""
    phi, theta, _ = attitude
    # R_BI @ z_I expressed directly from the Euler angles
    down_b = np.array([-math.sin(theta),
                       math.sin(phi) * math.cos(theta),
                       math.cos(phi) * math.cos(theta)])
    return model.gravity_moment_matrix @ down_b


@dataclass
class ValidationReport:
    allocation_rank: int
    fully_actuated: bool
    limit_violations: list = field(default_factory=list)
    inertia_spd: bool = True
    hover_feasible: bool = True
    messages: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.limit_violations and self.inertia_spd and self.hover_feasible


def validate(model):
    """Sanity report: allocation rank, actuation, limits, inertia, hover."""
    A = model.allocation_matrix
    s = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s > 1e-9 * s[0])) if s[0] > 0 else 0
    report = ValidationReport(allocation_rank=rank, fully_actuated=rank == 6)
    if not report.fully_actuated:
        report.messages.append(
            f"allocation matrix rank {rank} < 6: not fully actuated")

    for i, rotor in enumerate(model.rotors):
        if rotor.u_min > rotor.u_max:
            report.limit_violations.append(f"rotor {i}: u_min > u_max")
        if rotor.u_max < 0:
            report.limit_violations.append(f"rotor {i}: negative u_max")

    sym_err = np.max(np.abs(model.inertia - model.inertia.T))
    eigs = np.linalg.eigvalsh(0.5 * (model.inertia + model.inertia.T))
    if sym_err > 1e-9 * max(1.0, np.max(np.abs(model.inertia))) or np.min(eigs) <= 0:
        report.inertia_spd = False
        report.messages.append("inertia is not symmetric positive-definite")

    # Hover feasibility at zero attitude: L u = [0, 0, -m g] with u in bounds.
    target = np.array([0.0, 0.0, -model.hover_thrust_n()])
    res = linprog(np.zeros(model.n_rotors), A_eq=model.L, b_eq=target,
                  bounds=list(zip(model.u_min, model.u_max)), method="highs")
    report.hover_feasible = bool(res.success)
    if not report.hover_feasible:
        report.messages.append("no in-bounds rotor command achieves hover")
    return report


# ---------------------------------------------------------------------------
# Bundled example craft


def planar_quadrotor():
    """Flat X-quadrotor: all rotor angles zero, alternating spin."""
    arm = 0.20
    rotors = []
    for i, az_deg in enumerate((45.0, 135.0, 225.0, 315.0)):
        az = math.radians(az_deg)
        rotors.append(RotorSpec(
            position_m=(arm * math.cos(az), arm * math.sin(az), 0.0),
            mu_rad=az,
            cf=6.0e-6,
            ctau=8.0e-8,
            direction=i % 2,
            u_min=0.0,
            u_max=8.0e5,
        ))
    return MultirotorModel(
        name="planar_quadrotor",
        mass_kg=1.2,
        inertia=np.diag([0.015, 0.015, 0.025]),
        rotors=rotors,
    )


def tilted_hexarotor():
    """Hexarotor with arms alternately tilted sideways by +/-30 degrees."""
    arm = 0.5
    tilt = math.radians(30.0)
    rotors = []
    for i in range(6):
        az = math.radians(60.0 * i)
        rotors.append(RotorSpec(
            position_m=(arm * math.cos(az), arm * math.sin(az), 0.0),
            mu_rad=az,
            phi_y_rad=tilt if i % 2 == 0 else -tilt,
            cf=8.0e-6,
            ctau=1.0e-7,
            direction=i % 2,
            u_min=0.0,
            u_max=1.2e6,
            rotor_mass_kg=0.05,
            leg_com_m=(0.5 * arm * math.cos(az), 0.5 * arm * math.sin(az), 0.0),
            leg_mass_kg=0.03,
        ))
    return MultirotorModel(
        name="tilted_hexarotor",
        mass_kg=2.5,
        inertia=np.diag([0.12, 0.12, 0.22]),
        rotors=rotors,
    )


def perpendicular_octorotor():
    """Four coplanar upward rotors plus four radial lateral thrusters.

    The auxiliary rotors point their thrust through the center of mass, so
    they contribute forces but no moments: lateral capability decouples
    exactly from the vertical thrust.
    """
    rotors = []
    for i, az_deg in enumerate((45.0, 135.0, 225.0, 315.0)):
        az = math.radians(az_deg)
        rotors.append(RotorSpec(
            position_m=(0.4 * math.cos(az), 0.4 * math.sin(az), 0.0),
            mu_rad=az,
            cf=8.0e-6,
            ctau=1.0e-7,
            direction=i % 2,
            u_min=0.0,
            u_max=1.2e6,
        ))
    for i, az_deg in enumerate((0.0, 90.0, 180.0, 270.0)):
        az = math.radians(az_deg)
        rotors.append(RotorSpec(
            position_m=(0.35 * math.cos(az), 0.35 * math.sin(az), 0.0),
            mu_rad=az,
            phi_x_rad=math.pi / 2,
            cf=6.0e-6,
            ctau=0.0,
            direction=i % 2,
            u_min=0.0,
            u_max=6.0e5,
        ))
    return MultirotorModel(
        name="perpendicular_octorotor",
        mass_kg=2.6,
        inertia=np.diag([0.2, 0.2, 0.35]),
        rotors=rotors,
    )


BUNDLED_MODELS = {
    "planar_quadrotor": planar_quadrotor,
    "tilted_hexarotor": tilted_hexarotor,
    "perpendicular_octorotor": perpendicular_octorotor,
}


# ---------------------------------------------------------------------------
# Model document I/O

_ROTOR_FIELDS = {
    "position_m", "mu_rad", "phi_x_rad", "phi_y_rad", "cf", "ctau",
    "direction", "u_min", "u_max", "rotor_mass_kg", "leg_com_m", "leg_mass_kg",
}
_MODEL_FIELDS = {"name", "mass_kg", "inertia_kgm2", "gravity_mps2", "rotors"}


def model_to_dict(model):
    return {
        "name": model.name,
        "mass_kg": model.mass_kg,
        "inertia_kgm2": [[float(x) for x in row] for row in model.inertia],
        "gravity_mps2": model.gravity,
        "rotors": [
            {
                "position_m": list(r.position_m),
                "mu_rad": r.mu_rad,
                "phi_x_rad": r.phi_x_rad,
                "phi_y_rad": r.phi_y_rad,
                "cf": r.cf,
                "ctau": r.ctau,
                "direction": r.direction,
                "u_min": r.u_min,
                "u_max": r.u_max,
                "rotor_mass_kg": r.rotor_mass_kg,
                "leg_com_m": list(r.leg_com_m),
                "leg_mass_kg": r.leg_mass_kg,
            }
            for r in model.rotors
        ],
    }


def model_from_dict(data):
    unknown = set(data) - _MODEL_FIELDS
    if unknown:
        raise ModelError(f"unknown model fields: {sorted(unknown)}")
    try:
        rotors = []
        for entry in data["rotors"]:
            bad = set(entry) - _ROTOR_FIELDS
            if bad:
                raise ModelError(f"unknown rotor fields: {sorted(bad)}")
            entry = dict(entry)
            entry["position_m"] = tuple(entry["position_m"])
            if "leg_com_m" in entry:
                entry["leg_com_m"] = tuple(entry["leg_com_m"])
            rotors.append(RotorSpec(**entry))
        return MultirotorModel(
            name=data.get("name", "unnamed"),
            mass_kg=float(data["mass_kg"]),
            inertia=np.asarray(data["inertia_kgm2"], dtype=float),
            rotors=rotors,
            gravity=float(data.get("gravity_mps2", GRAVITY_DEFAULT)),
        )
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model document: {exc}") from exc


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid model file: {exc}") from exc
    return model_from_dict(data)
