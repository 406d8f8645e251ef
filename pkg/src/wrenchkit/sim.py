"""Headless closed-loop scenario engine with structured CSV logs.

One run owns its state and controllers; reruns with the same scenario and
seed are bit-identical. The control path per tick mirrors the cascaded
architecture: position PID (plus optional force PID merged through the
contact-frame selection), attitude strategy, thrust strategy, attitude
PID, wrench allocation, moment-priority saturation, RK4 step with
penalty contact.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import control as ctl
from . import geometry as geo
from . import strategies as strat
from . import wrenchset as ws
from .dynamics import (ContactSurface, VehicleState, Wrench, contact_force,
                       euler_rate_matrix, euler_rate_matrix_dot, step_rk4)
from .model import BUNDLED_MODELS, gravity_moment, load_model


class SimError(ValueError):
    pass


class SimDivergence(SimError):
    def __init__(self, tick, time_s):
        super().__init__(f"simulation diverged at tick {tick} (t={time_s:.3f} s)")
        self.tick = tick
        self.time_s = time_s


DEFAULT_POSITION_GAINS = dict(kp=[2.0, 2.0, 3.0], ki=[0.4, 0.4, 0.6],
                              kd=[2.8, 2.8, 3.5], integral_limit=[1.0, 1.0, 1.0],
                              output_limit=[3.0, 3.0, 5.0])
DEFAULT_ATTITUDE_GAINS = dict(kp=[60.0, 60.0, 25.0], ki=[4.0, 4.0, 2.0],
                              kd=[15.0, 15.0, 8.0],
                              integral_limit=[0.5, 0.5, 0.5],
                              output_limit=[80.0, 80.0, 40.0])
DEFAULT_FORCE_GAINS = dict(kp=[0.3, 0.3, 0.3], ki=[2.0, 2.0, 2.0],
                           kd=[0.005, 0.005, 0.005],
                           integral_limit=[10.0, 10.0, 10.0])


@dataclass
class Waypoint:
    time_s: float
    position_m: np.ndarray
    yaw_rad: float

    def __post_init__(self):
        self.position_m = np.asarray(self.position_m, dtype=float)


@dataclass
class ContactTask:
    surface_point_m: np.ndarray
    surface_normal: np.ndarray       # outward, toward free space
    mu: float = 0.0
    k_wall: float = 5000.0
    c_wall: float = 50.0
    force_axes: tuple = (2,)         # contact-frame axes on the force path
    force_profile: list = field(default_factory=list)  # [(time, 3-vector)]
    ee_offset_body_m: np.ndarray = field(
        default_factory=lambda: np.array([0.5, 0.0, 0.0]))
    engage_time_s: float = 0.0       # force loop active from here on
    noise_std_n: float = 0.0         # measured-force noise (per axis)

    def __post_init__(self):
        self.surface_point_m = np.asarray(self.surface_point_m, dtype=float)
        self.surface_normal = np.asarray(self.surface_normal, dtype=float)
        self.ee_offset_body_m = np.asarray(self.ee_offset_body_m, dtype=float)
        if abs(np.linalg.norm(self.surface_normal) - 1.0) > 1e-9:
            raise SimError("contact surface normal must be unit length")

    def surface(self):
        return ContactSurface(self.surface_point_m, self.surface_normal,
                              mu=self.mu, k_wall=self.k_wall,
                              c_wall=self.c_wall)

    def contact_rotation(self):
        """R_IC with the contact Z axis pointing into the surface."""
        k_c = -self.surface_normal
        ref = np.array([0.0, 0.0, 1.0])
        cross = np.cross(ref, k_c)
        if np.linalg.norm(cross) < 1e-9:
            ref = np.array([1.0, 0.0, 0.0])
            cross = np.cross(ref, k_c)
        i_c = cross / np.linalg.norm(cross)
        j_c = np.cross(k_c, i_c)
        return np.column_stack([i_c, j_c, k_c])

    def desired_force(self, t):
        current = np.zeros(3)
        for time_s, force in self.force_profile:
            if t >= time_s:
                current = np.asarray(force, dtype=float)
        return current


@dataclass
class Scenario:
    model: object                    # MultirotorModel
    initial_state: VehicleState
    waypoints: list
    attitude_strategy: dict = field(default_factory=lambda: {"kind": "zero_tilt"})
    thrust_strategy: dict = field(default_factory=lambda: {"kind": "project"})
    position_gains: dict = field(default_factory=lambda: dict(DEFAULT_POSITION_GAINS))
    attitude_gains: dict = field(default_factory=lambda: dict(DEFAULT_ATTITUDE_GAINS))
    force_gains: dict = field(default_factory=lambda: dict(DEFAULT_FORCE_GAINS))
    contact: ContactTask = None
    external_force_n: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dt: float = 0.001
    duration_s: float = 10.0
    control_decimation: int = 1
    rotor_failures: list = field(default_factory=list)  # [(index, time)]
    use_wrench_optimizer: bool = False
    seed: int = 0

    def __post_init__(self):
        self.external_force_n = np.asarray(self.external_force_n, dtype=float)
        if self.duration_s <= 0:
            raise SimError("duration must be positive")
        if not self.waypoints:
            raise SimError("scenario needs at least one waypoint")
        times = [w.time_s for w in self.waypoints]
        if times != sorted(times):
            raise SimError("waypoint times must be sorted")
        if self.control_decimation < 1:
            raise SimError("control decimation must be >= 1")


class RunLog:
    """Column-aligned per-tick record; one row per control tick."""

    def __init__(self, n_rotors):
        self.n_rotors = n_rotors
        self.columns = (["t", "x", "y", "z", "vx", "vy", "vz",
                         "roll", "pitch", "yaw", "p", "q", "r"]
                        + [f"u_{i + 1}" for i in range(n_rotors)]
                        + ["fsp_x", "fsp_y", "fsp_z",
                           "msp_x", "msp_y", "msp_z",
                           "fmeas_x", "fmeas_y", "fmeas_z", "contact_flag"])
        self.rows = []

    def append(self, row):
        self.rows.append(np.asarray(row, dtype=float))

    def finalize(self):
        self.data = np.vstack(self.rows) if self.rows else np.zeros(
            (0, len(self.columns)))
        return self

    def column(self, name):
        return self.data[:, self.columns.index(name)]

    def commands(self):
        i = self.columns.index("u_1")
        return self.data[:, i:i + self.n_rotors]

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _attitude_setpoint(config, f_des, yaw_sp, fallback_counter):
    kind = config["kind"]
    try:
        if kind == "zero_tilt":
            return strat.attitude_zero_tilt(yaw_sp)
        if kind == "full_tilt":
            return strat.attitude_full_tilt(f_des, yaw_sp)
        if kind == "min_tilt":
            return strat.attitude_min_tilt(f_des, yaw_sp, config["f_lmax"])
        if kind == "fixed_tilt":
            return strat.attitude_fixed_tilt(config["lambda_rad"],
                                             config["kappa_rad"], yaw_sp)
        if kind == "fixed_attitude":
            return strat.attitude_fixed(config["phi_rad"], config["theta_rad"],
                                        yaw_sp)
    except strat.StrategyError:
        fallback_counter[0] += 1
        return strat.attitude_zero_tilt(yaw_sp)
    raise SimError(f"unknown attitude strategy {kind!r}")


def _thrust_setpoint(config, f_des, state):
    kind = config["kind"]
    if kind == "project":
        return strat.thrust_project(f_des, state.rotation()).force_body_n
    if kind == "keep_vertical":
        return strat.thrust_keep_vertical(
            f_des, state.attitude_rad, config["f_lmax"]).force_body_n
    if kind == "keep_direction":
        return strat.thrust_keep_direction(
            f_des, state.attitude_rad, config["f_lmax"],
            config["f_hov"]).force_body_n
    if kind == "prebound":
        bounded = strat.horizontal_prebound(f_des, config["f_lmax"])
        return strat.thrust_project(bounded, state.rotation()).force_body_n
    raise SimError(f"unknown thrust strategy {kind!r}")


def _moment_for_euler_accel(model, state, euler_accel):
    """Total applied moment that realizes the demanded Euler acceleration."""
    eta = euler_rate_matrix(state.attitude_rad)
    omega = state.body_rates_radps
    eta_dot = euler_rate_matrix_dot(state.attitude_rad, eta @ omega)
    omega_dot = np.linalg.solve(eta, euler_accel - eta_dot @ omega)
    return model.inertia @ omega_dot + np.cross(omega, model.inertia @ omega)


def run(scenario):
    """Execute the scenario; returns a finalized RunLog."""
    model = scenario.model
    state = scenario.initial_state
    dt = scenario.dt
    n_ticks = int(round(scenario.duration_s / dt))
    rng = np.random.default_rng(scenario.seed)

    pos_pid = ctl.PositionPid(ctl.PidGains(**scenario.position_gains),
                              model.mass_kg, model.gravity)
    att_pid = ctl.AttitudePid(ctl.PidGains(**scenario.attitude_gains))
    force_pid = ctl.ForcePid(ctl.PidGains(**scenario.force_gains))

    contact = scenario.contact
    if contact is not None:
        surface = contact.surface()
        r_ic = contact.contact_rotation()
        sel = ctl.SelectionMatrices.natural(r_ic, contact.force_axes)
    force_engaged = False
    last_force_out = np.zeros(3)

    failures = sorted(scenario.rotor_failures, key=lambda f: f[1])
    failure_idx = 0

    base6 = ws.base_wrench_set_6d(model) if scenario.use_wrench_optimizer else None

    log = RunLog(model.n_rotors)
    fallback_counter = [0]
    u = np.zeros(model.n_rotors)
    f_sp = np.zeros(3)
    m_sp = np.zeros(3)
    measured_c = np.zeros(3)

    for tick in range(n_ticks):
        t = tick * dt

        while failure_idx < len(failures) and t >= failures[failure_idx][1]:
            model = ws.apply_rotor_failure(model, failures[failure_idx][0])
            if scenario.use_wrench_optimizer:
                base6 = ws.base_wrench_set_6d(model)
            failure_idx += 1

        # sensor view of the contact (start-of-tick state)
        contact_active = False
        if contact is not None:
            r_ib = state.rotation()
            ee_pos = state.position_m + r_ib @ contact.ee_offset_body_m
            ee_vel = state.velocity_mps + r_ib @ np.cross(
                state.body_rates_radps, contact.ee_offset_body_m)
            w_c = contact_force(surface, ee_pos, ee_vel)
            contact_active = bool(np.any(w_c.force_n))
            reaction_i = -w_c.force_n
            if contact.noise_std_n > 0.0:
                reaction_i = reaction_i + rng.normal(
                    0.0, contact.noise_std_n, 3)
            # the end-effector frame rides the body frame (rigid mount)
            measured_ee = r_ib.T @ reaction_i
            measured_c = r_ic.T @ reaction_i

        if tick % scenario.control_decimation == 0:
            dt_ctrl = dt * scenario.control_decimation
            # waypoint hold (step setpoints)
            wp = scenario.waypoints[0]
            for cand in scenario.waypoints:
                if t >= cand.time_s:
                    wp = cand
            f_pos = pos_pid.update(state, wp.position_m, np.zeros(3), dt_ctrl)

            if contact is not None and t >= contact.engage_time_s:
                if not force_engaged:
                    # bumpless transfer: seed the force path from the
                    # position path's contribution in the force subspace
                    last_force_out = r_ic @ (sel.s_f @ (r_ic.T @ f_pos))
                    force_engaged = True
                f_force = force_pid.update(
                    measured_ee, contact.desired_force(t), r_ic,
                    state.rotation(), dt_ctrl, last_force_out)
                last_force_out = f_force
                f_des = ctl.hpfc_combine(f_pos, f_force, sel)
            else:
                f_des = f_pos

            att_sp = _attitude_setpoint(scenario.attitude_strategy, f_des,
                                        wp.yaw_rad, fallback_counter)
            f_sp = _thrust_setpoint(scenario.thrust_strategy, f_des, state)
            euler_accel = att_pid.update(state, att_sp, dt_ctrl)
            m_sp = _moment_for_euler_accel(model, state, euler_accel)

            if scenario.use_wrench_optimizer:
                shift = np.concatenate(
                    [np.zeros(3), gravity_moment(model, state.attitude_rad)])
                w_set = geo.transform(base6, np.eye(6), shift)
                f_sp, m_sp = ctl.wrench_optimize(
                    model, tuple(state.attitude_rad), f_sp, m_sp,
                    priority=ctl.PRESERVE_DIRECTION, wrench_set=w_set,
                    tol=1e-6)

            u, _ = ctl.allocate_wrench(model, tuple(state.attitude_rad),
                                       f_sp, m_sp)
            u = ctl.saturate_priority(model, u)

        row = np.concatenate([
            [t], state.position_m, state.velocity_mps, state.attitude_rad,
            state.body_rates_radps, u, f_sp, m_sp, measured_c,
            [1.0 if contact_active else 0.0],
        ])
        log.append(row)

        ext_fn = None
        if contact is not None:
            offset = contact.ee_offset_body_m

            def ext_fn(st, _offset=offset):
                r = st.rotation()
                pos = st.position_m + r @ _offset
                vel = st.velocity_mps + r @ np.cross(st.body_rates_radps,
                                                     _offset)
                w = contact_force(surface, pos, vel)
                f_b = r.T @ (w.force_n + scenario.external_force_n)
                return Wrench(f_b, np.cross(_offset, r.T @ w.force_n), "body")
        elif np.any(scenario.external_force_n):
            def ext_fn(st):
                return Wrench(st.rotation().T @ scenario.external_force_n,
                              np.zeros(3), "body")

        state = step_rk4(model, state, u, dt, ext_wrench_fn=ext_fn)
        if np.linalg.norm(state.to_vector()) > 1e6:
            raise SimDivergence(tick, t)

    result = log.finalize()
    result.strategy_fallbacks = fallback_counter[0]
    return result


def replay_check(log, scenario):
    """True iff rerunning the scenario reproduces the log bit-identically."""
    again = run(scenario)
    return (log.columns == again.columns
            and log.data.shape == again.data.shape
            and bool(np.array_equal(log.data, again.data)))


# ---------------------------------------------------------------------------
# Scenario document I/O


def scenario_from_dict(data, base_dir="."):
    import os

    model_ref = data["model"]
    if isinstance(model_ref, dict) and "bundled" in model_ref:
        name = model_ref["bundled"]
        if name not in BUNDLED_MODELS:
            raise SimError(f"unknown bundled model {name!r}")
        model = BUNDLED_MODELS[name]()
    else:
        path = model_ref if os.path.isabs(model_ref) else os.path.join(
            base_dir, model_ref)
        model = load_model(path)

    init = data.get("initial_state", {})
    state = VehicleState(
        np.asarray(init.get("position_m", [0, 0, 0]), dtype=float),
        np.asarray(init.get("velocity_mps", [0, 0, 0]), dtype=float),
        np.asarray(init.get("attitude_rad", [0, 0, 0]), dtype=float),
        np.asarray(init.get("body_rates_radps", [0, 0, 0]), dtype=float),
    )
    waypoints = [Waypoint(w["time_s"], w["position_m"], w.get("yaw_rad", 0.0))
                 for w in data["waypoints"]]

    contact = None
    if "contact" in data and data["contact"] is not None:
        c = data["contact"]
        contact = ContactTask(
            surface_point_m=c["surface_point_m"],
            surface_normal=c["surface_normal"],
            mu=c.get("mu", 0.0),
            k_wall=c.get("k_wall", 5000.0),
            c_wall=c.get("c_wall", 50.0),
            force_axes=tuple(c.get("force_axes", (2,))),
            force_profile=[(p["time_s"], p["force_n"])
                           for p in c.get("force_profile", [])],
            ee_offset_body_m=c.get("ee_offset_body_m", [0.5, 0.0, 0.0]),
            engage_time_s=c.get("engage_time_s", 0.0),
            noise_std_n=c.get("noise_std_n", 0.0),
        )

    kwargs = {}
    for key in ("position_gains", "attitude_gains", "force_gains"):
        if key in data:
            kwargs[key] = data[key]
    return Scenario(
        model=model,
        initial_state=state,
        waypoints=waypoints,
        attitude_strategy=data.get("attitude_strategy", {"kind": "zero_tilt"}),
        thrust_strategy=data.get("thrust_strategy", {"kind": "project"}),
        contact=contact,
        external_force_n=np.asarray(data.get("external_force_n", [0, 0, 0]),
                                    dtype=float),
        dt=data.get("dt", 0.001),
        duration_s=data.get("duration_s", 10.0),
        control_decimation=data.get("control_decimation", 1),
        rotor_failures=[tuple(f) for f in data.get("rotor_failures", [])],
        use_wrench_optimizer=data.get("use_wrench_optimizer", False),
        seed=data.get("seed", 0),
        **kwargs,
    )


def load_scenario(path):
    import os
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SimError(f"invalid scenario file: {exc}") from exc
    return scenario_from_dict(data, base_dir=os.path.dirname(path) or ".")
