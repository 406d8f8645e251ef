import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from wrenchkit import strategies as strat
from wrenchkit.model import body_rotation


def assert_rotation(r, tol=1e-12):
    assert np.max(np.abs(r.T @ r - np.eye(3))) < tol
    assert abs(np.linalg.det(r) - 1.0) < tol


class TestRotationToEuler:
    def test_identity(self):
        assert_allclose(strat.rotation_to_euler(np.eye(3)), (0, 0, 0), atol=1e-15)

    def test_round_trip(self):
        r = body_rotation(0.1, -0.2, 0.3)
        assert_allclose(strat.rotation_to_euler(r), (0.1, -0.2, 0.3), atol=1e-9)

    def test_gimbal_guard(self):
        r = np.array([[0.0, 0, 1], [0, 1, 0], [-1, 0, 0]])  # theta = -90 deg
        with pytest.raises(strat.StrategyError):
            strat.rotation_to_euler(r)

    def test_random_round_trips(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            phi, theta = rng.uniform(-1.4, 1.4, 2)
            psi = rng.uniform(-math.pi, math.pi)
            r = body_rotation(phi, theta, psi)
            assert_allclose(strat.rotation_to_euler(r), (phi, theta, psi),
                            atol=1e-9)


class TestZeroTilt:
    def test_zero_yaw_identity(self):
        sp = strat.attitude_zero_tilt(0.0)
        assert_allclose(sp.rotation, np.eye(3), atol=1e-15)

    def test_quarter_yaw(self):
        sp = strat.attitude_zero_tilt(math.pi / 2)
        assert_allclose(sp.rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]],
                        atol=1e-15)

    def test_z_axis_vertical(self):
        for psi in np.linspace(-3, 3, 7):
            sp = strat.attitude_zero_tilt(psi)
            assert_allclose(sp.rotation[:, 2], [0, 0, 1], atol=1e-15)
            assert sp.tilt_rad == 0.0


class TestFullTilt:
    def test_hover_force_zero_tilt(self):
        sp = strat.attitude_full_tilt([0, 0, -25.0], 0.7)
        assert sp.tilt_rad < 1e-12
        assert_allclose(sp.euler[2], 0.7, atol=1e-12)

    def test_45_degree(self):
        sp = strat.attitude_full_tilt([10.0, 0, -10.0], 0.0)
        assert_allclose(sp.tilt_rad, math.pi / 4, atol=1e-12)

    def test_alignment(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            f = rng.normal(size=3) * 10
            f[2] = -abs(f[2]) - 1.0
            psi = rng.uniform(-math.pi, math.pi)
            sp = strat.attitude_full_tilt(f, psi)
            assert_rotation(sp.rotation)
            # -F/|F| mapped into the setpoint frame must be +Z
            local = sp.rotation.T @ (-f / np.linalg.norm(f))
            assert_allclose(local, [0, 0, 1], atol=1e-9)

    def test_near_zero_error(self):
        with pytest.raises(strat.StrategyError):
            strat.attitude_full_tilt([0, 0, -1e-8], 0.0)


class TestMinTilt:
    def test_within_limit_is_zero_tilt(self):
        sp = strat.attitude_min_tilt([2.0, 0, -20.0], 0.3, f_lmax=5.0)
        zero = strat.attitude_zero_tilt(0.3)
        assert_allclose(sp.rotation, zero.rotation, atol=1e-15)

    def test_zero_limit_equals_full_tilt(self):
        f = [6.0, -3.0, -12.0]
        sp_min = strat.attitude_min_tilt(f, 0.0, f_lmax=0.0)
        sp_full = strat.attitude_full_tilt(f, 0.0)
        assert_allclose(sp_min.tilt_rad, sp_full.tilt_rad, atol=1e-9)

    def test_printed_formula_value(self):
        # |F| = 10, |proj| = 6, f_lmax = 3
        f = [6.0, 0.0, -8.0]
        sp = strat.attitude_min_tilt(f, 0.0, f_lmax=3.0)
        expected = math.asin(0.6) - math.asin(0.3)
        assert_allclose(sp.tilt_rad, expected, atol=1e-12)

    def test_dominance_and_continuity(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            f = rng.normal(size=3) * 8
            f[2] = -abs(f[2]) - 0.5
            f_lmax = rng.uniform(0.0, 6.0)
            psi = rng.uniform(-math.pi, math.pi)
            tilt_min = strat.attitude_min_tilt(f, psi, f_lmax).tilt_rad
            tilt_full = strat.attitude_full_tilt(f, psi).tilt_rad
            assert tilt_min <= tilt_full + 1e-9
        # continuity at the branch point: lateral demand -> f_lmax from above
        f = np.array([5.0, 0.0, -10.0])
        for eps in (1e-3, 1e-6, 1e-9):
            tilt = strat.attitude_min_tilt(f, 0.0, f_lmax=5.0 - eps).tilt_rad
            assert tilt < 1e-3


class TestFixedTilt:
    def test_zero_tilt(self):
        sp = strat.attitude_fixed_tilt(0.0, 1.0, 0.5)
        assert_allclose(sp.rotation, strat.attitude_zero_tilt(0.5).rotation,
                        atol=1e-15)

    def test_north_tilt(self):
        sp = strat.attitude_fixed_tilt(0.15, 0.0, 0.0)
        k = sp.rotation[:, 2]
        assert abs(k[1]) < 1e-12
        assert_allclose(sp.tilt_rad, 0.15, atol=1e-12)
        # leaning north: thrust (-Z_S) gains a +X component
        assert -k[0] > 0

    def test_tilt_independent_of_yaw(self):
        for psi in np.linspace(-3, 3, 11):
            sp = strat.attitude_fixed_tilt(0.3, 1.2, psi)
            assert_allclose(sp.tilt_rad, 0.3, atol=1e-9)

    def test_range_guard(self):
        with pytest.raises(strat.StrategyError):
            strat.attitude_fixed_tilt(math.pi / 2, 0.0, 0.0)


class TestFixedAttitude:
    def test_zero_is_zero_tilt(self):
        sp = strat.attitude_fixed(0.0, 0.0, 0.9)
        assert_allclose(sp.rotation, strat.attitude_zero_tilt(0.9).rotation,
                        atol=1e-15)

    def test_contact_pose_round_trip(self):
        phi, theta = math.radians(7.0), math.radians(-5.0)
        sp = strat.attitude_fixed(phi, theta, 0.0)
        assert_allclose(sp.euler, (phi, theta, 0.0), atol=1e-12)
        assert_allclose(strat.rotation_to_euler(sp.rotation),
                        (phi, theta, 0.0), atol=1e-9)

    def test_identity(self):
        assert_allclose(strat.attitude_fixed(0, 0, 0).rotation, np.eye(3),
                        atol=1e-15)


class TestStrategyOrthonormality:
    def test_all_strategies_produce_rotations(self):
        rng = np.random.default_rng(3)
        for _ in range(2000):
            f = rng.normal(size=3) * 10
            f[2] = -abs(f[2]) - 0.5
            psi = rng.uniform(-math.pi, math.pi)
            lam = rng.uniform(0.0, 1.2)
            kap = rng.uniform(0, 2 * math.pi)
            for sp in (strat.attitude_zero_tilt(psi),
                       strat.attitude_full_tilt(f, psi),
                       strat.attitude_min_tilt(f, psi, rng.uniform(0, 5)),
                       strat.attitude_fixed_tilt(lam, kap, psi)):
                assert_rotation(sp.rotation)

    def test_heading(self):
        # horizontal projection of the X axis must point along psi_des
        rng = np.random.default_rng(4)
        for _ in range(200):
            f = rng.normal(size=3) * 10
            f[2] = -abs(f[2]) - 1.0
            psi = rng.uniform(-math.pi, math.pi)
            for sp in (strat.attitude_zero_tilt(psi),
                       strat.attitude_full_tilt(f, psi),
                       strat.attitude_min_tilt(f, psi, 2.0)):
                i_s = sp.rotation[:, 0]
                heading = math.atan2(i_s[1], i_s[0])
                err = abs(math.remainder(heading - psi, 2 * math.pi))
                assert err < 1e-9


class TestThrustProject:
    def test_zero_attitude(self):
        sp = strat.thrust_project([1.0, 2.0, -3.0], np.eye(3))
        assert_allclose(sp.force_body_n, [1, 2, -3], atol=1e-15)

    def test_pure_yaw(self):
        r = body_rotation(0, 0, math.pi / 2)
        sp = strat.thrust_project([1.0, 0.0, -3.0], r)
        assert_allclose(sp.force_body_n, [0, -1, -3], atol=1e-12)

    def test_norm_preserved(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            f = rng.normal(size=3) * 10
            r = body_rotation(*rng.uniform(-1.0, 1.0, 2), rng.uniform(-3, 3))
            sp = strat.thrust_project(f, r)
            assert_allclose(np.linalg.norm(sp.force_body_n),
                            np.linalg.norm(f), rtol=1e-12)


class TestKeepVertical:
    def test_zero_tilt_clamp(self):
        sp = strat.thrust_keep_vertical([8.0, 0, -20.0], (0, 0, 0), 5.0)
        assert_allclose(sp.force_body_n, [5, 0, -20], atol=1e-12)

    def test_within_limit_is_projection(self):
        att = (0.1, -0.2, 0.4)
        f = [1.0, -0.5, -20.0]
        sp = strat.thrust_keep_vertical(f, att, 50.0)
        proj = strat.thrust_project(f, body_rotation(*att))
        assert_allclose(sp.force_body_n, proj.force_body_n, atol=1e-12)

    def test_vertical_preserved(self):
        rng = np.random.default_rng(6)
        for _ in range(300):
            att = (rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                   rng.uniform(-3, 3))
            f = np.array([rng.uniform(-15, 15), rng.uniform(-15, 15),
                          rng.uniform(-30, -5)])
            f_lmax = rng.uniform(8.0, 12.0)
            try:
                sp = strat.thrust_keep_vertical(f, att, f_lmax)
            except strat.StrategyError:
                continue
            back = body_rotation(*att) @ sp.force_body_n
            assert abs(back[2] - f[2]) < 1e-9
            lat = math.hypot(*sp.force_body_n[:2])
            assert lat <= f_lmax + 1e-9

    def test_clamp_idempotent(self):
        att = (0.15, -0.1, 0.8)
        f = np.array([12.0, -6.0, -25.0])
        once = strat.thrust_keep_vertical(f, att, 6.0).force_body_n
        back = body_rotation(*att) @ once
        twice = strat.thrust_keep_vertical(back, att, 6.0).force_body_n
        assert_allclose(twice, once, atol=1e-9)

    def test_vertical_infeasible(self):
        # steep tilt: the vertical component alone floods the lateral plane
        with pytest.raises(strat.StrategyError):
            strat.thrust_keep_vertical([0.0, 0, -30.0], (0.0, 1.0, 0.0), 2.0)


class TestKeepDirection:
    def test_hover_passthrough(self):
        att = (0.2, -0.1, 0.5)
        f_hov = 20.0
        sp = strat.thrust_keep_direction([0, 0, -f_hov], att, 8.0, f_hov)
        expected = body_rotation(*att).T @ np.array([0, 0, -f_hov])
        assert_allclose(sp.force_body_n, expected, atol=1e-12)

    def test_zero_tilt_clamp(self):
        sp = strat.thrust_keep_direction([8.0, 0, -20.0], (0, 0, 0), 5.0, 20.0)
        assert_allclose(sp.force_body_n, [5, 0, -20], atol=1e-12)

    def test_within_limit_is_projection(self):
        att = (0.05, 0.02, -0.4)
        f = [1.0, 1.0, -21.0]
        sp = strat.thrust_keep_direction(f, att, 30.0, 20.0)
        proj = strat.thrust_project(f, body_rotation(*att))
        assert_allclose(sp.force_body_n, proj.force_body_n, atol=1e-12)


class TestHorizontalPrebound:
    def test_at_limit_unchanged(self):
        assert_allclose(strat.horizontal_prebound([3.0, 4.0, -10.0], 5.0),
                        [3, 4, -10], atol=1e-15)

    def test_proportional_scaling(self):
        assert_allclose(strat.horizontal_prebound([6.0, 8.0, -10.0], 5.0),
                        [3, 4, -10], atol=1e-12)

    def test_zero_horizontal(self):
        assert_allclose(strat.horizontal_prebound([0.0, 0.0, -10.0], 5.0),
                        [0, 0, -10], atol=1e-15)
