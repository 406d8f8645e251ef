import numpy as np
import pytest
from numpy.testing import assert_allclose

from wrenchkit import geometry as geo


def cube_corners():
    return np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)],
                    dtype=float)


def random_hexarotor_like_points(rng, n=64):
    # 64 corner-style points with a generic linear map, mimicking a corner sweep
    L = rng.normal(size=(3, 6))
    corners = np.array([[(1 if (i >> k) & 1 else 0) for k in range(6)]
                        for i in range(64)], dtype=float)
    return corners @ L.T


class TestConvexHull:
    def test_cube(self):
        P = geo.convex_hull(cube_corners(), 3)
        assert P.n_vertices == 8
        assert P.n_halfspaces == 6
        assert P.affine_dim == 3

    def test_collinear_degeneracy(self):
        P = geo.convex_hull([[0, 0, 0], [1, 1, 1], [2, 2, 2]], 3)
        assert P.affine_dim == 1
        assert_allclose(sorted(map(tuple, P.vertices)),
                        [(0, 0, 0), (2, 2, 2)], atol=1e-12)

    def test_corner_sweep_membership(self):
        rng = np.random.default_rng(7)
        pts = random_hexarotor_like_points(rng)
        P = geo.convex_hull(pts, 3)
        assert np.all(geo.contains_batch(P, pts))

    def test_dim_out_of_range(self):
        with pytest.raises(geo.GeometryError):
            geo.convex_hull(np.zeros((3, 7)), 7)

    def test_non_finite(self):
        with pytest.raises(geo.GeometryError):
            geo.convex_hull([[0.0, np.nan, 0.0]], 3)

    def test_hull_idempotence(self):
        rng = np.random.default_rng(3)
        for dim in (2, 3, 4):
            pts = rng.normal(size=(30, dim))
            P = geo.convex_hull(pts, dim)
            Q = geo.convex_hull(P.vertices, dim)
            assert_allclose(Q.vertices, P.vertices, atol=1e-9)

    def test_determinism_under_permutation(self):
        rng = np.random.default_rng(11)
        pts = rng.normal(size=(40, 3))
        P = geo.convex_hull(pts, 3)
        for seed in range(3):
            perm = np.random.default_rng(seed).permutation(len(pts))
            Q = geo.convex_hull(pts[perm], 3)
            assert np.array_equal(P.vertices, Q.vertices)
            assert np.array_equal(P.halfspace_normals, Q.halfspace_normals)
            assert np.array_equal(P.halfspace_offsets, Q.halfspace_offsets)

    def test_vertices_satisfy_halfspaces(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(50, 4)) * 100
        P = geo.convex_hull(pts, 4)
        scale = np.max(np.abs(P.vertices))
        slack = P.vertices @ P.halfspace_normals.T - P.halfspace_offsets
        assert np.max(slack) <= 1e-9 * scale

    def test_halfspaces_tight_at_enough_vertices(self):
        P = geo.convex_hull(cube_corners(), 3)
        for a, b in zip(P.halfspace_normals, P.halfspace_offsets):
            tight = np.sum(np.abs(P.vertices @ a - b) < 1e-9)
            assert tight >= P.affine_dim


class TestAffineDimension:
    def test_single_point(self):
        assert geo.affine_dimension([[1.0, 2.0, 3.0]]) == 0

    def test_two_points(self):
        assert geo.affine_dimension([[0, 0, 0], [1, 0, 0]]) == 1

    def test_cube(self):
        assert geo.affine_dimension(cube_corners()) == 3

    def test_planar_in_3d(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        assert geo.affine_dimension(pts) == 2


class TestContains:
    def test_origin_in_cube(self):
        P = geo.convex_hull(cube_corners(), 3)
        assert geo.contains(P, np.zeros(3))

    def test_outside_cube(self):
        P = geo.convex_hull(cube_corners(), 3)
        tol = 1e-9
        assert not geo.contains(P, np.array([1 + 2 * tol, 0, 0]), tol)

    def test_convex_combinations(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(25, 3))
        P = geo.convex_hull(pts, 3)
        for _ in range(200):
            w = rng.random(P.n_vertices)
            w /= w.sum()
            assert geo.contains(P, w @ P.vertices)

    def test_dimension_mismatch(self):
        P = geo.convex_hull(cube_corners(), 3)
        with pytest.raises(geo.GeometryError):
            geo.contains(P, np.zeros(4))

    def test_membership_completeness(self):
        rng = np.random.default_rng(6)
        for dim in (2, 3, 5):
            pts = rng.normal(size=(40, dim))
            P = geo.convex_hull(pts, dim)
            assert np.all(geo.contains_batch(P, pts, 1e-9))


class TestSlice:
    def test_cube_slice_mid(self):
        P = geo.convex_hull(cube_corners(), 3)
        S = geo.slice_fix_coordinate(P, 2, 0.0)
        assert S.n_vertices == 4
        assert_allclose(sorted(map(tuple, S.vertices)),
                        [(-1, -1), (-1, 1), (1, -1), (1, 1)], atol=1e-9)

    def test_cube_slice_miss(self):
        P = geo.convex_hull(cube_corners(), 3)
        assert geo.slice_fix_coordinate(P, 2, 2.0).is_empty

    def test_cube_slice_face(self):
        P = geo.convex_hull(cube_corners(), 3)
        S = geo.slice_fix_coordinate(P, 2, 1.0)
        assert not S.is_empty
        assert_allclose(sorted(map(tuple, S.vertices)),
                        [(-1, -1), (-1, 1), (1, -1), (1, 1)], atol=1e-7)

    def test_axis_out_of_range(self):
        P = geo.convex_hull(cube_corners(), 3)
        with pytest.raises(geo.GeometryError):
            geo.slice_fix_coordinate(P, 3, 0.0)

    def test_slice_consistency(self):
        rng = np.random.default_rng(8)
        pts = rng.normal(size=(30, 4))
        P = geo.convex_hull(pts, 4)
        S = geo.slice_fix_coordinate(P, 1, 0.1)
        for _ in range(100):
            y = rng.normal(size=3) * 0.8
            full = np.insert(y, 1, 0.1)
            assert geo.contains(S, y, 1e-8) == geo.contains(P, full, 1e-8)

    def test_slice_of_degenerate_set(self):
        # planar square embedded in 3-D, sliced along x
        pts = np.array([[0, 0, 0], [2, 0, 0], [0, 2, 0], [2, 2, 0]], dtype=float)
        P = geo.convex_hull(pts, 3)
        assert P.affine_dim == 2
        S = geo.slice_fix_coordinate(P, 0, 1.0)
        assert S.affine_dim == 1
        assert_allclose(sorted(map(tuple, S.vertices)), [(0, 0), (2, 0)], atol=1e-9)


class TestRayClip:
    def test_clip_outside(self):
        P = geo.convex_hull(cube_corners(), 3)
        assert_allclose(geo.ray_clip(P, np.zeros(3), np.array([3.0, 0, 0])),
                        [1, 0, 0], atol=1e-12)

    def test_feasible_target_unchanged(self):
        P = geo.convex_hull(cube_corners(), 3)
        assert_allclose(geo.ray_clip(P, np.zeros(3), np.array([0.5, 0, 0])),
                        [0.5, 0, 0], atol=1e-15)

    def test_infeasible_anchor(self):
        P = geo.convex_hull(cube_corners(), 3)
        with pytest.raises(geo.GeometryError):
            geo.ray_clip(P, np.array([5.0, 0, 0]), np.zeros(3))

    def test_bisection_oracle(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(30, 3))
        P = geo.convex_hull(pts, 3)
        anchor = geo.interior_point(P)
        for _ in range(50):
            target = anchor + rng.normal(size=3) * 5.0
            clipped = geo.ray_clip(P, anchor, target)
            # clipped point feasible and on the segment
            assert geo.contains(P, clipped, 1e-9)
            d = target - anchor
            t = (clipped - anchor) @ d / (d @ d)
            assert -1e-12 <= t <= 1 + 1e-12
            assert_allclose(clipped, anchor + t * d, atol=1e-9)
            # bisection oracle: farthest feasible t on the segment
            lo, hi = 0.0, 1.0
            if geo.contains(P, target, 1e-9):
                t_star = 1.0
            else:
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if geo.contains(P, anchor + mid * d, 1e-12):
                        lo = mid
                    else:
                        hi = mid
                t_star = lo
            assert abs(t - t_star) < 1e-9


class TestInscribedRadius:
    def test_cube_center(self):
        P = geo.convex_hull(cube_corners(), 3)
        assert_allclose(geo.inscribed_radius(P, np.zeros(3)), 1.0)

    def test_cube_offcenter(self):
        P = geo.convex_hull(cube_corners(), 3)
        assert_allclose(geo.inscribed_radius(P, np.array([0.5, 0, 0])), 0.5)

    def test_outside_magnitude(self):
        P = geo.convex_hull(cube_corners(), 3)
        r = geo.inscribed_radius(P, np.array([3.0, 0, 0]))
        assert_allclose(r, -2.0)

    def test_degenerate_zero(self):
        P = geo.convex_hull([[0, 0, 0], [1, 1, 1]], 3)
        assert geo.inscribed_radius(P, 0.5 * np.ones(3)) == 0.0

    def test_facet_distance_oracle(self):
        rng = np.random.default_rng(10)
        pts = rng.normal(size=(40, 3)) * 3
        P = geo.convex_hull(pts, 3)
        c = geo.interior_point(P)
        dists = [(b - a @ c) / np.linalg.norm(a)
                 for a, b in zip(P.halfspace_normals, P.halfspace_offsets)]
        assert_allclose(geo.inscribed_radius(P, c), min(dists), rtol=1e-12)

    def test_empty_error(self):
        with pytest.raises(geo.GeometryError):
            geo.inscribed_radius(geo.Polytope.empty(3), np.zeros(3))


class TestTransform:
    def test_identity(self):
        P = geo.convex_hull(cube_corners(), 3)
        T = geo.transform(P, np.eye(3), np.zeros(3))
        assert np.array_equal(T.vertices, P.vertices)
        assert np.array_equal(T.halfspace_offsets, P.halfspace_offsets)

    def test_cube_rotation_symmetry(self):
        P = geo.convex_hull(cube_corners(), 3)
        Rz = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
        T = geo.transform(P, Rz, np.zeros(3))
        assert_allclose(sorted(map(tuple, T.vertices.round(12))),
                        sorted(map(tuple, P.vertices)), atol=1e-12)

    def test_non_orthonormal_rejected(self):
        P = geo.convex_hull(cube_corners(), 3)
        with pytest.raises(geo.GeometryError):
            geo.transform(P, np.eye(3) * 1.5, np.zeros(3))

    def test_membership_preserved(self):
        rng = np.random.default_rng(12)
        pts = rng.normal(size=(20, 3))
        P = geo.convex_hull(pts, 3)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        t = rng.normal(size=3)
        T = geo.transform(P, q, t)
        for _ in range(100):
            x = rng.normal(size=3)
            assert geo.contains(P, x, 1e-9) == geo.contains(T, q @ x + t, 1e-9)

    def test_representations_consistent(self):
        rng = np.random.default_rng(13)
        P = geo.convex_hull(rng.normal(size=(25, 3)), 3)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        T = geo.transform(P, q, np.array([1.0, -2.0, 0.5]))
        slack = T.vertices @ T.halfspace_normals.T - T.halfspace_offsets
        assert np.max(slack) <= 1e-9 * np.max(np.abs(T.vertices))


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(14)
        P = geo.convex_hull(rng.normal(size=(20, 3)), 3)
        Q = geo.Polytope.from_dict(P.to_dict())
        assert np.array_equal(P.vertices, Q.vertices)
        assert np.array_equal(P.halfspace_normals, Q.halfspace_normals)
        assert P.affine_dim == Q.affine_dim

    def test_degenerate_round_trip(self):
        P = geo.convex_hull([[0, 0, 0], [1, 1, 1], [2, 2, 2]], 3)
        Q = geo.Polytope.from_dict(P.to_dict())
        assert np.array_equal(P.vertices, Q.vertices)
        assert geo.contains(Q, np.array([1.0, 1.0, 1.0]))
        assert not geo.contains(Q, np.array([1.0, 1.0, 1.2]))

    def test_empty_round_trip(self):
        P = geo.Polytope.empty(4)
        Q = geo.Polytope.from_dict(P.to_dict())
        assert Q.is_empty and Q.dim == 4
