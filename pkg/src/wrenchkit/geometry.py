"""Dimension-generic convex polytope machinery (d = 1..6).

Polytopes are kept in dual representation: canonical vertex list plus
halfspaces {x : a.x <= b}. Degenerate (lower-dimensional) sets carry an
explicit affine carrier (point + orthonormal basis) and are hulled inside
it, so line- and plane-shaped sets are first-class citizens rather than
errors. All operations are pure; outputs are canonical (lexicographically
sorted) so identical inputs in any order produce bit-identical results.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

# Global relative tolerance for hull/membership tests, scaled by the
# largest coordinate magnitude of the data involved.
DEFAULT_TOL = 1e-9

MAX_DIM = 6

# Counts ConvexHull invocations; lets callers assert caching contracts.
hull_call_count = 0


class GeometryError(ValueError):
    pass


def _scale(*arrays):
    """Magnitude scale for relative tolerances: max(1, max |coordinate|)."""
    m = 1.0
    for a in arrays:
        if a is not None and np.size(a):
            m = max(m, float(np.max(np.abs(a))))
    return m


def _check_finite(points):
    if not np.all(np.isfinite(points)):
        raise GeometryError("non-finite coordinates")


def _canonical_rows(rows):
    """Sort rows lexicographically (first column most significant)."""
    rows = np.asarray(rows, dtype=float)
    if rows.size == 0:
        return rows
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def _dedupe_rows(rows, tol):
    """Drop rows closer than tol (inf-norm) to an earlier row."""
    kept = []
    for r in rows:
        if not any(np.max(np.abs(r - k)) <= tol for k in kept):
            kept.append(r)
    return np.asarray(kept)


def affine_dimension(points, tol=DEFAULT_TOL):
    """Rank of the centered point matrix.

    Singular values below tol * sigma_max are treated as zero.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _check_finite(points)
    if len(points) == 1:
        return 0
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[0] <= 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def _affine_basis(points, tol=DEFAULT_TOL):
    """Carrier of a point set: (center, orthonormal basis (d, k), k).

    Basis columns span the affine hull; each column's sign is fixed so the
    first non-negligible component is positive (canonical orientation).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    center = points.mean(axis=0)
    centered = points - center
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    if len(points) == 1 or s[0] <= 0.0:
        return center, np.zeros((points.shape[1], 0)), 0
    k = int(np.sum(s > tol * s[0]))
    basis = vt[:k].T.copy()
    for j in range(k):
        col = basis[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if len(nz) and col[nz[0]] < 0:
            basis[:, j] = -col
    return center, basis, k


@dataclass(frozen=True)
class Polytope:
    """Convex set in dual (vertex + halfspace) representation.

    vertices: (n, dim) canonical extreme points.
    halfspaces: (A, b) with the set {x : A x <= b}; rows unit-norm.
    carrier: (point, basis) affine subspace containing the set when
        affine_dim < dim; None when full-dimensional.
    An empty set is marked by zero vertices and affine_dim == -1.
    """

    dim: int
    vertices: np.ndarray
    halfspace_normals: np.ndarray
    halfspace_offsets: np.ndarray
    affine_dim: int
    carrier_point: Optional[np.ndarray] = None
    carrier_basis: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, dim):
        return cls(
            dim=dim,
            vertices=np.zeros((0, dim)),
            halfspace_normals=np.zeros((0, dim)),
            halfspace_offsets=np.zeros(0),
            affine_dim=-1,
        )

    @property
    def is_empty(self):
        return self.affine_dim < 0

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_halfspaces(self):
        return len(self.halfspace_offsets)

    def to_dict(self):
        return {
            "dim": self.dim,
            "affine_dim": self.affine_dim,
            "vertices": [[float(x) for x in v] for v in self.vertices],
            "halfspaces": [
                {"a": [float(x) for x in a], "b": float(b)}
                for a, b in zip(self.halfspace_normals, self.halfspace_offsets)
            ],
        }

    @classmethod
    def from_dict(cls, data):
        dim = int(data["dim"])
        affine_dim = int(data["affine_dim"])
        if affine_dim < 0:
            return cls.empty(dim)
        vertices = np.asarray(data["vertices"], dtype=float).reshape(-1, dim)
        hs = data.get("halfspaces", [])
        if hs:
            normals = np.asarray([h["a"] for h in hs], dtype=float)
            offsets = np.asarray([h["b"] for h in hs], dtype=float)
        else:
            normals = np.zeros((0, dim))
            offsets = np.zeros(0)
        carrier_point = carrier_basis = None
        if affine_dim < dim:
            carrier_point, carrier_basis, _ = _affine_basis(vertices)
        return cls(dim, vertices, normals, offsets, affine_dim,
                   carrier_point, carrier_basis)


def _hull_full_dim(points):
    """Qhull on full-dimensional canonical input.

    Returns (vertex indices into points, A, b)."""
    global hull_call_count
    hull_call_count += 1
    dim = points.shape[1]
    opts = "Qx" if dim > 4 else ""
    hull = ConvexHull(points, qhull_options=opts)
    # hull.equations rows are [a, c] with a.x + c <= 0 and |a| = 1
    eqs = _dedupe_rows(_canonical_rows(hull.equations), 1e-12 * _scale(hull.equations))
    return np.sort(hull.vertices), eqs[:, :-1], -eqs[:, -1]


def _hull_1d(values):
    idx = np.array(sorted({int(np.argmin(values)), int(np.argmax(values))}))
    lo, hi = float(np.min(values)), float(np.max(values))
    normals = np.array([[-1.0], [1.0]])
    offsets = np.array([-lo, hi])
    return idx, normals, offsets


def convex_hull(points, dim=None, tol=DEFAULT_TOL):
    """Convex hull of d-vectors in dual representation.

    Degenerate inputs are detected via the carrier subspace (SVD threshold
    tol * sigma_max) and hulled inside it; the stored halfspaces are the
    sub-hull facets lifted back to the ambient space. Output is canonical:
    any permutation of the input yields bit-identical results.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        raise GeometryError("empty point set")
    if dim is None:
        dim = points.shape[1]
    if not (1 <= dim <= MAX_DIM):
        raise GeometryError(f"dimension {dim} out of range 1..{MAX_DIM}")
    if points.shape[1] != dim:
        raise GeometryError(f"points have dimension {points.shape[1]}, expected {dim}")
    _check_finite(points)

    # Canonical input: exact-duplicate removal + lexicographic sort makes
    # the whole pipeline permutation-invariant.
    points = _canonical_rows(np.unique(points, axis=0))

    center, basis, adim = _affine_basis(points, tol)

    if adim == 0:
        v = points[:1]
        return Polytope(dim, v, np.zeros((0, dim)), np.zeros(0), 0,
                        v[0].copy(), np.zeros((dim, 0)))

    if adim == dim:
        if dim == 1:
            idx, normals, offsets = _hull_1d(points[:, 0])
        else:
            idx, normals, offsets = _hull_full_dim(points)
        return Polytope(dim, points[idx], normals, offsets, dim)

    # Degenerate: hull inside the carrier; vertices stay exact input points.
    local = (points - center) @ basis
    if adim == 1:
        idx, _, _ = _hull_1d(local[:, 0])
    else:
        idx, _, _ = _hull_full_dim(local)
    vertices = points[idx]
    # Recompute the carrier from the canonical vertex set so that
    # serialization round-trips reproduce it exactly, then derive the
    # lifted facets from it.
    center, basis, _ = _affine_basis(vertices, tol)
    local_v = (vertices - center) @ basis
    if adim == 1:
        _, ln, lo = _hull_1d(local_v[:, 0])
    else:
        _, ln, lo = _hull_full_dim(local_v)
    normals = ln @ basis.T
    offsets = lo + normals @ center
    hs = _canonical_rows(np.column_stack([normals, offsets]))
    return Polytope(dim, vertices, hs[:, :-1], hs[:, -1], adim,
                    center, basis)


def contains(poly, x, tol=DEFAULT_TOL):
    """True iff a.x <= b + tol for all halfspaces (and x is within tol of
    the carrier when the set is lower-dimensional). tol is scaled by the
    data magnitude."""
    x = np.asarray(x, dtype=float)
    if x.shape != (poly.dim,):
        raise GeometryError(f"point has shape {x.shape}, expected ({poly.dim},)")
    if poly.is_empty:
        return False
    t = tol * _scale(poly.vertices, x)
    if poly.carrier_basis is not None:
        rel = x - poly.carrier_point
        perp = rel - poly.carrier_basis @ (poly.carrier_basis.T @ rel)
        if np.linalg.norm(perp) > t:
            return False
    if poly.n_halfspaces == 0:
        return True
    return bool(np.all(poly.halfspace_normals @ x <= poly.halfspace_offsets + t))


def contains_batch(poly, xs, tol=DEFAULT_TOL):
    """Vectorized membership for an (n, dim) array of points."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if poly.is_empty:
        return np.zeros(len(xs), dtype=bool)
    t = tol * _scale(poly.vertices, xs)
    ok = np.ones(len(xs), dtype=bool)
    if poly.carrier_basis is not None:
        rel = xs - poly.carrier_point
        perp = rel - (rel @ poly.carrier_basis) @ poly.carrier_basis.T
        ok &= np.linalg.norm(perp, axis=1) <= t
    if poly.n_halfspaces:
        ok &= np.all(xs @ poly.halfspace_normals.T
                     <= poly.halfspace_offsets + t, axis=1)
    return ok


def _lift_equalities(poly):
    """Equality constraints N.x = N.c for the carrier's perpendicular space."""
    if poly.carrier_basis is None:
        return np.zeros((0, poly.dim)), np.zeros(0)
    basis = poly.carrier_basis
    u, s, vt = np.linalg.svd(basis.T, full_matrices=True)
    perp = vt[basis.shape[1]:]
    return perp, perp @ poly.carrier_point


def _chebyshev_lp(A, b):
    """Largest inscribed ball of {A x <= b}: returns (center, radius) or None
    when infeasible. Unit-norm rows assumed not required."""
    m, n = A.shape
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.column_stack([A, norms])
    res = linprog(c, A_ub=A_ub, b_ub=b,
                  bounds=[(None, None)] * n + [(0, None)],
                  method="highs")
    if not res.success:
        return None
    return res.x[:n], float(res.x[-1])


def _enumerate_vertices(A_ub, b_ub, A_eq, b_eq, dim, tol):
    """Vertices of {x : A_ub x <= b_ub, A_eq x = b_eq} in R^dim.

    Equalities are substituted out first; remaining implicit equalities
    (degenerate faces) are detected by LP and folded in recursively.
    Returns an (n, dim) array, or None for an empty set.
    """
    scale = _scale(b_ub, b_eq) if (b_ub.size or b_eq.size) else 1.0
    eq_tol = 1e-7 * scale

    if A_eq.shape[0]:
        # Particular solution + nullspace parametrization x = x0 + N y.
        x0, *_ = np.linalg.lstsq(A_eq, b_eq, rcond=None)
        if np.max(np.abs(A_eq @ x0 - b_eq)) > eq_tol:
            return None
        u, s, vt = np.linalg.svd(A_eq, full_matrices=True)
        rank = int(np.sum(s > max(1e-12, 1e-12 * (s[0] if s.size else 1.0))))
        N = vt[rank:].T
        if N.shape[1] == 0:
            if A_ub.shape[0] == 0 or np.all(A_ub @ x0 <= b_ub + eq_tol):
                return x0[None, :]
            return None
        A_red = A_ub @ N
        b_red = b_ub - A_ub @ x0
        sub = _enumerate_vertices(A_red, b_red,
                                  np.zeros((0, N.shape[1])), np.zeros(0),
                                  N.shape[1], tol)
        if sub is None:
            return None
        return sub @ N.T + x0

    if A_ub.shape[0] == 0:
        raise GeometryError("unbounded halfspace system")

    # Drop numerically-zero rows (artifacts of substitution).
    row_norms = np.linalg.norm(A_ub, axis=1)
    keep = row_norms > 1e-12
    if not np.all(keep):
        if np.any(b_ub[~keep] < -eq_tol):
            return None
        A_ub, b_ub = A_ub[keep], b_ub[keep]
        if A_ub.shape[0] == 0:
            raise GeometryError("unbounded halfspace system")

    cheb = _chebyshev_lp(A_ub, b_ub)
    if cheb is None:
        return None
    center, radius = cheb

    if radius <= eq_tol:
        # Flat set: find the halfspaces the whole set lies on.
        eq_rows = []
        for i in range(A_ub.shape[0]):
            res = linprog(A_ub[i], A_ub=A_ub, b_ub=b_ub,
                          bounds=[(None, None)] * dim, method="highs")
            if not res.success:
                return None
            if b_ub[i] - res.fun <= eq_tol:
                eq_rows.append(i)
        if not eq_rows:
            # Thin but not exactly flat; fall through with the point we have.
            return center[None, :]
        mask = np.ones(A_ub.shape[0], dtype=bool)
        mask[eq_rows] = False
        return _enumerate_vertices(A_ub[mask], b_ub[mask],
                                   A_ub[eq_rows], b_ub[eq_rows], dim, tol)

    if dim == 1:
        ups = b_ub[A_ub[:, 0] > 0] / A_ub[A_ub[:, 0] > 0, 0]
        downs = b_ub[A_ub[:, 0] < 0] / A_ub[A_ub[:, 0] < 0, 0]
        if ups.size == 0 or downs.size == 0:
            raise GeometryError("unbounded halfspace system")
        return np.array([[float(np.max(downs))], [float(np.min(ups))]])

    hs = np.column_stack([A_ub, -b_ub])
    try:
        inter = HalfspaceIntersection(hs, center)
    except QhullError as exc:
        raise GeometryError(f"vertex enumeration failed: {exc}") from exc
    return inter.intersections


def slice_fix_coordinate(poly, axis, value, tol=DEFAULT_TOL):
    """Intersection with {x : x[axis] = value}, returned as a polytope of
    dimension dim - 1 (the fixed coordinate substituted out). Returns the
    empty marker when the hyperplane misses the set."""
    if not (0 <= axis < poly.dim):
        raise GeometryError(f"axis {axis} out of range for dim {poly.dim}")
    if poly.is_empty:
        return Polytope.empty(poly.dim - 1)
    if poly.dim == 1:
        if contains(poly, np.array([value]), tol):
            raise GeometryError("cannot slice a 1-D set down to dimension 0")
        return Polytope.empty(0)

    keep = [i for i in range(poly.dim) if i != axis]
    A = poly.halfspace_normals
    b = poly.halfspace_offsets
    A_ub = A[:, keep]
    b_ub = b - A[:, axis] * value
    E, e = _lift_equalities(poly)
    A_eq = E[:, keep]
    b_eq = e - E[:, axis] * value

    pts = _enumerate_vertices(A_ub, b_ub, A_eq, b_eq, poly.dim - 1, tol)
    if pts is None or len(pts) == 0:
        return Polytope.empty(poly.dim - 1)
    return convex_hull(pts, poly.dim - 1, tol)


def ray_clip(poly, anchor, target, tol=DEFAULT_TOL):
    """Farthest feasible point on the segment anchor -> target.

    Returns anchor + t*.(target - anchor) with t* = min(1, max t such that
    the point stays inside); equals target when the whole segment fits.
    """
    anchor = np.asarray(anchor, dtype=float)
    target = np.asarray(target, dtype=float)
    if not contains(poly, anchor, max(tol, 1e-7)):
        raise GeometryError("ray_clip anchor is not inside the set")
    d = target - anchor
    if np.linalg.norm(d) == 0.0:
        return anchor.copy()
    t_max = 1.0
    if poly.n_halfspaces:
        num = poly.halfspace_offsets - poly.halfspace_normals @ anchor
        den = poly.halfspace_normals @ d
        pos = den > 1e-15 * _scale(d)
        if np.any(pos):
            t_max = min(t_max, float(np.min(np.maximum(num[pos], 0.0) / den[pos])))
    if poly.carrier_basis is not None:
        # Stay within the carrier's tolerance band: |perp(x(t) - c)| <= band.
        band = tol * _scale(poly.vertices, anchor, target)
        rel = anchor - poly.carrier_point
        perp0 = rel - poly.carrier_basis @ (poly.carrier_basis.T @ rel)
        perpd = d - poly.carrier_basis @ (poly.carrier_basis.T @ d)
        a2 = float(perpd @ perpd)
        if a2 > 1e-30:
            b1 = float(perp0 @ perpd)
            c0 = float(perp0 @ perp0) - band * band
            disc = b1 * b1 - a2 * c0
            root = (-b1 + np.sqrt(max(disc, 0.0))) / a2
            t_max = min(t_max, max(root, 0.0))
    return anchor + t_max * d


def inscribed_radius(poly, center):
    """min over halfspaces of (b - a.center) / |a|.

    Negative iff the center is outside (magnitude = largest violation).
    Lower-dimensional sets have radius 0 by definition.
    """
    if poly.is_empty:
        raise GeometryError("inscribed radius of an empty set")
    center = np.asarray(center, dtype=float)
    if poly.affine_dim < poly.dim:
        return 0.0
    margins = ((poly.halfspace_offsets - poly.halfspace_normals @ center)
               / np.linalg.norm(poly.halfspace_normals, axis=1))
    return float(np.min(margins))


def transform(poly, rotation, translation, tol=1e-9):
    """Rigid map x -> R x + t applied to both representations."""
    rotation = np.asarray(rotation, dtype=float)
    translation = np.asarray(translation, dtype=float)
    if rotation.shape != (poly.dim, poly.dim):
        raise GeometryError("rotation shape mismatch")
    if np.max(np.abs(rotation.T @ rotation - np.eye(poly.dim))) > tol:
        raise GeometryError("rotation is not orthonormal")
    if poly.is_empty:
        return poly
    vertices = poly.vertices @ rotation.T + translation
    normals = poly.halfspace_normals @ rotation.T
    offsets = poly.halfspace_offsets + normals @ translation
    cp = cb = None
    if poly.carrier_basis is not None:
        cp = rotation @ poly.carrier_point + translation
        cb = rotation @ poly.carrier_basis
    return Polytope(poly.dim, vertices, normals, offsets, poly.affine_dim,
                    cp, cb)


def interior_point(poly):
    """A point in the relative interior (vertex centroid)."""
    if poly.is_empty:
        raise GeometryError("interior point of an empty set")
    return poly.vertices.mean(axis=0)
