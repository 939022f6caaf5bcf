"""Discrete closed submanifolds: polygonal curves, triangle meshes and curves
drawn on surfaces of revolution.

Every shape carries a positive per-vertex scalar field ``f`` and per-vertex
connected-component labels.  Vertex integrals use dual measures (half the
adjacent edge lengths on curves, a third of the adjacent face areas on
meshes); element integrals use edge lengths / face areas.

Mean curvature follows the *trace* convention: on a round sphere of radius
``R`` the mean curvature vector has length ``2/R`` and points inward.
"""
from __future__ import annotations

import hashlib
import inspect
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .ambient import AmbientModel, Cone, Cylinder, Paraboloid
from .errors import DegenerateInputError, DomainError, UsageError

__all__ = [
    "ClosedCurve",
    "TriMesh",
    "CurveOnSurface",
    "GeometricMeasures",
    "make_shape",
    "parse_shape_spec",
    "mean_curvature",
    "tangential_gradient",
    "integrate",
    "measures",
    "random_positive_field",
    "edge_mean",
]

MIN_CURVE_VERTICES = 8


def _positive_field(f, n):
    if f is None:
        return np.ones(n)
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.shape != (n,):
        raise DomainError(f"scalar field has {f.size} values for {n} vertices")
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        raise DomainError("scalar field must be finite and strictly positive")
    return f


class _Shape:
    intrinsic_dim: int
    f: np.ndarray
    labels: np.ndarray

    @property
    def n_vertices(self):
        return self.labels.size

    @property
    def n_components(self):
        return int(np.unique(self.labels).size)

    def with_field(self, f):
        raise NotImplementedError

    def checksum(self) -> str:
        h = hashlib.sha256()
        for arr in self._checksum_arrays():
            a = np.ascontiguousarray(arr)
            h.update(str(a.dtype).encode())
            h.update(str(a.shape).encode())
            h.update(a.tobytes())
        return h.hexdigest()


class ClosedCurve(_Shape):
    """Closed polygon(s) in ``R^m``; each component is a cyclic vertex list.

    Edge ``i`` joins vertex ``i`` to ``next[i]``.
    """

    intrinsic_dim = 1

    def __init__(self, points, f=None, components=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] < 2:
            raise DomainError("curve points must be an (N, m) array with m >= 2")
        if not np.all(np.isfinite(pts)):
            raise DomainError("curve points must be finite")
        n = pts.shape[0]
        labels = np.zeros(n, dtype=int) if components is None else np.asarray(components).reshape(-1)
        if labels.shape != (n,):
            raise DomainError("one component label per vertex is required")
        _, labels = np.unique(labels, return_inverse=True)
        nxt = np.empty(n, dtype=int)
        for c in range(labels.max() + 1):
            idx = np.flatnonzero(labels == c)
            if idx.size < MIN_CURVE_VERTICES:
                raise DomainError(
                    f"curve component {c} has {idx.size} vertices; at least {MIN_CURVE_VERTICES} required"
                )
            nxt[idx] = np.roll(idx, -1)
        prv = np.empty(n, dtype=int)
        prv[nxt] = np.arange(n)
        self.points = pts
        self.labels = labels
        self.next = nxt
        self.prev = prv
        self.f = _positive_field(f, n)
        if np.any(self.edge_lengths == 0):
            i = int(np.flatnonzero(self.edge_lengths == 0)[0])
            raise DegenerateInputError(f"zero-length edge between vertices {i} and {nxt[i]}")

    def with_field(self, f):
        return ClosedCurve(self.points, f, self.labels)

    def _checksum_arrays(self):
        return (self.points, self.labels, self.f)

    @property
    def ambient_dim(self):
        return self.points.shape[1]

    @property
    def edge_vectors(self):
        return self.points[self.next] - self.points

    @property
    def edge_lengths(self):
        return np.linalg.norm(self.edge_vectors, axis=1)

    @property
    def element_labels(self):
        return self.labels

    def element_measure(self):
        return self.edge_lengths

    def dual_measure(self):
        ell = self.edge_lengths
        return 0.5 * (ell + ell[self.prev])

    def edge_tangents(self):
        return self.edge_vectors / self.edge_lengths[:, None]

    def vertex_tangents(self):
        """Unit bisector of the two incident edge tangents."""
        T = self.edge_tangents()
        s = T + T[self.prev]
        norm = np.linalg.norm(s, axis=1)
        if np.any(norm < 1e-12):
            raise DegenerateInputError("curve folds back on itself (hairpin vertex)")
        return s / norm[:, None]

    def mean_curvature(self):
        """Discrete Frenet second difference ``2 (T_i - T_{i-1}) / (l_{i-1} + l_i)``."""
        T = self.edge_tangents()
        return (T - T[self.prev]) / self.dual_measure()[:, None]

    def tangential_gradient(self, f):
        f = _positive_field(f, self.n_vertices)
        slope = (f[self.next] - f) / self.edge_lengths
        return slope[:, None] * self.edge_tangents()

    def edge_field_mean(self, f):
        lf = np.log(f)
        return np.exp(0.5 * (lf + lf[self.next]))

    def component_curves(self):
        out = []
        for c in range(self.n_components):
            idx = np.flatnonzero(self.labels == c)
            # walk the cycle so the order is geometric
            order = [idx[0]]
            while len(order) < idx.size:
                order.append(self.next[order[-1]])
            order = np.asarray(order)
            out.append((order, ClosedCurve(self.points[order], self.f[order])))
        return out


class TriMesh(_Shape):
    """Closed, consistently oriented triangle mesh in ``R^3``."""

    intrinsic_dim = 2

    def __init__(self, vertices, faces, f=None, check=True):
        V = np.asarray(vertices, dtype=float)
        F = np.asarray(faces, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] != 3:
            raise DomainError("mesh vertices must be an (N, 3) array")
        if F.ndim != 2 or F.shape[1] != 3:
            raise DomainError("mesh faces must be an (F, 3) integer array")
        if F.size and (F.min() < 0 or F.max() >= V.shape[0]):
            raise DomainError("face index out of range")
        self.vertices = V
        self.faces = F
        self.f = _positive_field(f, V.shape[0])
        if check:
            self._check_closed()
        n = V.shape[0]
        e = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
        adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        _, self.labels = connected_components(adj, directed=False)
        if np.any(self.face_areas() <= 0):
            raise DegenerateInputError("mesh has zero-area faces")

    def _check_closed(self):
        F = self.faces
        directed = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
        used = np.zeros(self.vertices.shape[0], bool)
        used[F.ravel()] = True
        if not used.all():
            raise DomainError("mesh has isolated vertices")
        key = directed[:, 0] * self.vertices.shape[0] + directed[:, 1]
        if np.unique(key).size != key.size:
            raise DomainError("mesh orientation is inconsistent (repeated directed edge)")
        rev = directed[:, 1] * self.vertices.shape[0] + directed[:, 0]
        if not np.all(np.isin(rev, key)):
            raise DomainError("mesh is not closed (boundary edge found)")

    def with_field(self, f):
        m = TriMesh.__new__(TriMesh)
        m.vertices, m.faces, m.labels = self.vertices, self.faces, self.labels
        m.f = _positive_field(f, self.vertices.shape[0])
        return m

    def _checksum_arrays(self):
        return (self.vertices, self.faces, self.f)

    @property
    def element_labels(self):
        return self.labels[self.faces[:, 0]]

    def _face_frames(self):
        V, F = self.vertices, self.faces
        p0, p1, p2 = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
        n = np.cross(p1 - p0, p2 - p0)
        return p0, p1, p2, n

    def face_areas(self):
        *_, n = self._face_frames()
        return 0.5 * np.linalg.norm(n, axis=1)

    def face_normals(self):
        *_, n = self._face_frames()
        return n / np.linalg.norm(n, axis=1)[:, None]

    def element_measure(self):
        return self.face_areas()

    def dual_measure(self):
        A = self.face_areas() / 3.0
        return np.bincount(self.faces.ravel(), weights=np.repeat(A, 3), minlength=self.vertices.shape[0])

    def vertex_normals(self):
        *_, n = self._face_frames()
        acc = np.zeros_like(self.vertices)
        for j in range(3):
            np.add.at(acc, self.faces[:, j], n)
        return acc / np.linalg.norm(acc, axis=1)[:, None]

    def cotan_laplacian_of_positions(self):
        """``sum_j (cot a_ij + cot b_ij)(x_j - x_i)`` at every vertex."""
        V, F = self.vertices, self.faces
        out = np.zeros_like(V)
        for k in range(3):
            i, j, o = F[:, (k + 1) % 3], F[:, (k + 2) % 3], F[:, k]
            a = V[i] - V[o]
            b = V[j] - V[o]
            cot = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
            d = (V[j] - V[i]) * cot[:, None]
            np.add.at(out, i, d)
            np.add.at(out, j, -d)
        return out

    def mixed_voronoi_area(self):
        """Voronoi cell areas, with the obtuse-triangle fallback of Meyer et al."""
        V, F = self.vertices, self.faces
        p = [V[F[:, k]] for k in range(3)]
        area = self.face_areas()
        cot, obtuse = [], []
        for k in range(3):
            a = p[(k + 1) % 3] - p[k]
            b = p[(k + 2) % 3] - p[k]
            dot = np.einsum("ij,ij->i", a, b)
            cot.append(dot / np.linalg.norm(np.cross(a, b), axis=1))
            obtuse.append(dot < 0)
        any_obtuse = obtuse[0] | obtuse[1] | obtuse[2]
        out = np.zeros(V.shape[0])
        for k in range(3):
            j, l = (k + 1) % 3, (k + 2) % 3
            vor = (np.sum((p[j] - p[k]) ** 2, 1) * cot[l] + np.sum((p[l] - p[k]) ** 2, 1) * cot[j]) / 8.0
            val = np.where(any_obtuse, np.where(obtuse[k], 0.5 * area, 0.25 * area), vor)
            np.add.at(out, F[:, k], val)
        return out

    def mean_curvature(self):
        # the cotan sum is a Voronoi-cell integral, so normalize by that cell;
        # barycentric cells carry O(1) pointwise error on irregular meshes
        return self.cotan_laplacian_of_positions() / (2.0 * self.mixed_voronoi_area()[:, None])

    def tangential_gradient(self, f):
        """Gradient of the piecewise-linear interpolant of ``f`` on each face."""
        f = _positive_field(f, self.vertices.shape[0])
        V, F = self.vertices, self.faces
        *_, n = self._face_frames()
        twice_area = np.linalg.norm(n, axis=1)
        nhat = n / twice_area[:, None]
        grad = np.zeros((F.shape[0], 3))
        for k in range(3):
            # edge opposite vertex k, oriented along the face boundary
            e = V[F[:, (k + 2) % 3]] - V[F[:, (k + 1) % 3]]
            grad += f[F[:, k]][:, None] * np.cross(nhat, e)
        return grad / twice_area[:, None]

    def edge_field_mean(self, f):
        # log space: products of tiny values underflow
        return np.exp(np.log(f)[self.faces].mean(axis=1))


class CurveOnSurface(ClosedCurve):
    """Closed curve sampled in ``(u, v)`` coordinates of a surface of revolution.

    Measures come from the embedded polygon in ``R^3``; the mean curvature is
    the geodesic-curvature vector of the curve inside the surface, computed
    from the covariant derivative of the velocity with the Christoffel
    symbols of ``E(u) du^2 + G(u) dv^2`` (for the cylinder ``u`` is the height
    and ``v`` the angle).
    """

    def __init__(self, surface: AmbientModel, samples, f=None):
        if not isinstance(surface, (Paraboloid, Cone, Cylinder)):
            raise DomainError("CurveOnSurface needs a surface of revolution")
        uv = np.asarray(samples, dtype=float)
        if uv.ndim != 2 or uv.shape[1] != 2 or not np.all(np.isfinite(uv)):
            raise DomainError("samples must be an (N, 2) array of (u, v)")
        if isinstance(surface, (Paraboloid, Cone)) and np.any(uv[:, 0] <= 0):
            raise DomainError("curve must stay away from the apex (u > 0)")
        self.surface = surface
        self.uv = uv
        super().__init__(surface.embed(uv[:, 0], uv[:, 1]), f)

    def with_field(self, f):
        return CurveOnSurface(self.surface, self.uv, f)

    def checksum(self):
        h = hashlib.sha256(repr(sorted(self.surface.describe().items())).encode())
        for a in (self.uv, self.f):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    def _periodic_derivatives(self):
        uv = self.uv
        du = np.roll(uv, -1, axis=0) - np.roll(uv, 1, axis=0)
        dd = np.roll(uv, -1, axis=0) - 2 * uv + np.roll(uv, 1, axis=0)
        # unwrap the angle differences
        du[:, 1] = np.mod(du[:, 1] + math.pi, 2 * math.pi) - math.pi
        fwd = np.mod(np.roll(uv[:, 1], -1) - uv[:, 1] + math.pi, 2 * math.pi) - math.pi
        bwd = np.mod(uv[:, 1] - np.roll(uv[:, 1], 1) + math.pi, 2 * math.pi) - math.pi
        dd[:, 1] = fwd - bwd
        return 0.5 * du, dd

    def geodesic_curvature_coords(self):
        """Geodesic curvature vector in ``(u, v)`` components."""
        vel, acc = self._periodic_derivatives()
        u = self.uv[:, 0]
        E, G, Eu, Gu = self.surface.metric(u)
        uu, vv = vel[:, 0], vel[:, 1]
        # Christoffel symbols of E(u) du^2 + G(u) dv^2
        g_u_uu = Eu / (2 * E)
        g_u_vv = -Gu / (2 * E)
        g_v_uv = Gu / (2 * G)
        cov = np.stack(
            [acc[:, 0] + g_u_uu * uu**2 + g_u_vv * vv**2, acc[:, 1] + 2 * g_v_uv * uu * vv], axis=1
        )
        speed2 = E * uu**2 + G * vv**2
        along = (E * cov[:, 0] * uu + G * cov[:, 1] * vv) / speed2
        normal = cov - along[:, None] * vel
        return normal / speed2[:, None]

    def mean_curvature(self):
        k = self.geodesic_curvature_coords()
        r_u, r_v = self.surface.embed_jacobian(self.uv[:, 0], self.uv[:, 1])
        return r_u * k[:, 0:1] + r_v * k[:, 1:2]

    def geodesic_curvature_norm(self):
        k = self.geodesic_curvature_coords()
        E, G, _, _ = self.surface.metric(self.uv[:, 0])
        return np.sqrt(E * k[:, 0] ** 2 + G * k[:, 1] ** 2)


# --- measures --------------------------------------------------------------


@dataclass
class GeometricMeasures:
    dual: np.ndarray
    mean_curvature: np.ndarray
    gradient: np.ndarray
    element_measure: np.ndarray


def measures(shape, f=None) -> GeometricMeasures:
    f = shape.f if f is None else f
    return GeometricMeasures(
        dual=shape.dual_measure(),
        mean_curvature=mean_curvature(shape),
        gradient=tangential_gradient(shape, f),
        element_measure=shape.element_measure(),
    )


def mean_curvature(shape) -> np.ndarray:
    """Per-vertex mean curvature vectors (trace convention)."""
    return shape.mean_curvature()


def tangential_gradient(shape, f=None) -> np.ndarray:
    """Per-edge (curves) or per-face (meshes) gradient of ``f``."""
    return shape.tangential_gradient(shape.f if f is None else f)


def edge_mean(shape, f=None) -> np.ndarray:
    """Geometric mean of ``f`` over the vertices of each edge / face."""
    return shape.edge_field_mean(shape.f if f is None else np.asarray(f, float))


def integrate(shape, values, stratum: str = "vertex") -> float:
    """Integrate a vertex field against dual measures or an element field
    against edge lengths / face areas."""
    values = np.asarray(values, dtype=float)
    if stratum == "vertex":
        w = shape.dual_measure()
    elif stratum == "element":
        w = shape.element_measure()
    else:
        raise UsageError(f"unknown stratum {stratum!r}")
    if values.shape != w.shape:
        raise UsageError(f"{stratum} field has shape {values.shape}, expected {w.shape}")
    return float(np.dot(w, values))


# --- generators ------------------------------------------------------------


def _need(cond, msg):
    if not cond:
        raise DomainError(msg)


def circle(radius=1.0, n=64, center=(0.0, 0.0)):
    _need(radius > 0, "circle radius must be positive")
    _need(n >= MIN_CURVE_VERTICES, f"circle needs n >= {MIN_CURVE_VERTICES}")
    t = 2 * math.pi * np.arange(n) / n
    return ClosedCurve(np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]))


def ellipse(a_x=2.0, b_y=1.0, n=64):
    _need(a_x > 0 and b_y > 0, "ellipse semi-axes must be positive")
    _need(n >= MIN_CURVE_VERTICES, f"ellipse needs n >= {MIN_CURVE_VERTICES}")
    t = 2 * math.pi * np.arange(n) / n
    return ClosedCurve(np.column_stack([a_x * np.cos(t), b_y * np.sin(t)]))


def two_circles(radius=math.sqrt(2), separation=10.0, n=64):
    _need(separation > 2 * radius, "circles must not overlap")
    a = circle(radius, n).points
    b = circle(radius, n, center=(separation, 0.0)).points
    return ClosedCurve(np.vstack([a, b]), components=np.repeat([0, 1], n))


def random_fourier_curve(seed=0, k=3, n=256):
    """Star-shaped smooth curve ``rho(t)(cos t, sin t)`` with random low modes.

    Coefficients decay like ``1/j^2`` and sum to at most 0.45 in absolute
    value, so ``rho`` stays in ``[0.55, 1.45]`` and curvature is bounded.
    """
    _need(n >= MIN_CURVE_VERTICES, f"curve needs n >= {MIN_CURVE_VERTICES}")
    _need(k >= 1, "need at least one Fourier mode")
    rng = np.random.default_rng(seed)
    j = np.arange(1, k + 1)
    coef = rng.uniform(-1, 1, size=(2, k)) / j**2
    coef *= 0.45 / max(np.abs(coef).sum(), 0.45)
    t = 2 * math.pi * np.arange(n) / n
    rad = 1.0 + coef[0] @ np.cos(np.outer(j, t)) + coef[1] @ np.sin(np.outer(j, t))
    return ClosedCurve(np.column_stack([rad * np.cos(t), rad * np.sin(t)]))


def parallel_on_paraboloid(a=1.0, u0=1.0, n=64):
    _need(u0 > 0, "parallel must have u0 > 0")
    v = 2 * math.pi * np.arange(n) / n
    return CurveOnSurface(Paraboloid(a), np.column_stack([np.full(n, float(u0)), v]))


_ICO_CACHE = {}


def _icosahedron():
    p = (1 + math.sqrt(5)) / 2
    V = np.array(
        [[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0], [0, -1, p], [0, 1, p],
         [0, -1, -p], [0, 1, -p], [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]],
        dtype=float,
    )
    F = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
         [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
         [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    )
    return V / np.linalg.norm(V, axis=1)[:, None], F


def _unit_icosphere(level):
    if level in _ICO_CACHE:
        return _ICO_CACHE[level]
    V, F = _icosahedron()
    V = list(V)
    for _ in range(level):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = V[i] + V[j]
                V.append(m / np.linalg.norm(m))
                cache[key] = len(V) - 1
            return cache[key]

        out = []
        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            out += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        F = np.array(out)
    res = (np.array(V), np.asarray(F))
    _ICO_CACHE[level] = res
    return res


def icosphere(radius=1.0, subdivisions=3):
    _need(radius > 0, "sphere radius must be positive")
    _need(0 <= subdivisions <= 7, "subdivisions must be in [0, 7]")
    V, F = _unit_icosphere(int(subdivisions))
    return TriMesh(radius * V, F)


def ellipsoid(axes=(1.0, 1.0, 1.0), subdivisions=3):
    axes = np.asarray(axes, float)
    _need(axes.shape == (3,) and np.all(axes > 0), "ellipsoid needs three positive semi-axes")
    V, F = _unit_icosphere(int(subdivisions))
    return TriMesh(V * axes, F)


def torus(r_major=2.0, r_minor=0.5, n=48, m=24):
    _need(r_major > r_minor > 0, "torus needs r_major > r_minor > 0")
    _need(n >= 3 and m >= 3, "torus needs at least 3x3 samples")
    i, j = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    a = 2 * math.pi * i / n
    b = 2 * math.pi * j / m
    ring = r_major + r_minor * np.cos(b)
    V = np.stack([ring * np.cos(a), ring * np.sin(a), r_minor * np.sin(b)], axis=-1).reshape(-1, 3)
    idx = lambda ii, jj: (ii % n) * m + (jj % m)
    q00, q10, q11, q01 = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
    F = np.concatenate(
        [np.stack([q00, q10, q11], -1).reshape(-1, 3), np.stack([q00, q11, q01], -1).reshape(-1, 3)]
    )
    return TriMesh(V, F)


def uv_sphere(radius=1.0, n_theta=64, n_phi=64, focus=0.0):
    """Latitude-longitude sphere with poles as single vertices.

    ``focus > 0`` grades the polar-angle spacing towards the north pole
    (``theta = pi * s^(1 + focus)`` for uniform ``s``).
    """
    _need(radius > 0 and n_theta >= 3 and n_phi >= 3, "invalid uv-sphere parameters")
    s = np.arange(1, n_theta) / n_theta
    th = math.pi * s ** (1.0 + focus)
    ph = 2 * math.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    body = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
    V = np.vstack([[0, 0, 1.0], body, [0, 0, -1.0]]) * radius
    north, south = 0, V.shape[0] - 1
    ring = lambda a, b: 1 + a * n_phi + (b % n_phi)
    F = []
    for b in range(n_phi):
        F.append([north, ring(0, b), ring(0, b + 1)])
        F.append([south, ring(n_theta - 2, b + 1), ring(n_theta - 2, b)])
        for a in range(n_theta - 2):
            F.append([ring(a, b), ring(a + 1, b), ring(a + 1, b + 1)])
            F.append([ring(a, b), ring(a + 1, b + 1), ring(a, b + 1)])
    return TriMesh(V, np.array(F))


GENERATORS = {
    "circle": circle,
    "ellipse": ellipse,
    "two_circles": two_circles,
    "icosphere": icosphere,
    "ellipsoid": ellipsoid,
    "torus": torus,
    "uv_sphere": uv_sphere,
    "parallel_on_paraboloid": parallel_on_paraboloid,
    "random_fourier_curve": random_fourier_curve,
}


def make_shape(name: str, *args, **params):
    """Build a shape from a named generator; the field is ``f = 1``."""
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise DomainError(f"unknown shape generator {name!r}") from None
    bad = set(params) - set(inspect.signature(gen).parameters)
    if bad:
        raise DomainError(f"{name} does not take {', '.join(sorted(bad))}")
    return gen(*args, **params)


def parse_shape_spec(text: str):
    """``circle:radius=1.4142,n=512`` -> shape."""
    name, _, rest = text.partition(":")
    kwargs = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if "=" not in item:
            raise DomainError(f"shape parameter {item!r} must be key=value")
        key, value = (t.strip() for t in item.split("=", 1))
        if key in ("n", "m", "k", "seed", "subdivisions", "n_theta", "n_phi"):
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    return make_shape(name.strip(), **kwargs)


def random_positive_field(shape, seed=0, modes=3, amplitude=0.5, scale=None):
    """Smooth random ``f = c * exp(sum of low Fourier modes)``.

    Curves use the vertex index around each component as the angle; meshes
    use low-frequency plane waves in the vertex coordinates.  ``scale``
    (default: random in ``[0.1, 10]``) multiplies the whole field.
    """
    rng = np.random.default_rng(seed)
    c = 10.0 ** rng.uniform(-1, 1) if scale is None else float(scale)
    if isinstance(shape, TriMesh):
        x = shape.vertices / max(np.abs(shape.vertices).max(), 1e-300)
        g = np.zeros(x.shape[0])
        for _ in range(modes):
            k = rng.normal(size=3) * 1.5
            g += rng.uniform(-1, 1) * amplitude * np.cos(x @ k + rng.uniform(0, 2 * math.pi))
        return c * np.exp(g)
    g = np.zeros(shape.n_vertices)
    for comp in range(shape.n_components):
        idx = np.flatnonzero(shape.labels == comp)
        order = [idx[0]]
        while len(order) < idx.size:
            order.append(shape.next[order[-1]])
        t = 2 * math.pi * np.arange(idx.size) / idx.size
        vals = np.zeros(idx.size)
        for j in range(1, modes + 1):
            vals += amplitude * rng.uniform(-1, 1) / j * np.cos(j * t + rng.uniform(0, 2 * math.pi))
        g[np.asarray(order)] = vals
    return c * np.exp(g)
