import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from lsiaudit.ambient import Cone, Paraboloid
from lsiaudit.errors import DegenerateInputError, DomainError, UsageError
from lsiaudit.submanifold import (
    ClosedCurve,
    CurveOnSurface,
    TriMesh,
    circle,
    edge_mean,
    ellipse,
    ellipsoid,
    icosphere,
    integrate,
    make_shape,
    mean_curvature,
    measures,
    parallel_on_paraboloid,
    parse_shape_spec,
    random_fourier_curve,
    random_positive_field,
    tangential_gradient,
    torus,
    two_circles,
    uv_sphere,
)


def slope(N, err):
    return float(np.polyfit(np.log(N), np.log(err), 1)[0])


def _projected_polygon_curvature(curve):
    """Oracle for curves on a surface: Frenet curvature of the embedded
    polygon, minus its component along the surface normal."""
    H3 = ClosedCurve(curve.points).mean_curvature()
    ru, rv = curve.surface.embed_jacobian(curve.uv[:, 0], curve.uv[:, 1])
    n = np.cross(ru, rv)
    n /= np.linalg.norm(n, axis=1)[:, None]
    return H3 - np.einsum("ij,ij->i", H3, n)[:, None] * n


# --- generators ------------------------------------------------------------


def test_circle_length():
    c = circle(1.0, 64)
    L = c.edge_lengths.sum()
    assert L == pytest.approx(2 * math.pi, rel=2 * (math.pi / 64) ** 2)
    assert L == pytest.approx(128 * math.sin(math.pi / 64), rel=1e-14)


def test_icosphere_area():
    s = icosphere(2.0, 3)
    assert s.face_areas().sum() == pytest.approx(16 * math.pi, rel=5e-3)
    assert s.n_components == 1


def test_two_circles_components():
    t = two_circles(math.sqrt(2), 10, 64)
    assert t.n_components == 2
    m = [integrate(t, (t.labels == c).astype(float)) for c in (0, 1)]
    assert m[0] == pytest.approx(m[1], rel=1e-14)


@pytest.mark.parametrize("bad", [lambda: circle(1.0, 4), lambda: circle(-1.0, 32), lambda: two_circles(1, 1.5, 32), lambda: torus(1, 2)])
def test_degenerate_parameters(bad):
    with pytest.raises(DomainError):
        bad()


def test_zero_length_edge():
    pts = circle(1.0, 16).points
    pts[3] = pts[2]
    with pytest.raises(DegenerateInputError):
        ClosedCurve(pts)


def test_open_mesh_rejected():
    s = icosphere(1.0, 1)
    with pytest.raises(DomainError):
        TriMesh(s.vertices, s.faces[:-1])


def test_nonpositive_field_rejected():
    c = circle(1.0, 16)
    with pytest.raises(DomainError):
        c.with_field(np.r_[np.ones(15), 0.0])
    with pytest.raises(DomainError):
        c.with_field(np.ones(3))


def test_shape_spec_parsing():
    s = parse_shape_spec("circle:radius=2,n=128")
    assert s.n_vertices == 128
    assert np.linalg.norm(s.points, axis=1) == pytest.approx(np.full(128, 2.0))
    assert make_shape("icosphere", 1.0, 2).n_vertices == 162
    with pytest.raises(DomainError):
        parse_shape_spec("blob:n=3")
    with pytest.raises(DomainError):
        parse_shape_spec("circle:2")


def test_random_fourier_curve_is_simple_star():
    for seed in range(20):
        c = random_fourier_curve(seed, 3, 256)
        r = np.linalg.norm(c.points, axis=1)
        assert r.min() >= 0.55 - 1e-12 and r.max() <= 1.45 + 1e-12
        ang = np.unwrap(np.arctan2(c.points[:, 1], c.points[:, 0]))
        assert np.all(np.diff(ang) > 0)


# --- mean curvature --------------------------------------------------------------


def test_circle_curvature():
    H = mean_curvature(circle(1.0, 256))
    assert np.abs(np.linalg.norm(H, axis=1) - 1).max() < 1e-3
    # points to the center
    c = circle(1.0, 256)
    assert np.all(np.einsum("ij,ij->i", H, c.points) < 0)


def test_icosphere_curvature_trace_convention():
    H = mean_curvature(icosphere(2.0, 4))
    assert np.abs(np.linalg.norm(H, axis=1) - 1).max() < 2e-2


def test_parallel_on_paraboloid():
    p = parallel_on_paraboloid(1.0, 1.0, 256)
    H = np.linalg.norm(p.mean_curvature(), axis=1)
    assert H == pytest.approx(np.full(256, 1 / math.sqrt(2)), abs=1e-3)
    assert p.geodesic_curvature_norm() == pytest.approx(np.full(256, 1 / math.sqrt(2)), abs=1e-3)
    oracle = np.linalg.norm(_projected_polygon_curvature(p), axis=1)
    assert H == pytest.approx(oracle, abs=1e-3)


@pytest.mark.parametrize("surface", [Paraboloid(0.7), Cone(0.6)])
def test_wavy_curve_on_surface_against_projection(surface):
    errs = []
    for n in (1024, 4096):
        v = 2 * math.pi * np.arange(n) / n
        uv = np.column_stack([1.2 + 0.3 * np.cos(3 * v), v + 0.2 * np.sin(2 * v)])
        c = CurveOnSurface(surface, uv)
        H = c.mean_curvature()
        errs.append(np.abs(H - _projected_polygon_curvature(c)).max() / np.abs(H).max())
    assert errs[0] < 1e-3
    # both discretizations are second order, so the gap shrinks ~16x
    assert errs[1] < errs[0] / 10


def test_curve_on_surface_rejects_apex():
    with pytest.raises(DomainError):
        CurveOnSurface(Cone(0.5), np.column_stack([np.zeros(16), np.linspace(0, 6, 16)]))


def test_circle_curvature_exact_on_regular_polygon():
    # |T_i - T_{i-1}| = 2 sin(pi/N) = dual / R, so only round-off remains
    for N in (32, 256, 4096):
        R = 1.7
        err = np.abs(np.linalg.norm(circle(R, N).mean_curvature(), axis=1) - 1 / R).max()
        assert err < 1e-9


def test_ellipse_curvature_order():
    Ns = [32, 64, 128, 256, 512, 1024]
    errs = []
    for N in Ns:
        t = 2 * np.pi * np.arange(N) / N
        exact = 3.0 / (9 * np.sin(t) ** 2 + np.cos(t) ** 2) ** 1.5
        errs.append(np.abs(np.linalg.norm(ellipse(3.0, 1.0, N).mean_curvature(), axis=1) - exact).max())
    assert slope(Ns, errs) == pytest.approx(-2.0, abs=0.3)


def test_convex_mesh_curvature_points_inward():
    for axes in [(1, 1, 1), (2, 1, 0.5), (0.6, 1.8, 1.1)]:
        m = ellipsoid(axes, 3)
        H = m.mean_curvature()
        assert np.all(np.einsum("ij,ij->i", H, m.vertex_normals()) < 0)


def test_torus_curvature():
    # |H| = (R + 2 r cos b) / (r (R + r cos b))
    R, r = 2.0, 0.5
    T = torus(R, r, 192, 96)
    b = np.arctan2(T.vertices[:, 2], np.hypot(T.vertices[:, 0], T.vertices[:, 1]) - R)
    exact = (R + 2 * r * np.cos(b)) / (r * (R + r * np.cos(b)))
    assert np.abs(np.linalg.norm(T.mean_curvature(), axis=1) - exact).max() < 1e-2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 2 * math.pi))
def test_rigid_motion_planar(seed, tx, ty, phi):
    c = random_fourier_curve(seed, 3, 128)
    Q = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    moved = ClosedCurve(c.points @ Q.T + [tx, ty])
    H0, H1 = c.mean_curvature(), moved.mean_curvature()
    assert np.abs(H1 - H0 @ Q.T).max() < 1e-10
    assert np.abs(np.linalg.norm(H1, axis=1) - np.linalg.norm(H0, axis=1)).max() < 1e-12 * 100


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_rigid_motion_space(seed):
    rng = np.random.default_rng(seed)
    t = 2 * math.pi * np.arange(200) / 200
    pts = np.column_stack([np.cos(t), np.sin(t), 0.3 * np.sin(3 * t)])
    Q = Rotation.random(random_state=seed).as_matrix()
    moved = ClosedCurve(pts @ Q.T + rng.normal(size=3))
    H0, H1 = ClosedCurve(pts).mean_curvature(), moved.mean_curvature()
    assert np.abs(np.linalg.norm(H1, axis=1) - np.linalg.norm(H0, axis=1)).max() < 1e-10
    assert np.abs(H1 - H0 @ Q.T).max() < 1e-10


# --- gradient ----------------------------------------------------------------------


def test_constant_field_gradient_vanishes():
    for s in (circle(1.0, 32), icosphere(1.0, 2), torus()):
        assert np.abs(tangential_gradient(s, np.full(s.n_vertices, 3.0))).max() < 1e-12


def test_circle_gradient():
    N = 256
    c = circle(1.0, N)
    t = 2 * math.pi * np.arange(N) / N
    g = np.linalg.norm(tangential_gradient(c, 2 + np.cos(t)), axis=1)
    mid = t + math.pi / N
    # the chord slope is exactly sin at the midpoint on a regular polygon
    assert g == pytest.approx(np.abs(np.sin(mid)), abs=(2 * math.pi / N) ** 2)


def test_sphere_gradient():
    s = icosphere(1.0, 4)
    g = tangential_gradient(s, 2 + s.vertices[:, 2])
    cen = s.vertices[s.faces].mean(axis=1)
    z = cen[:, 2] / np.linalg.norm(cen, axis=1)
    assert np.abs(np.einsum("ij,ij->i", g, g) - (1 - z**2)).max() < 3e-2
    # gradient lies in the face plane
    assert np.abs(np.einsum("ij,ij->i", g, s.face_normals())).max() < 1e-12


def test_edge_mean_geometric_and_underflow_safe():
    c = circle(1.0, 16)
    f = np.exp(-np.arange(16.0) * 40)
    fe = edge_mean(c, f)
    # the naive product f_i f_{i+1} underflows from i = 9 on
    assert np.all(fe > 0)
    assert fe[9] == pytest.approx(math.exp(-380), rel=1e-10)
    s = icosphere(1.0, 1)
    assert edge_mean(s, np.full(s.n_vertices, 2.5)) == pytest.approx(np.full(len(s.faces), 2.5))


# --- integration and measures ------------------------------------------------------


def test_integrate_examples():
    R = 1.3
    c = circle(R, 1024)
    assert integrate(c, np.ones(1024)) == pytest.approx(2 * math.pi * R, rel=1e-5)
    assert integrate(icosphere(2.0, 3), np.ones(642)) == pytest.approx(16 * math.pi, rel=5e-3)
    c1 = circle(1.0, 256)
    H2 = np.sum(c1.mean_curvature() ** 2, axis=1)
    assert integrate(c1, H2) == pytest.approx(2 * math.pi, rel=1e-3)


def test_integrate_stratum_mismatch():
    c = circle(1.0, 32)
    with pytest.raises(UsageError):
        integrate(c, np.ones(31))
    with pytest.raises(UsageError):
        integrate(c, np.ones(32), stratum="face")
    assert integrate(c, np.ones(32), "element") == pytest.approx(c.edge_lengths.sum())


@pytest.mark.parametrize("shape", [circle(1.0, 64), icosphere(1.5, 3), torus(), uv_sphere(1.0, 20, 30, focus=1.0)])
def test_dual_measure_partition_of_total(shape):
    d = shape.dual_measure()
    assert np.all(d > 0)
    assert d.sum() == pytest.approx(shape.element_measure().sum(), rel=1e-12)


def test_component_partition():
    t = two_circles(1.0, 5.0, 128)
    f = random_positive_field(t, 3)
    whole = integrate(t, f)
    parts = [integrate(t, f * (t.labels == c)) for c in range(t.n_components)]
    assert math.fsum(parts) == pytest.approx(whole, rel=1e-15)
    comps = t.component_curves()
    assert len(comps) == 2
    assert math.fsum(integrate(cc, cc.f) for _, cc in comps) == pytest.approx(t.edge_lengths.sum(), rel=1e-14)


def test_measures_bundle():
    c = circle(1.0, 32)
    m = measures(c)
    assert m.dual.shape == (32,) and m.mean_curvature.shape == (32, 2) and m.gradient.shape == (32, 2)


def test_checksum_stable():
    a, b = random_fourier_curve(5), random_fourier_curve(5)
    assert a.checksum() == b.checksum()
    assert a.checksum() != random_fourier_curve(6).checksum()


def test_random_field_positive_and_seeded():
    for s in (circle(1.0, 64), icosphere(1.0, 2), two_circles()):
        f = random_positive_field(s, 4)
        assert np.all(f > 0)
        assert np.array_equal(f, random_positive_field(s, 4))
