import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from lsiaudit.ambient import (
    Cone,
    Cylinder,
    Euclidean,
    Paraboloid,
    avr_estimate,
    ball_volume,
    distance,
    parse_model,
    unit_ball_volume,
)
from lsiaudit.errors import ConsistencyError, DomainError, UnsupportedOperation

coord = st.floats(-20, 20, allow_nan=False)
radial = st.floats(0, 20, allow_nan=False)
angle = st.floats(0, 2 * math.pi, allow_nan=False)


def _embedded_path_length(model, p, q, k=48, starts=None):
    """Shortest polyline on the embedded surface, by direct minimisation.

    Interior vertices live in (u, v) coordinates; length is the sum of 3-d
    chords.  Several initial paths are tried (both ways round, and one
    passing near the apex).
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    t = np.linspace(0, 1, k + 2)[1:-1]

    def length(z):
        u = np.concatenate([[p[0]], np.abs(z[:k]), [q[0]]])
        v = np.concatenate([[p[1]], z[k:], [q[1]]])
        X = model.embed(u, v)
        return np.linalg.norm(np.diff(X, axis=0), axis=1).sum()

    best = np.inf
    for dv in starts or [q[1] - p[1], q[1] - p[1] - 2 * math.pi]:
        for dip in (0.0, 0.95):
            u0 = (1 - t) * p[0] + t * q[0]
            u0 = u0 * (1 - dip * np.sin(math.pi * t))
            v0 = p[1] + t * dv
            res = optimize.minimize(length, np.concatenate([u0, v0]), method="L-BFGS-B")
            best = min(best, res.fun)
    return best


# --- distance ----------------------------------------------------------------


def test_euclidean_pythagoras():
    assert distance(Euclidean(2), (0, 0), (3, 4)) == 5.0


def test_paraboloid_distance_to_origin():
    # value of the meridian length closed form at u = 1
    expect = 0.5 * math.sqrt(2) + 0.5 * math.log(1 + math.sqrt(2))
    assert distance(Paraboloid(1.0), (1.0, 0.3), (0.0, 0.0)) == pytest.approx(expect, abs=1e-12)
    assert expect == pytest.approx(1.147793, abs=1e-6)
    # independent oracle: quadrature of the meridian speed sqrt(1 + 4 a^2 u^2 / 4)
    quad = integrate.quad(lambda u: math.sqrt(1 + u * u), 0, 1)[0]
    assert distance(Paraboloid(1.0), (0.0, 0.0), (1.0, 2.0)) == pytest.approx(quad, abs=1e-10)


def test_paraboloid_general_pair_unsupported():
    with pytest.raises(UnsupportedOperation):
        Paraboloid(1.0).distance((1.0, 0.0), (2.0, 1.0))


def test_cone_maximal_separation_against_path_oracle():
    # opposite meridians at u = 1: the unrolled gap is pi*beta/... = pi/2 < pi,
    # so the straight unrolled segment (sqrt 2) beats the apex path (2)
    cone = Cone(0.5)
    p, q = (1.0, 0.0), (1.0, math.pi)
    d = distance(cone, p, q)
    assert d == pytest.approx(math.sqrt(2), abs=1e-12)
    assert _embedded_path_length(cone, p, q) == pytest.approx(d, rel=2e-3)


def test_cone_apex_path_when_sector_is_narrow():
    cone = Cone(0.2)
    p, q = (1.0, 0.0), (2.0, math.pi)
    # unrolled gap 0.2 pi < pi, straight segment
    d = distance(cone, p, q)
    assert d < 3.0
    assert _embedded_path_length(cone, p, q) == pytest.approx(d, rel=2e-3)


@pytest.mark.parametrize("p,q", [((1.0, 0.2), (2.5, 2.0)), ((0.5, 1.0), (0.5, 5.0)), ((2.0, 0.5), (1.0, 6.0))])
def test_cone_distance_against_path_oracle(p, q):
    cone = Cone(0.5)
    assert _embedded_path_length(cone, p, q) == pytest.approx(distance(cone, p, q), rel=2e-3)


def test_cone_apex_distance_is_radius():
    assert distance(Cone(0.5), (0.0, 0.0), (1.5, 3.0)) == 1.5
    assert distance(Cone(0.5), (0.0, 1.0), (0.0, 2.0)) == 0.0


def test_cylinder_distance_formula():
    cyl = Cylinder(2.0)
    # angles 0.1 and 2pi-0.1 are 0.2 apart the short way
    assert distance(cyl, (0.1, 0.0), (2 * math.pi - 0.1, 3.0)) == pytest.approx(math.hypot(0.4, 3.0))


def test_invalid_points_rejected():
    with pytest.raises(DomainError):
        distance(Euclidean(2), (0, 0, 0), (1, 1))
    with pytest.raises(DomainError):
        distance(Cone(0.5), (-1.0, 0.0), (1.0, 0.0))
    with pytest.raises(DomainError):
        distance(Euclidean(2), (np.nan, 0), (1, 1))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(coord, coord), min_size=3, max_size=3))
def test_triangle_inequality_euclidean(pts):
    E = Euclidean(2)
    a, b, c = pts
    assert distance(E, a, c) <= distance(E, a, b) + distance(E, b, c) + 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(angle, coord), min_size=3, max_size=3), st.floats(0.1, 5))
def test_triangle_inequality_cylinder(pts, R):
    C = Cylinder(R)
    a, b, c = pts
    assert distance(C, a, c) <= distance(C, a, b) + distance(C, b, c) + 1e-9


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(radial, angle), min_size=3, max_size=3), st.floats(0.05, 1.0))
def test_triangle_inequality_cone(pts, beta):
    C = Cone(beta)
    a, b, c = pts
    assert distance(C, a, c) <= distance(C, a, b) + distance(C, b, c) + 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(radial, angle), min_size=2, max_size=2))
def test_symmetry_and_zero(pts):
    C = Cone(0.3)
    a, b = pts
    assert distance(C, a, b) == pytest.approx(distance(C, b, a), abs=1e-12)
    assert distance(C, a, a) == pytest.approx(0.0, abs=1e-9)
    assert distance(C, a, b) >= 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(radial, angle), min_size=2, max_size=2))
def test_flat_cone_is_the_plane(pts):
    (u1, v1), (u2, v2) = pts
    p = (u1 * math.cos(v1), u1 * math.sin(v1))
    q = (u2 * math.cos(v2), u2 * math.sin(v2))
    assert distance(Cone(1.0), (u1, v1), (u2, v2)) == pytest.approx(distance(Euclidean(2), p, q), abs=1e-9)


# --- volumes ---------------------------------------------------------------------


def test_unit_ball_volumes():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert unit_ball_volume(4) == pytest.approx(math.pi**2 / 2)


def test_ball_volume_examples():
    assert ball_volume(Euclidean(2), 1.0) == pytest.approx(math.pi)
    # cone: integrate the embedded area element |X_u x X_v| over u < 2
    cone = Cone(0.5)

    def element(v, u):
        Xu, Xv = cone.embed_jacobian(u, v)
        return np.linalg.norm(np.cross(Xu, Xv))

    oracle = integrate.dblquad(element, 0, 2, 0, 2 * math.pi)[0]
    assert ball_volume(cone, 2.0) == pytest.approx(oracle, rel=1e-8)
    assert oracle == pytest.approx(2 * math.pi, rel=1e-8)
    P = Paraboloid(1.0)
    s = P.arc_length(1.0)
    oracle = 2 * math.pi * integrate.quad(lambda u: u * math.sqrt(1 + u * u), 0, 1)[0]
    assert ball_volume(P, s) == pytest.approx(oracle, rel=1e-9)
    assert oracle == pytest.approx(2 * math.pi * (2**1.5 - 1) / 3, rel=1e-12)


def test_ball_volume_rejects_negative():
    with pytest.raises(DomainError):
        ball_volume(Euclidean(2), -1.0)


@pytest.mark.parametrize("model", [Euclidean(2), Euclidean(3), Cylinder(1.0), Cone(0.5), Paraboloid(1.0)])
def test_volume_growth_monotone(model):
    s = np.geomspace(1e-2, 1e3, 60)
    v = ball_volume(model, s)
    assert np.all(np.diff(v) > 0)
    ratio = v / (unit_ball_volume(model.dim) * s**model.dim)
    assert np.all(np.diff(ratio) <= 1e-12)


def test_avr_examples():
    s = np.geomspace(1, 1e3, 10)
    assert np.allclose(avr_estimate(Euclidean(2), s).ratios, 1.0)
    assert avr_estimate(Cone(0.5), s).estimate == pytest.approx(0.5, abs=1e-12)
    big = np.geomspace(1, 1e6, 13)
    r = avr_estimate(Paraboloid(1.0), big).ratios
    # decays like s^{-1/2}: ball area ~ (2 pi / 3) (2 s)^{3/2}
    predicted = (2 * math.pi / 3) * (2 * big[-1]) ** 1.5 / (math.pi * big[-1] ** 2)
    assert r[-1] == pytest.approx(predicted, rel=1e-2)
    assert r[-1] / r[-3] == pytest.approx(10**-0.5, rel=1e-2)


def test_avr_flags_increase():
    class Bad(Euclidean):
        def ball_volume(self, s):
            return math.pi * np.asarray(s) ** 2.5

    with pytest.raises(ConsistencyError):
        avr_estimate(Bad(2), [1.0, 2.0, 3.0])


# --- paraboloid meridian ---------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 1e3), st.floats(0.2, 5.0))
def test_arc_length_inverse_roundtrip(u, a):
    P = Paraboloid(a)
    s = P.arc_length(u)
    assert s >= u
    assert P.inverse_arc_length(s) == pytest.approx(u, abs=1e-12 * max(1.0, u) + 1e-12)


def test_arc_length_superlinear():
    P = Paraboloid(1.0)
    u = np.geomspace(1e-3, 1e4, 50)
    A = P.arc_length(u)
    assert np.all(np.diff(A) > 0)
    assert np.all(np.diff(A / u) > 0)
    assert A[-1] / u[-1] > 1e3
    # near the origin the meridian is unit speed
    assert P.arc_length(1e-4) / 1e-4 == pytest.approx(1.0, abs=1e-8)


def test_parse_model():
    assert parse_model("euclidean:3") == Euclidean(3)
    assert parse_model("cone:beta=0.25") == Cone(0.25)
    assert parse_model("cylinder:radius=2") == Cylinder(2.0)
    assert parse_model("paraboloid:a=1") == Paraboloid(1.0)
    for bad in ("sphere", "cone:gamma=1", "cone:beta=2"):
        with pytest.raises(DomainError):
            parse_model(bad)
