import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lsiaudit import abp
from lsiaudit.errors import DomainError
from lsiaudit.functional import compatibility
from lsiaudit.submanifold import ClosedCurve, circle, ellipse, random_fourier_curve, random_positive_field


def brute_slack(setup, vertex, y):
    """min_x [r u(x) + |x - Phi|^2 / 2] - [r u(xbar) + r^2 (u'^2 + y^2) / 2]."""
    X, r = setup.curve.points, setup.r
    phi = abp.transport_map(setup, vertex, y)
    best = np.min(r * setup.u + 0.5 * np.sum((X - phi) ** 2, axis=1))
    return best - (r * setup.u[vertex] + 0.5 * r * r * (setup.du[vertex] ** 2 + y * y))


def manual_set(vertex, y):
    vertex, y = np.atleast_1d(vertex), np.atleast_1d(np.asarray(y, float))
    return abp.ContactSet(vertex, y, np.zeros(y.size), np.zeros((y.size, 2)), np.zeros(y.size), 0.0, y.size)


@pytest.fixture(scope="module")
def unit_circle():
    return abp.solve_potential(circle(1.0, 256), r=1.0)


# --- potential ------------------------------------------------------------------


def test_circle_potential_vanishes(unit_circle):
    s = unit_circle
    assert s.lam == pytest.approx(math.e, rel=1e-12)
    # round-off only
    assert np.abs(s.rhs).max() < 1e-10
    assert np.abs(s.u).max() < 1e-10
    assert s.kappa == pytest.approx(np.ones(256), abs=1e-10)


def test_ellipse_solver_self_check():
    c = ellipse(2.0, 1.0, 256)
    s = abp.solve_potential(c)
    assert s.residual < 1e-8
    assert abs(compatibility(c, s.f)) < 1e-10 * s.mass
    assert abs(s.projection) < 1e-10


@pytest.mark.parametrize("seed", [7, 11])
def test_random_solver_self_check(seed):
    c = random_fourier_curve(seed, 3, 512)
    s = abp.solve_potential(c, random_positive_field(c, seed))
    assert s.residual < 1e-8 * s.residual_scale
    assert abs(np.dot(c.dual_measure(), s.u)) < 1e-10 * np.abs(s.u).max() * s.mass


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(16, 80))
def test_solve_flux_against_dense(seed, n):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 2 * math.pi, n))
    c = ClosedCurve(np.column_stack([np.cos(t), 0.5 * np.sin(t)]) * rng.uniform(0.5, 3))
    F = rng.uniform(0.1, 10, n)
    rhs = rng.normal(size=n)
    u, proj, resid = abp.solve_flux(c, F, rhs)
    # dense oracle: assemble the operator and take the least-squares solution
    w = F / c.edge_lengths
    d = c.dual_measure()
    A = np.zeros((n, n))
    for i in range(n):
        j, k = (i + 1) % n, (i - 1) % n
        A[i, j] += w[i] / d[i]
        A[i, i] -= (w[i] + w[k]) / d[i]
        A[i, k] += w[k] / d[i]
    b = rhs - np.dot(d, rhs) / d.sum()
    v = np.linalg.lstsq(A, b, rcond=None)[0]
    v -= np.dot(d, v) / d.sum()
    assert np.abs(u - v).max() < 1e-8 * max(1.0, np.abs(v).max())
    assert proj == pytest.approx(np.dot(d, rhs) / d.sum())
    assert resid < 1e-9 * max(1.0, np.abs(b).max())


def test_solver_rejects_bad_input():
    c = circle(1.0, 32)
    with pytest.raises(DomainError):
        abp.solve_flux(c, np.r_[np.ones(31), 0.0], np.zeros(32))
    with pytest.raises(DomainError):
        abp.solve_potential(c, r=0.0)
    with pytest.raises(DomainError):
        abp.solve_potential(c, f=-np.ones(32))


def test_clockwise_input_is_handled():
    c = ellipse(2.0, 1.0, 1024)
    cw = ClosedCurve(c.points[::-1].copy())
    f = random_positive_field(c, 2)
    a = abp.run_audit(abp.solve_potential(cw, f[::-1].copy()), n_targets=200, chain=False)
    assert a.passed, a.checks


# --- contact set -----------------------------------------------------------------


def test_circle_contact_set_is_half_line(unit_circle):
    # u = 0 and nu points inward: Phi = (1 - y) xbar, which has xbar as
    # nearest point exactly when y <= 1
    s = unit_circle
    ys = np.linspace(-3, 3, 97)
    cs = abp.contact_set(s, ys)
    member = np.zeros((256, ys.size), bool)
    member[cs.vertex, np.searchsorted(ys, cs.y)] = True
    away = np.abs(ys - 1.0) > 1e-9
    assert np.all(member[:, away] == (ys[away] < 1.0))
    # brute-force oracle on a few records
    for i in (0, 17, 200):
        for k in (0, 40, 60, 96):
            assert (brute_slack(s, i, ys[k]) >= -s.tol_contact) == member[i, k]


def test_envelope_matches_brute_force():
    c = random_fourier_curve(7, 3, 256)
    s = abp.solve_potential(c, random_positive_field(c, 1), r=1.0)
    ys = abp.y_grid_for(s)
    args = (c.points, s.u, s.du, s.T, s.nu, 1.0, ys)
    A = abp._slack_table(*args)
    B = abp._slack_table_brute(*args)
    assert np.abs(A - B).max() < 1e-12
    assert np.array_equal(A >= -s.tol_contact, B >= -s.tol_contact)


def test_contact_records_against_direct_slack():
    c = ellipse(2.0, 1.0, 256)
    s = abp.solve_potential(c, random_positive_field(c, 4), r=2.0)
    cs = abp.contact_set(s)
    assert len(cs) > 0
    rng = np.random.default_rng(0)
    for k in rng.choice(len(cs), 25, replace=False):
        assert cs.slack[k] == pytest.approx(brute_slack(s, cs.vertex[k], cs.y[k]), abs=1e-10)
    assert np.max(cs.lemma31_gap) < 1e-12
    assert np.min(abp.psd_audit(s, cs)) >= -1e-6


def test_y_grid():
    s = abp.solve_potential(circle(1.0, 64))
    ys = abp.y_grid_for(s)
    assert ys[-1] >= 2 + 8 and ys[0] == -ys[-1]
    assert np.diff(ys) == pytest.approx(np.full(ys.size - 1, 1 / 64))


# --- pointwise lemmas --------------------------------------------------------------


def test_psd_examples(unit_circle):
    s = unit_circle.with_r(0.5)
    assert abp.psd_audit(s, manual_set([0, 5], [-1.0, 1.0])) == pytest.approx([1.5, 0.5], abs=1e-12)
    tiny = unit_circle.with_r(1e-9)
    assert abp.psd_audit(tiny, manual_set(np.arange(10), np.linspace(-5, 5, 10))) == pytest.approx(np.ones(10), abs=1e-7)


def test_jacobian_examples():
    s = abp.solve_potential(circle(1.0, 1024), r=1.0)
    jac = abp.jacobian_audit(s, manual_set([0, 300], [-0.5, -0.5]))
    assert jac.closed_form == pytest.approx([1.5, 1.5], abs=1e-10)
    assert jac.finite_difference == pytest.approx([1.5, 1.5], rel=1e-3)
    for r in (0.3, 2.0):
        jac = abp.jacobian_audit(s.with_r(r), manual_set([3], [0.0]))
        # u is zero up to round-off, amplified by 1/h^2 in u''
        assert jac.closed_form[0] == pytest.approx(r, abs=1e-9)


def test_jacobian_mismatch_shrinks():
    out = []
    for N in (256, 512, 1024):
        c = random_fourier_curve(7, 3, N)
        s = abp.solve_potential(c, random_positive_field(c, 1))
        out.append(np.max(abp.jacobian_audit(s, abp.contact_set(s)).rel_mismatch))
    assert out[2] < 1e-3
    assert out[2] < out[0]


def test_lemma37_circle_closed_form():
    R, r = math.sqrt(2), 10.0
    s = abp.solve_potential(circle(R, 512), r=r)
    pw = abp.pointwise_bound_audit(s, manual_set([0], [0.0]))
    # f = e^{1/2} after normalization, kappa = 1/R, psd = 1
    assert s.f[0] == pytest.approx(math.exp(0.5), rel=1e-12)
    assert pw.lhs[0] == pytest.approx(r, rel=1e-9)
    assert pw.rhs[0] == pytest.approx(r * r * math.exp(-0.9), rel=1e-9)
    assert pw.margin[0] > 0


def test_lemma37_zero_determinant(unit_circle):
    pw = abp.pointwise_bound_audit(unit_circle, manual_set([0], [0.3]), det=np.zeros(1))
    assert pw.lhs[0] == 0 and pw.margin[0] > 0


def test_derivation_chain_keys(unit_circle):
    d = abp.derivation_chain(unit_circle, 0, 0.5)
    assert d["lambda"] == pytest.approx(1.0 - 0.5, abs=1e-12)
    assert {"log_f", "bound_log", "exp_lambda_minus_1"} <= set(d)


# --- coverage -----------------------------------------------------------------------


def test_coverage_outside_point():
    s = abp.solve_potential(circle(1.0, 512), r=1.0)
    cov = abp.coverage_audit(s, [[3.0, 0.0]])
    assert cov.xbar[0] == pytest.approx([1.0, 0.0], abs=1e-12)
    assert cov.y[0] == pytest.approx(-2.0, abs=1e-12)
    assert cov.reconstruction_error[0] < 1e-12
    assert cov.passed[0]


def test_coverage_point_on_curve():
    s = abp.solve_potential(ellipse(2.0, 1.0, 512), random_positive_field(ellipse(2.0, 1.0, 512), 0))
    p = s.curve.points[[10, 200]] + 0.0
    cov = abp.coverage_audit(s, p)
    assert np.all(cov.reconstruction_error < 2 * s.h)
    assert np.all(cov.passed)


def test_random_targets_in_disk():
    P = abp.random_targets(500, 3.0, seed=1, center=(1.0, 2.0))
    assert np.all(np.linalg.norm(P - [1.0, 2.0], axis=1) <= 3.0)
    assert np.array_equal(P, abp.random_targets(500, 3.0, seed=1, center=(1.0, 2.0)))


# --- integral chain ------------------------------------------------------------------


def test_chain_circle_r10():
    R, r = math.sqrt(2), 10.0
    s = abp.solve_potential(circle(R, 512), r=r)
    ch = abp.integral_chain_audit(s)
    mass = 2 * math.pi * R * math.exp(0.5)
    assert s.mass == pytest.approx(mass, rel=1e-4)
    assert ch.rhs == pytest.approx(r * r * math.exp(0.1 - 1) * math.sqrt(4 * math.pi) * s.mass, rel=1e-14)
    assert ch.lhs <= ch.rhs
    assert ch.tail_bound <= 1e-3 * ch.lhs


def _circle_chain_exact(R, r):
    # u = 0: the nearest point of the circle is radial, |x(p) - p| = |rho - R|
    g = lambda rho: math.exp(-((rho - R) ** 2) / (4 * r * r)) * 2 * math.pi * rho
    val = integrate.quad(g, 0, R)[0] + integrate.quad(g, R, R + 40 * r)[0]
    return val / (4 * math.pi * r * r)


@pytest.mark.parametrize("r", [1.0, 100.0, 1000.0])
def test_chain_large_r_is_euclidean(r):
    R = math.sqrt(2)
    s = abp.solve_potential(circle(R, 512), r=r)
    ch = abp.integral_chain_audit(s)
    exact = _circle_chain_exact(R, r)
    assert ch.rho_lhs == pytest.approx(exact, rel=1e-3)
    # first-order excess over the flat value is R sqrt(pi) / 2r
    if r >= 100:
        assert exact - 1 == pytest.approx(R * math.sqrt(math.pi) / (2 * r), rel=2e-2)
    if r >= 1000:
        assert ch.rho_lhs == pytest.approx(1.0, abs=1e-2)


def test_chain_small_r_ellipse():
    c = ellipse(2.0, 1.0, 512)
    s = abp.solve_potential(c, random_positive_field(c, 5), r=0.5)
    ch = abp.integral_chain_audit(s)
    assert ch.lhs <= ch.rhs * 1.01


def test_chain_tail_bound_dominates():
    # numeric check of the tail bound on the disk complement for the point curve
    W, rho_max, r = 5.0, 1.0, 1.0
    rr = np.linspace(W, W + 40, 200_001)
    exact = 2 * math.pi * integrate.trapezoid(rr * np.exp(-((rr - rho_max) ** 2) / (4 * r * r)), rr)
    assert abp._chain_tail(W, rho_max, r) == pytest.approx(exact, rel=1e-6)


# --- whole audit ------------------------------------------------------------------------


def test_run_audit_ellipse():
    c = ellipse(2.0, 1.0, 1024)
    a = abp.run_audit(abp.solve_potential(c, random_positive_field(c, 3)), n_targets=300)
    assert a.passed, a.checks
    assert a.failures == []
    d = a.to_dict(include_margins=True)
    assert d["passed"] and len(d["margins"]["y"]) == a.n_records


def test_run_audit_deterministic():
    c = random_fourier_curve(11, 3, 512)
    s = abp.solve_potential(c, random_positive_field(c, 2))
    a = abp.run_audit(s, n_targets=100, chain=False).to_dict()
    b = abp.run_audit(s, n_targets=100, chain=False).to_dict()
    assert a == b
