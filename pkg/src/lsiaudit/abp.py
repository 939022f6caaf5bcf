"""Transport (ABP) audit for closed planar curves in flat space.

Given a normalized positive field ``f`` on a closed curve we solve

    (f u')' = f log f - f'^2 / f - f kappa^2

for a potential ``u``, form the map ``Phi(x, y) = x + r u'(x) T + r y nu`` on
the normal bundle and check, record by record on a discrete contact set,
the pointwise facts that make the integral chain work.  Everything is flat:
``exp`` is affine and distances are norms.

Conventions: ``T`` is the vertex tangent (bisector of the incident edge
tangents), ``nu`` its left normal, ``kappa = <H, nu>`` and a normal vector
``y nu`` is stored by its coefficient ``y``.  For a counter-clockwise convex
curve ``nu`` points inward and ``kappa > 0``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from numba import njit, prange
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.special import erfc

from .errors import DomainError, NumericalError, UsageError
from .functional import compatibility, normalization_lambda
from .submanifold import ClosedCurve, _positive_field, integrate

log = logging.getLogger(__name__)

# numba falls back to another threading layer when the system TBB is old
warnings.filterwarnings("ignore", message="The TBB threading layer requires", module="numba")

__all__ = [
    "TransportSetup",
    "ContactRecord",
    "ContactSet",
    "TransportAudit",
    "solve_flux",
    "solve_potential",
    "contact_set",
    "psd_audit",
    "jacobian_audit",
    "pointwise_bound_audit",
    "coverage_audit",
    "integral_chain_audit",
    "run_audit",
    "y_grid_for",
]

LEMMA31_TOL = 1e-12
PSD_TOL = 1e-6
JAC_REL_TOL = 1e-3
MARGIN_REL_TOL = 1e-6
RESIDUAL_TOL = 1e-8
PROJECTION_TOL = 1e-10
CHAIN_SLACK = 1e-2
Y_STEP = 1.0 / 64


def _left_normal(T):
    return np.column_stack([-T[:, 1], T[:, 0]])


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


# --- potential -------------------------------------------------------------


def _cyclic_curve(curve: ClosedCurve):
    if not isinstance(curve, ClosedCurve) or curve.ambient_dim != 2:
        raise UsageError("the transport audit needs a planar ClosedCurve")
    if curve.n_components != 1:
        raise UsageError("solve one component at a time; split disconnected curves first")
    n = curve.n_vertices
    if not np.array_equal(curve.next, (np.arange(n) + 1) % n):
        # reorder along the cycle so that next[i] == i + 1
        order, c = curve.component_curves()[0]
        return c, order
    return curve, np.arange(n)


def _flux_operator(w, dual, u):
    """``(w_i (u_{i+1} - u_i) - w_{i-1} (u_i - u_{i-1})) / dual_i``."""
    flux = w * (np.roll(u, -1) - u)
    return (flux - np.roll(flux, 1)) / dual


def solve_flux(curve: ClosedCurve, F_edge, rhs, dual=None):
    """Solve the cyclic flux system ``div(F grad u) = rhs`` at vertices.

    Edge ``i`` carries ``F_edge[i]``.  The system is singular (constants);
    the right side is projected to dual-weighted mean zero, vertex 0 is
    pinned so the remaining system is tridiagonal, and the result is shifted
    to dual-weighted mean zero.  Returns ``(u, projection, residual)`` where
    ``projection`` is the removed mean and ``residual`` the max-norm of the
    operator defect.
    """
    ell = curve.edge_lengths
    dual = curve.dual_measure() if dual is None else dual
    F_edge = np.asarray(F_edge, float)
    if np.any(~np.isfinite(F_edge)) or np.any(F_edge <= 0):
        raise DomainError("edge coefficients must be positive (f > 0)")
    rhs = np.asarray(rhs, float)
    projection = float(np.dot(dual, rhs) / dual.sum())
    b = (rhs - projection) * dual
    w = F_edge / ell
    n = w.size
    # unknowns u_1..u_{n-1}; row i couples i-1, i, i+1 with u_0 = u_n = 0
    ab = np.zeros((3, n - 1))
    ab[0, 1:] = w[1 : n - 1]
    ab[1, :] = -(w[1:] + w[: n - 1])
    ab[2, :-1] = w[1 : n - 1]
    sol = solve_banded((1, 1), ab, b[1:])
    u = np.concatenate([[0.0], sol])
    u -= np.dot(dual, u) / dual.sum()
    resid = float(np.max(np.abs(_flux_operator(w, dual, u) - (rhs - projection))))
    return u, projection, resid


@dataclass
class TransportSetup:
    curve: ClosedCurve
    f: np.ndarray  # normalized field
    lam: float
    u: np.ndarray
    r: float
    du: np.ndarray
    d2u: np.ndarray
    kappa: np.ndarray
    T: np.ndarray
    nu: np.ndarray
    rhs: np.ndarray
    residual: float
    residual_scale: float
    projection: float
    compatibility: float
    mass: float
    order: np.ndarray  # vertex order relative to the input curve
    contact_tol: Optional[float] = None  # overrides the default below

    @property
    def h(self):
        return float(self.curve.edge_lengths.max())

    @property
    def u_scale(self):
        return max(1.0, float(np.max(np.abs(self.u))))

    @property
    def tol_contact(self):
        if self.contact_tol is not None:
            return self.contact_tol
        return 1e-9 * self.r**2 * self.u_scale

    def with_r(self, r, contact_tol=None):
        if not r > 0:
            raise DomainError("r must be positive")
        d = dict(self.__dict__)
        d["r"] = float(r)
        d["contact_tol"] = contact_tol
        return TransportSetup(**d)

    def summary(self):
        return {
            "n_vertices": int(self.curve.n_vertices),
            "r": self.r,
            "lambda": self.lam,
            "mass": self.mass,
            "residual": self.residual,
            "residual_scale": self.residual_scale,
            "projection": self.projection,
            "compatibility": self.compatibility,
            "u_max": float(np.max(np.abs(self.u))),
        }


def _vertex_derivatives(curve, u):
    """Second-order one-sided weights on the nonuniform cycle."""
    ell = curve.edge_lengths
    lp = ell[curve.prev]
    muR = (u[curve.next] - u) / ell
    muL = (u - u[curve.prev]) / lp
    du = (lp * muR + ell * muL) / (lp + ell)
    d2u = (muR - muL) / curve.dual_measure()
    return du, d2u


def solve_potential(curve: ClosedCurve, f=None, r: float = 1.0, normalize: bool = True) -> TransportSetup:
    """Normalize ``f`` and solve for the transport potential."""
    if not r > 0:
        raise DomainError("r must be positive")
    curve, order = _cyclic_curve(curve)
    f = _positive_field(curve.f if f is None else np.asarray(f, float)[order], curve.n_vertices)
    lam = normalization_lambda(curve, f) if normalize else 1.0
    f = lam * f
    comp = compatibility(curve, f)
    ell, dual = curve.edge_lengths, curve.dual_measure()
    H = curve.mean_curvature()
    g = curve.tangential_gradient(f)
    F = curve.edge_field_mean(f)
    dir_edge = np.einsum("ij,ij->i", g, g) / F
    dir_vertex = (ell[curve.prev] * dir_edge[curve.prev] + ell * dir_edge) / (2 * dual)
    rhs = f * np.log(f) - dir_vertex - f * np.einsum("ij,ij->i", H, H)
    u, proj, resid = solve_flux(curve, F, rhs, dual)
    scale = max(1.0, float(np.max(np.abs(rhs))), float(np.max(f)))
    mass = integrate(curve, f)
    if normalize and abs(proj) * dual.sum() > PROJECTION_TOL * mass:
        log.warning("mean-zero projection %.3e exceeds tolerance after normalization", proj)
    if resid > RESIDUAL_TOL * scale:
        raise NumericalError(
            f"flux solve residual {resid:.3e} above {RESIDUAL_TOL:.0e} x scale {scale:.3e}",
            {"residual": resid, "scale": scale},
        )
    T = curve.vertex_tangents()
    nu = _left_normal(T)
    du, d2u = _vertex_derivatives(curve, u)
    return TransportSetup(
        curve=curve,
        f=f,
        lam=lam,
        u=u,
        r=float(r),
        du=du,
        d2u=d2u,
        kappa=np.einsum("ij,ij->i", H, nu),
        T=T,
        nu=nu,
        rhs=rhs,
        residual=resid,
        residual_scale=scale,
        projection=proj,
        compatibility=comp,
        mass=mass,
        order=order,
    )


# --- contact set -----------------------------------------------------------


def y_grid_for(setup: TransportSetup, step: float = Y_STEP, extra: float = 8.0):
    """Symmetric grid on ``[-Y, Y]`` with ``Y = max |2H| + extra``."""
    ymax = 2 * float(np.max(np.abs(setup.kappa))) + extra
    k = int(math.ceil(ymax / step))
    return step * np.arange(-k, k + 1)


@njit(cache=True)
def _envelope_min(m, c, ys, out):
    """Evaluate ``min_j (m_j y + c_j)`` at ascending ``ys`` via the lower hull."""
    order = np.argsort(-m, kind="mergesort")
    hm = np.empty(m.size)
    hc = np.empty(m.size)
    top = 0
    for t in range(order.size):
        mj, cj = m[order[t]], c[order[t]]
        if top > 0 and hm[top - 1] == mj:
            if cj >= hc[top - 1]:
                continue
            top -= 1
        while top >= 2 and (cj - hc[top - 2]) * (hm[top - 2] - hm[top - 1]) <= (hc[top - 1] - hc[top - 2]) * (
            hm[top - 2] - mj
        ):
            top -= 1
        hm[top] = mj
        hc[top] = cj
        top += 1
    k = 0
    for q in range(ys.size):
        y = ys[q]
        while k + 1 < top and hm[k + 1] * y + hc[k + 1] <= hm[k] * y + hc[k]:
            k += 1
        out[q] = hm[k] * y + hc[k]


@njit(parallel=True, cache=True)
def _slack_table(X, u, du, T, nu, r, ys):
    n = X.shape[0]
    out = np.empty((n, ys.shape[0]))
    for i in prange(n):
        a = np.empty(n)
        b = np.empty(n)
        for j in range(n):
            dx = X[j, 0] - X[i, 0]
            dy = X[j, 1] - X[i, 1]
            a[j] = r * (u[j] - u[i]) + 0.5 * (dx * dx + dy * dy) - r * du[i] * (dx * T[i, 0] + dy * T[i, 1])
            b[j] = -r * (dx * nu[i, 0] + dy * nu[i, 1])
        # line j == i is exactly zero
        a[i] = 0.0
        b[i] = 0.0
        _envelope_min(b, a, ys, out[i])
    return out


@njit(parallel=True, cache=True)
def _slack_table_brute(X, u, du, T, nu, r, ys):
    n = X.shape[0]
    out = np.empty((n, ys.shape[0]))
    for i in prange(n):
        for k in range(ys.shape[0]):
            best = 0.0
            for j in range(n):
                dx = X[j, 0] - X[i, 0]
                dy = X[j, 1] - X[i, 1]
                v = r * (u[j] - u[i]) + 0.5 * (dx * dx + dy * dy) - r * du[i] * (dx * T[i, 0] + dy * T[i, 1])
                v -= ys[k] * r * (dx * nu[i, 0] + dy * nu[i, 1])
                if v < best:
                    best = v
            out[i, k] = best
    return out


@dataclass
class ContactRecord:
    vertex: int
    y: float
    slack: float
    phi: tuple


@dataclass
class ContactSet:
    """Members of the discrete contact set, stored column-wise."""

    vertex: np.ndarray
    y: np.ndarray
    slack: np.ndarray
    phi: np.ndarray
    lemma31_gap: np.ndarray
    tol: float
    n_candidates: int

    def __len__(self):
        return int(self.vertex.size)

    def records(self):
        for i in range(len(self)):
            yield ContactRecord(int(self.vertex[i]), float(self.y[i]), float(self.slack[i]), tuple(self.phi[i]))


def transport_map(setup: TransportSetup, vertex, y):
    i = np.asarray(vertex)
    y = np.asarray(y, float)
    r = setup.r
    return setup.curve.points[i] + r * setup.du[i, None] * setup.T[i] + r * y[..., None] * setup.nu[i]


def contact_set(setup: TransportSetup, y_grid=None, tol: Optional[float] = None) -> ContactSet:
    """All grid pairs ``(x, y)`` where ``x`` minimizes the transport cost.

    The slack of a pair is ``min_x [r u(x) + |x - Phi|^2 / 2] - r u(xbar) -
    r^2 (u'^2 + y^2) / 2``; it is a minimum of functions linear in ``y``,
    which is how it is evaluated (no large-norm cancellation).
    """
    ys = y_grid_for(setup) if y_grid is None else np.asarray(y_grid, float)
    tol = setup.tol_contact if tol is None else float(tol)
    c = setup.curve
    table = _slack_table(c.points, setup.u, setup.du, setup.T, setup.nu, setup.r, ys)
    vi, yi = np.nonzero(table >= -tol)
    if vi.size == 0:
        raise NumericalError("contact set is empty on the whole grid", {"grid": [ys[0], ys[-1]]})
    y = ys[yi]
    phi = transport_map(setup, vi, y)
    d2 = np.sum((phi - c.points[vi]) ** 2, axis=1)
    gap = np.abs(d2 - setup.r**2 * (setup.du[vi] ** 2 + y**2))
    return ContactSet(vi, y, table[vi, yi], phi, gap, tol, int(table.size))


# --- pointwise lemmas ------------------------------------------------------


def psd_audit(setup: TransportSetup, cs: ContactSet) -> np.ndarray:
    """``1 + r u'' - r kappa y`` on every record."""
    i = cs.vertex
    return 1.0 + setup.r * setup.d2u[i] - setup.r * setup.kappa[i] * cs.y


@dataclass
class JacobianAudit:
    closed_form: np.ndarray
    finite_difference: np.ndarray
    rel_mismatch: np.ndarray
    scale: np.ndarray


def jacobian_audit(setup: TransportSetup, cs: ContactSet, dy: Optional[float] = None) -> JacobianAudit:
    """Closed-form Jacobian ``r (1 + r u'' - r kappa y)`` against central
    differences of ``Phi`` over the neighbouring vertices and ``y +- dy``."""
    c = setup.curve
    i, y, r = cs.vertex, cs.y, setup.r
    dy = Y_STEP if dy is None else dy
    if dy < 1e-12:
        raise NumericalError("y step underflows", {"dy": dy})
    ell = c.edge_lengths
    lp, lr = ell[c.prev[i]], ell[i]
    P0 = transport_map(setup, i, y)
    Pn = transport_map(setup, c.next[i], y)
    Pp = transport_map(setup, c.prev[i], y)
    ds = (lp / (lr * (lp + lr)))[:, None] * (Pn - P0) + (lr / (lp * (lp + lr)))[:, None] * (P0 - Pp)
    dyv = (transport_map(setup, i, y + dy) - transport_map(setup, i, y - dy)) / (2 * dy)
    fd = _cross(ds, dyv)
    cf = r * (1.0 + r * setup.d2u[i] - r * setup.kappa[i] * y)
    scale = r * (1.0 + r * np.abs(setup.d2u[i]) + r * np.abs(setup.kappa[i] * y))
    return JacobianAudit(cf, fd, np.abs(cf - fd) / scale, scale)


@dataclass
class PointwiseAudit:
    lhs: np.ndarray
    rhs: np.ndarray
    margin: np.ndarray


def pointwise_bound_audit(setup: TransportSetup, cs: ContactSet, det=None) -> PointwiseAudit:
    """``exp(-d^2 / 4r^2) |det DPhi| <= r^2 f e^(1/r - 1) exp(-(2 kappa + y)^2 / 4)``."""
    i, y, r = cs.vertex, cs.y, setup.r
    if det is None:
        det = r * psd_audit(setup, cs)
    lhs = np.exp(-(setup.du[i] ** 2 + y**2) / 4.0) * np.abs(det)
    rhs = r**2 * setup.f[i] * math.exp(1.0 / r - 1.0) * np.exp(-((2 * setup.kappa[i] + y) ** 2) / 4.0)
    return PointwiseAudit(lhs, rhs, rhs - lhs)


def derivation_chain(setup: TransportSetup, vertex: int, y: float) -> dict:
    """The intermediate quantities of the pointwise bound at one record."""
    i, r = vertex, setup.r
    f, du, d2u, k = setup.f[i], setup.du[i], setup.d2u[i], setup.kappa[i]
    lam = 1.0 / r + d2u - k * y
    return {
        "vertex": int(i),
        "y": float(y),
        "log_f": math.log(f),
        "laplacian_minus_Hy": d2u - k * y,
        "bound_log": math.log(f) + (du**2 + y**2) / 4 - (2 * k + y) ** 2 / 4,
        "lambda": lam,
        "exp_lambda_minus_1": math.exp(lam - 1),
        "pde_residual": float(setup.rhs[i]),
    }


# --- coverage and the integral chain ---------------------------------------


class _Spline:
    """Periodic cubic interpolation of positions and ``u`` in chord length."""

    def __init__(self, setup: TransportSetup):
        c = setup.curve
        s = np.concatenate([[0.0], np.cumsum(c.edge_lengths)])
        self.L = s[-1]
        self.s = s[:-1]
        X = np.vstack([c.points, c.points[:1]])
        U = np.concatenate([setup.u, setup.u[:1]])
        self.X = CubicSpline(s, X, bc_type="periodic")
        self.U = CubicSpline(s, U, bc_type="periodic")

    def refine(self, i0, P, r, iters=30):
        """Newton on ``g'(s) = 0`` near vertex ``i0`` with bracketing."""
        s0 = self.s[i0]
        h = np.maximum(np.diff(np.concatenate([self.s, [self.L]]))[i0], 1e-300)
        lo, hi = s0 - 1.5 * h, s0 + 1.5 * h
        s = s0.copy()

        def gfun(s):
            return r * self.U(s % self.L) + 0.5 * np.sum((self.X(s % self.L) - P) ** 2, axis=1)

        g0 = gfun(s)
        for _ in range(iters):
            sm = s % self.L
            X, X1, X2 = self.X(sm), self.X(sm, 1), self.X(sm, 2)
            d = X - P
            g1 = r * self.U(sm, 1) + np.sum(d * X1, axis=1)
            g2 = r * self.U(sm, 2) + np.sum(X1 * X1, axis=1) + np.sum(d * X2, axis=1)
            step = np.where(g2 > 0, -g1 / np.where(g2 > 0, g2, 1.0), -np.sign(g1) * 0.25 * h)
            s_new = np.clip(s + step, lo, hi)
            if np.max(np.abs(s_new - s)) < 1e-15 * max(self.L, 1.0):
                s = s_new
                break
            s = s_new
        g = gfun(s)
        # never accept a worse point than the vertex minimizer
        s = np.where(g <= g0, s, s0)
        return s % self.L

    def frame(self, s, r):
        X, X1 = self.X(s), self.X(s, 1)
        speed = np.linalg.norm(X1, axis=1)
        T = X1 / speed[:, None]
        return X, T, _left_normal(T), self.U(s), self.U(s, 1) / speed


def _argmin_vertices(setup, P, chunk=8192):
    """Lowest-index minimizer of ``r u(x) + |x - p|^2 / 2`` over vertices."""
    X = setup.curve.points
    c = setup.r * setup.u + 0.5 * np.sum(X * X, axis=1)
    out = np.empty(P.shape[0], dtype=int)
    for a in range(0, P.shape[0], chunk):
        G = c[None, :] - P[a : a + chunk] @ X.T
        out[a : a + chunk] = np.argmin(G, axis=1)
    return out


def _slack_at(setup, P, Xb, ub, chunk=4096):
    """``min_j g_j(p) - g(xbar)`` written relative to ``xbar``."""
    X, r = setup.curve.points, setup.r
    out = np.empty(P.shape[0])
    for a in range(0, P.shape[0], chunk):
        xb, pb = Xb[a : a + chunk], P[a : a + chunk]
        D = X[None, :, :] - xb[:, None, :]
        val = r * (setup.u[None, :] - ub[a : a + chunk, None]) + 0.5 * np.sum(D * D, axis=2)
        val -= np.einsum("ijk,ik->ij", D, pb - xb)
        out[a : a + chunk] = val.min(axis=1)
    return out


def _preimages(setup, P):
    r = setup.r
    i0 = _argmin_vertices(setup, P)
    sp = _Spline(setup)
    s = sp.refine(i0, P, r)
    Xb, T, nu, ub, dub = sp.frame(s, r)
    w = (P - Xb) / r - dub[:, None] * T
    return i0, Xb, T, nu, ub, dub, w


@dataclass
class CoverageResult:
    targets: np.ndarray
    argmin_vertex: np.ndarray
    xbar: np.ndarray
    y: np.ndarray
    tangential: np.ndarray
    reconstruction_error: np.ndarray
    vertex_reconstruction_error: np.ndarray
    slack: np.ndarray
    member: np.ndarray
    passed: np.ndarray
    h: float
    tol: float

    @property
    def pass_rate(self):
        return float(np.mean(self.passed))


def default_disk_radius(setup: TransportSetup, y_grid=None) -> float:
    ys = y_grid_for(setup) if y_grid is None else np.asarray(y_grid)
    X = setup.curve.points
    diam = float(np.max(np.linalg.norm(X[:, None] - X[None], axis=2)))
    return diam + 5 * setup.r * (float(np.max(np.abs(setup.du))) + float(np.max(np.abs(ys))))


def random_targets(n, radius, seed=0, center=(0.0, 0.0)):
    rng = np.random.default_rng(seed)
    rad = radius * np.sqrt(rng.uniform(size=n))
    ang = rng.uniform(0, 2 * math.pi, size=n)
    return np.column_stack([center[0] + rad * np.cos(ang), center[1] + rad * np.sin(ang)])


def coverage_audit(setup: TransportSetup, targets) -> CoverageResult:
    """Every target must be ``Phi`` of a contact pair.

    The base point is the vertex minimizer of ``r u(x) + |x - p|^2 / 2``,
    refined to the stationary point of the cubic interpolant between its
    neighbours; the vertex-only reconstruction error is kept as a diagnostic.
    """
    P = np.atleast_2d(np.asarray(targets, float))
    r, h = setup.r, setup.h
    i0, Xb, T, nu, ub, dub, w = _preimages(setup, P)
    y = np.sum(w * nu, axis=1)
    tang = np.sum(w * T, axis=1)
    phi = Xb + r * dub[:, None] * T + r * y[:, None] * nu
    err = np.linalg.norm(phi - P, axis=1)
    # the unrefined construction, for reference
    Xv = setup.curve.points[i0]
    wv = (P - Xv) / r - setup.du[i0, None] * setup.T[i0]
    yv = np.sum(wv * setup.nu[i0], axis=1)
    phiv = transport_map(setup, i0, yv)
    verr = np.linalg.norm(phiv - P, axis=1)
    slack = _slack_at(setup, P, Xb, ub)
    tol = setup.tol_contact
    member = slack >= -tol
    passed = (np.abs(tang) < 2 * h / r) & member & (err < 2 * h)
    return CoverageResult(P, i0, Xb, y, tang, err, verr, slack, member, passed, h, tol)


@dataclass
class ChainResult:
    lhs: float
    rhs: float
    ratio: float
    tail_bound: float
    truncation_radius: float
    cell: float
    rho_lhs: float
    euclidean_lhs: float
    euclidean_rhs: float

    def to_dict(self):
        return dict(self.__dict__)


def _chain_tail(W, rho_max, r):
    a = max(W - rho_max, 0.0)
    return 2 * math.pi * (2 * r * r * math.exp(-(a * a) / (4 * r * r)) + rho_max * r * math.sqrt(math.pi) * erfc(a / (2 * r)))


def integral_chain_audit(
    setup: TransportSetup, truncation_radius: Optional[float] = None, cells_per_r: int = 8, max_points: int = 400_000
) -> ChainResult:
    """``int exp(-|x(p) - p|^2 / 4r^2) dp <= r^2 e^(1/r - 1) sqrt(4 pi) int f``.

    The left side is a midpoint rule on the square ``[-W, W]^2`` around the
    centroid (which contains the disk of radius ``W``), plus a tail bound for
    ``|p| > W`` using ``|x(p) - p| >= |p| - max|x|``.
    """
    r = setup.r
    X = setup.curve.points
    ctr = X.mean(axis=0)
    rho_max = float(np.max(np.linalg.norm(X - ctr, axis=1)))
    W = rho_max + 18.0 * r if truncation_radius is None else float(truncation_radius)
    rhs = r * r * math.exp(1.0 / r - 1.0) * math.sqrt(4 * math.pi) * setup.mass
    for _ in range(8):
        n = int(math.ceil(2 * W / (r / cells_per_r)))
        n = min(n, int(math.sqrt(max_points)))
        cell = 2 * W / n
        g = -W + cell * (np.arange(n) + 0.5)
        P = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2) + ctr
        _, Xb, *_ = _preimages(setup, P)
        d2 = np.sum((Xb - P) ** 2, axis=1)
        lhs = float(np.sum(np.exp(-d2 / (4 * r * r)))) * cell * cell
        tail = _chain_tail(W, rho_max, r)
        if tail <= 1e-3 * lhs:
            break
        W *= 1.5
    else:
        raise NumericalError("tail bound stays above 1e-3 of the integral", {"tail": tail, "lhs": lhs})
    lhs += tail
    rho_lhs = lhs / (4 * math.pi * r * r)
    return ChainResult(
        lhs=lhs,
        rhs=rhs,
        ratio=lhs / rhs,
        tail_bound=tail,
        truncation_radius=W,
        cell=cell,
        rho_lhs=rho_lhs,
        euclidean_lhs=4 * math.pi * rho_lhs,
        euclidean_rhs=math.exp(1.0 / r - 1.0) * math.sqrt(4 * math.pi) * setup.mass,
    )


# --- whole audit -----------------------------------------------------------


@dataclass
class TransportAudit:
    setup: dict
    n_records: int
    n_candidates: int
    lemma31_max_gap: float
    psd_min: float
    jacobian_max_rel: float
    jacobian_bound_max_excess: float
    lemma37_min_rel_margin: float
    coverage_rate: float
    coverage_max_error: float
    coverage_max_vertex_error: float
    chain: dict
    checks: dict
    failures: List[dict] = field(default_factory=list)
    margins: Optional[dict] = None

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self, include_margins=False):
        d = {k: v for k, v in self.__dict__.items() if k != "margins"}
        d["passed"] = self.passed
        if include_margins and self.margins is not None:
            d["margins"] = {k: np.asarray(v).tolist() for k, v in self.margins.items()}
        return d


def run_audit(
    setup: TransportSetup,
    y_grid=None,
    targets=None,
    n_targets: int = 1000,
    disk_radius: Optional[float] = None,
    seed: int = 0,
    chain: bool = True,
) -> TransportAudit:
    ys = y_grid_for(setup) if y_grid is None else np.asarray(y_grid, float)
    cs = contact_set(setup, ys)
    psd = psd_audit(setup, cs)
    jac = jacobian_audit(setup, cs, dy=float(np.min(np.diff(ys))) if ys.size > 1 else Y_STEP)
    pw = pointwise_bound_audit(setup, cs)
    rel_margin = pw.margin / pw.rhs
    excess = np.abs(jac.finite_difference) - setup.r * np.maximum(psd, 0.0)
    if targets is None:
        R = default_disk_radius(setup, ys) if disk_radius is None else disk_radius
        targets = random_targets(n_targets, R, seed, center=setup.curve.points.mean(axis=0))
    cov = coverage_audit(setup, targets)
    ch = integral_chain_audit(setup) if chain else None
    checks = {
        "residual": setup.residual < RESIDUAL_TOL * setup.residual_scale,
        "lemma31": bool(np.max(cs.lemma31_gap) < LEMMA31_TOL),
        "psd": bool(np.min(psd) >= -PSD_TOL),
        "jacobian": bool(np.max(jac.rel_mismatch) < JAC_REL_TOL),
        "jacobian_bound": bool(np.max(excess / jac.scale) < JAC_REL_TOL),
        "lemma37": bool(np.min(rel_margin) >= -MARGIN_REL_TOL),
        "coverage": bool(np.all(cov.passed)),
    }
    if ch is not None:
        checks["chain"] = ch.lhs <= ch.rhs * (1 + CHAIN_SLACK)
    failures = []
    for k in np.flatnonzero(rel_margin < -MARGIN_REL_TOL)[:20]:
        failures.append({"check": "lemma37", **derivation_chain(setup, int(cs.vertex[k]), float(cs.y[k]))})
    for k in np.flatnonzero(psd < -PSD_TOL)[:20]:
        failures.append({"check": "psd", "vertex": int(cs.vertex[k]), "y": float(cs.y[k]), "psd": float(psd[k])})
    for k in np.flatnonzero(~cov.passed)[:20]:
        failures.append(
            {
                "check": "coverage",
                "target": cov.targets[k].tolist(),
                "tangential": float(cov.tangential[k]),
                "error": float(cov.reconstruction_error[k]),
                "slack": float(cov.slack[k]),
            }
        )
    return TransportAudit(
        setup=setup.summary(),
        n_records=len(cs),
        n_candidates=cs.n_candidates,
        lemma31_max_gap=float(np.max(cs.lemma31_gap)),
        psd_min=float(np.min(psd)),
        jacobian_max_rel=float(np.max(jac.rel_mismatch)),
        jacobian_bound_max_excess=float(np.max(excess / jac.scale)),
        lemma37_min_rel_margin=float(np.min(rel_margin)),
        coverage_rate=cov.pass_rate,
        coverage_max_error=float(np.max(cov.reconstruction_error)),
        coverage_max_vertex_error=float(np.max(cov.vertex_reconstruction_error)),
        chain=ch.to_dict() if ch is not None else {},
        checks=checks,
        failures=failures,
        margins={
            "vertex": setup.order[cs.vertex],
            "y": cs.y,
            "slack": cs.slack,
            "lemma31_gap": cs.lemma31_gap,
            "psd": psd,
            "jacobian_closed_form": jac.closed_form,
            "jacobian_fd": jac.finite_difference,
            "lemma37_margin": pw.margin,
        },
    )
