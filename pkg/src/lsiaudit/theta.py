"""Gaussian volume ratios and their large-scale limit.

For a complete ``k``-dimensional model ``M`` and a base point ``p``::

    rho(r) = (4 pi)^{-k/2} r^{-k} \\int_M exp(-d(x, p)^2 / 4 r^2) dvol(x)

``rho`` is identically 1 on Euclidean space.  :func:`estimate_theta` samples
it on a radius grid and extrapolates ``r -> infinity``; :func:`invariance_audit`
compares different base points and a Borel base-point map.

Integrals about a base point are reduced to one dimension with the sphere
measure ``L(s) = d vol(B_s)/ds`` of the model, and are truncated at the radius
where the Gaussian tail is certified small: nonnegative curvature gives
``vol(B_s) <= omega_k s^k``, so the tail of ``rho`` beyond ``D`` is at most
the regularized incomplete gamma function ``Q(k/2 + 1, D^2 / 4 r^2)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .ambient import AmbientModel, Cone, Cylinder, Euclidean, Paraboloid, avr_estimate
from .errors import DomainError, NumericalError, UnsupportedOperation

__all__ = [
    "ThetaEstimate",
    "InvarianceAudit",
    "rho",
    "rho_borel",
    "estimate_theta",
    "invariance_audit",
    "paraboloid_audit",
    "gaussian_tail_bound",
]

EPSREL = 1e-10
TAIL_TOL = 1e-12
MONOTONE_TOL = 1e-6


def gaussian_tail_bound(k: int, D: float, r: float) -> float:
    """Upper bound on the part of ``rho(r)`` coming from ``d(x, p) > D``."""
    return float(special.gammaincc(0.5 * k + 1.0, (D / (2.0 * r)) ** 2))


def _truncation(k, r, tol=TAIL_TOL):
    T = special.gammainccinv(0.5 * k + 1.0, tol)
    D = 2.0 * r * math.sqrt(T)
    return D, gaussian_tail_bound(k, D, r)


def _quad(fun, a, b, points=None, what=""):
    val, err, info = integrate.quad(
        fun, a, b, epsabs=0.0, epsrel=EPSREL, limit=500, points=points, full_output=1
    )[:3]
    if err > 1e-8 * max(abs(val), 1e-300) and err > 1e-14:
        raise NumericalError(
            f"quadrature for {what} did not converge",
            {"value": val, "abserr": err, "neval": info.get("neval")},
        )
    return val


def _rho_radial(model, r):
    """Gaussian ratio about the base point via the sphere measure."""
    k = model.dim
    D, tail = _truncation(k, r)
    t_max = D / r
    norm = (4.0 * math.pi) ** (-0.5 * k)

    if isinstance(model, Paraboloid):
        # integrate in the Euclidean radius u: dvol = u sqrt(1 + a^2 u^2) du dv
        a = model.a
        u_max = float(model.inverse_arc_length(D))

        def g(u):
            A = model.arc_length(u)
            return math.exp(-(A / (2.0 * r)) ** 2) * u * math.sqrt(1.0 + (a * u) ** 2)

        # split where the Gaussian has decayed by e^-1, e^-4, ...
        marks = [float(model.inverse_arc_length(2.0 * r * j)) for j in (1, 2, 3, 4)]
        marks = [m for m in marks if 0 < m < u_max]
        val = _quad(g, 0.0, u_max, points=marks or None, what="paraboloid rho")
        return 2.0 * math.pi * val / (4.0 * math.pi * r * r), tail

    def g(t):
        return math.exp(-0.25 * t * t) * float(model.sphere_measure(r * t)) * r

    points = None
    if isinstance(model, Cylinder):
        kink = math.pi * model.radius / r
        if kink < t_max:
            points = [kink]
    val = _quad(g, 0.0, t_max, points=points, what=f"{model.kind} rho")
    return norm * val / r**k, tail


def _rho_cone_offapex(model: Cone, u0: float, r: float):
    """Cone ratio about ``(u0, v)`` with the radial integral done in closed form.

    In the unrolled sector centered on the base point the distance to
    ``(s, phi)`` is ``sqrt(u0^2 + s^2 - 2 u0 s cos phi)`` for
    ``|phi| <= pi beta``; the ``s``-integral of the Gaussian against ``s ds``
    is ``2 r^2 e^{-u0^2/4r^2} + b r sqrt(pi) e^{-(u0 sin phi)^2/4r^2}
    erfc(-b / 2r)`` with ``b = u0 cos phi``.
    """
    half = math.pi * model.beta
    c = u0 / (2.0 * r)

    def g(phi):
        b = u0 * math.cos(phi)
        return b * math.sqrt(math.pi) * r * math.exp(-(c * math.sin(phi)) ** 2) * special.erfc(-b / (2.0 * r))

    val = 2.0 * _quad(g, 0.0, half, what="cone rho (off apex)")
    total = 2.0 * half * 2.0 * r * r * math.exp(-c * c) + val
    return total / (4.0 * math.pi * r * r), 0.0


def rho(model: AmbientModel, base, r: float) -> float:
    """Gaussian volume ratio of ``model`` about ``base`` at scale ``r``."""
    return _rho_with_tail(model, base, r)[0]


def _rho_with_tail(model, base, r):
    if not (r > 0 and math.isfinite(r)):
        raise DomainError(f"r must be positive and finite, got {r!r}")
    p = model.check_point(base)
    if isinstance(model, (Euclidean, Cylinder)):
        return _rho_radial(model, r)
    if isinstance(model, Cone):
        if p[0] == 0.0:
            return _rho_radial(model, r)
        return _rho_cone_offapex(model, float(p[0]), r)
    if isinstance(model, Paraboloid):
        if not model.is_base(p):
            raise UnsupportedOperation("paraboloid rho is only available about the origin")
        return _rho_radial(model, r)
    raise UnsupportedOperation(f"no rho evaluator for {type(model).__name__}")


# --- Borel base-point maps -------------------------------------------------


def _polar_nodes(n_rad, n_ang, t_max):
    # Gauss-Legendre panels in the scaled radius, periodic trapezoid in angle
    panels = np.linspace(0.0, t_max, 9)
    xg, wg = np.polynomial.legendre.leggauss(n_rad)
    t, wt = [], []
    for a, b in zip(panels[:-1], panels[1:]):
        t.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        wt.append(0.5 * (b - a) * wg)
    t = np.concatenate(t)
    wt = np.concatenate(wt)
    ang = np.arange(n_ang) * (2.0 * math.pi / n_ang)
    return t, wt, ang, 2.0 * math.pi / n_ang


def rho_borel(
    model: AmbientModel,
    borel_map: Callable[[np.ndarray], np.ndarray],
    r: float,
    center=None,
    n_rad: int = 48,
    n_ang: int = 2048,
) -> float:
    """Gaussian ratio with a point-dependent base ``p(x)``.

    ``borel_map`` takes an ``(M, 2)`` array of model coordinates and returns an
    ``(M, 2)`` array of base points.  Tensor quadrature on polar coordinates
    about ``center`` (default: the model's base point); two-dimensional models
    only.
    """
    if model.dim != 2 or isinstance(model, Paraboloid):
        raise UnsupportedOperation("Borel-map ratios need a 2-d model with general distances")
    if not (r > 0):
        raise DomainError("r must be positive")
    center = model.base_point() if center is None else model.check_point(center)

    # the map takes values in a compact set; pad the truncation by its reach
    D, _ = _truncation(2, r)
    t, wt, ang, wa = _polar_nodes(n_rad, n_ang, D / r + 1.0)
    s = r * t
    S, PHI = np.meshgrid(s, ang, indexing="ij")
    W = (r * wt)[:, None] * wa

    if isinstance(model, Euclidean):
        pts = center + np.stack([S * np.cos(PHI), S * np.sin(PHI)], axis=-1)
        W = W * S
        dist = _euclid_pairs
    elif isinstance(model, Cone):
        # polar about the apex; the unrolled angle is beta * v
        pts = np.stack([S, PHI], axis=-1)
        W = W * S * model.beta
        dist = model_distance_vec(model)
    elif isinstance(model, Cylinder):
        # strip coordinates: angle uniform, height from the radial nodes (both signs)
        R = model.radius
        h = np.concatenate([-s[::-1], s])
        wh = np.concatenate([(r * wt)[::-1], r * wt])
        H, PHI = np.meshgrid(h, ang, indexing="ij")
        pts = np.stack([center[0] + PHI, center[1] + H], axis=-1)
        W = wh[:, None] * (wa * R)
        dist = model_distance_vec(model)
    else:
        raise UnsupportedOperation(f"no Borel evaluator for {type(model).__name__}")

    flat = pts.reshape(-1, 2)
    bases = np.asarray(borel_map(flat), float).reshape(flat.shape)
    d = dist(flat, bases)
    vals = np.exp(-(d / (2.0 * r)) ** 2) * W.reshape(-1)
    return float(np.sum(vals) / (4.0 * math.pi * r * r))


def _euclid_pairs(p, q):
    return np.linalg.norm(p - q, axis=-1)


def model_distance_vec(model):
    """Vectorized pairwise distance ``d(p_i, q_i)`` for 2-d models."""
    if isinstance(model, Euclidean):
        return _euclid_pairs
    if isinstance(model, Cylinder):
        R = model.radius

        def f(p, q):
            d = np.mod(np.abs(p[:, 0] - q[:, 0]), 2 * math.pi)
            d = np.minimum(d, 2 * math.pi - d)
            return np.hypot(R * d, p[:, 1] - q[:, 1])

        return f
    if isinstance(model, Cone):
        beta = model.beta

        def f(p, q):
            d = np.mod(np.abs(p[:, 1] - q[:, 1]), 2 * math.pi)
            gap = beta * np.minimum(d, 2 * math.pi - d)
            straight = np.sqrt((p[:, 0] - q[:, 0]) ** 2 + 4 * p[:, 0] * q[:, 0] * np.sin(0.5 * gap) ** 2)
            return np.where(gap >= math.pi, p[:, 0] + q[:, 0], straight)

        return f
    raise UnsupportedOperation(f"no vectorized distance for {type(model).__name__}")


# --- theta estimation ------------------------------------------------------


@dataclass
class ThetaEstimate:
    r_grid: np.ndarray
    rho_values: np.ndarray
    extrapolated_theta: float
    monotone_flag: bool
    tail_bound_used: float
    notes: list = field(default_factory=list)
    fit_stderr: float = float("nan")
    condition_P_satisfied: bool = False
    fit_params: Optional[dict] = None

    def to_dict(self):
        return {
            "r_grid": [float(x) for x in self.r_grid],
            "rho_values": [float(x) for x in self.rho_values],
            "extrapolated_theta": float(self.extrapolated_theta),
            "monotone_flag": bool(self.monotone_flag),
            "tail_bound_used": float(self.tail_bound_used),
            "fit_stderr": float(self.fit_stderr),
            "condition_P_satisfied": bool(self.condition_P_satisfied),
            "fit_params": self.fit_params,
            "notes": list(self.notes),
        }


def _check_grid(r_grid, min_points=4, min_decades=2.0):
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < min_points:
        raise DomainError(f"r_grid needs at least {min_points} points")
    if np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise DomainError("r_grid must be positive and strictly increasing")
    if math.log10(r[-1] / r[0]) < min_decades - 1e-12:
        raise DomainError(f"r_grid must span at least {min_decades:g} decades")
    return r


def _fit_power_tail(r, rho_vals, notes):
    """Fit ``theta + c r^-alpha`` on the last half of the grid."""
    half = r.size // 2
    rr = r[half:] if r.size - half >= 3 else r[-3:]
    yy = rho_vals[-rr.size:]
    lo = float(np.min(rho_vals))
    spread = float(np.max(yy) - np.min(yy))
    if spread <= 1e-14 * max(abs(lo), 1.0):
        notes.append("rho is constant over the fit window; theta taken as that constant")
        return float(yy[-1]), 0.0, {"theta": float(yy[-1]), "c": 0.0, "alpha": None}

    x = np.log(rr / rr[-1])

    def model(x, theta, c, alpha):
        return theta + c * np.exp(-alpha * x)

    try:
        p0 = (0.5 * lo, max(yy[-1] - 0.5 * lo, 1e-12), 0.5)
        with warnings.catch_warnings():
            # a singular covariance shows up as stderr = inf below
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            popt, pcov = optimize.curve_fit(
                model, x, yy, p0=p0,
                bounds=([0.0, 0.0, 1e-3], [max(lo, 1e-300), np.inf, 10.0]),
                maxfev=20000,
            )
        stderr = float(np.sqrt(pcov[0, 0])) if np.all(np.isfinite(pcov)) else float("inf")
        theta = float(np.clip(popt[0], 0.0, lo))
        return theta, stderr, {"theta": theta, "c": float(popt[1]), "alpha": float(popt[2])}
    except (RuntimeError, ValueError) as exc:
        notes.append(f"power-law fit failed ({exc}); using last sample")
        return float(min(yy[-1], lo)), float("inf"), None


def estimate_theta(model: AmbientModel, base, r_grid: Sequence[float]) -> ThetaEstimate:
    """Sample ``rho`` along ``r_grid`` and extrapolate to ``r -> infinity``."""
    r = _check_grid(r_grid)
    vals = np.empty_like(r)
    tails = np.empty_like(r)
    for i, ri in enumerate(r):
        vals[i], tails[i] = _rho_with_tail(model, base, float(ri))
    notes = []
    monotone = bool(np.all(np.diff(vals) <= MONOTONE_TOL))
    if not monotone:
        notes.append("rho increased along the grid beyond 1e-6")
    theta, stderr, params = _fit_power_tail(r, vals, notes)
    theta = min(theta, float(np.min(vals)))
    satisfied = theta > 10.0 * stderr if math.isfinite(stderr) else False
    if not satisfied:
        notes.append("positivity of the limit is not resolved by the fit")
    return ThetaEstimate(
        r_grid=r,
        rho_values=vals,
        extrapolated_theta=theta,
        monotone_flag=monotone,
        tail_bound_used=float(np.max(tails)),
        notes=notes,
        fit_stderr=stderr,
        condition_P_satisfied=bool(satisfied),
        fit_params=params,
    )


# --- base-point invariance -------------------------------------------------


@dataclass
class InvarianceAudit:
    r_grid: np.ndarray
    bases: list
    rho_per_base: np.ndarray
    base_differences: np.ndarray
    borel_rho: Optional[np.ndarray]
    borel_deviation: Optional[np.ndarray]
    differences_vanish: bool
    borel_vanish: Optional[bool]
    notes: list = field(default_factory=list)

    def to_dict(self):
        def arr(x):
            return None if x is None else [float(v) for v in np.ravel(x)]

        return {
            "r_grid": arr(self.r_grid),
            "bases": [[float(c) for c in b] for b in self.bases],
            "rho_per_base": [arr(row) for row in self.rho_per_base],
            "base_differences": arr(self.base_differences),
            "borel_rho": arr(self.borel_rho),
            "borel_deviation": arr(self.borel_deviation),
            "differences_vanish": self.differences_vanish,
            "borel_vanish": self.borel_vanish,
            "notes": list(self.notes),
        }


ZERO_FLOOR = 1e-12


def decreasing_to_zero(values, floor=ZERO_FLOOR) -> bool:
    """Strict decrease over the last half, treating values below ``floor`` as zero."""
    v = np.asarray(values, float)
    tail = v[v.size // 2:]
    if np.all(tail <= floor):
        return True
    return bool(all(b < a or a <= floor and b <= floor for a, b in zip(tail[:-1], tail[1:])))


def invariance_audit(
    model: AmbientModel,
    bases: Sequence,
    r_grid: Sequence[float],
    borel_map: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> InvarianceAudit:
    """Compare ``rho`` across base points and against a Borel base-point map."""
    if not model.has_general_distance:
        raise UnsupportedOperation(f"{model.kind} has no general-pair distance")
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 1 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise DomainError("r_grid must be positive and strictly increasing")
    pts = [model.check_point(b) for b in bases]
    if len(pts) < 1:
        raise DomainError("need at least one base point")
    table = np.array([[rho(model, p, float(ri)) for ri in r] for p in pts])
    diffs = table.max(axis=0) - table.min(axis=0)
    notes = []
    if isinstance(model, (Euclidean, Cylinder)):
        notes.append(f"{model.kind} is homogeneous; base-point differences vanish identically")
    borel_vals = borel_dev = None
    borel_ok = None
    if borel_map is not None:
        borel_vals = np.array([rho_borel(model, borel_map, float(ri)) for ri in r])
        borel_dev = np.abs(borel_vals - table[0])
        borel_ok = decreasing_to_zero(borel_dev)
    return InvarianceAudit(
        r_grid=r,
        bases=pts,
        rho_per_base=table,
        base_differences=diffs,
        borel_rho=borel_vals,
        borel_deviation=borel_dev,
        differences_vanish=decreasing_to_zero(diffs),
        borel_vanish=borel_ok,
        notes=notes,
    )


def paraboloid_audit(a: float = 1.0, r_grid: Sequence[float] = (1, 10, 100, 1000, 10000)) -> dict:
    """Measured Gaussian ratio of the paraboloid against the claimed limit 2.

    Reports the upper bound ``rho <= 2``, monotonicity, the decay ratio
    ``rho(100)/rho(10)`` (a ``r^{-1/2}`` law predicts ``10^{-1/2}``) and flags
    whether the measured limit is compatible with 2.
    """
    model = Paraboloid(a)
    est = estimate_theta(model, model.base_point(), r_grid)
    r10 = rho(model, model.base_point(), 10.0)
    r100 = rho(model, model.base_point(), 100.0)
    claimed = 2.0
    # by monotonicity the limit is at most the last sample
    upper_limit = float(est.rho_values[-1])
    avr = avr_estimate(model, np.asarray(est.r_grid, float))
    discrepancy = upper_limit < claimed
    return {
        "a": a,
        "r_grid": [float(x) for x in est.r_grid],
        "rho_values": [float(x) for x in est.rho_values],
        "max_rho": float(np.max(est.rho_values)),
        "bound_2_holds": bool(np.all(est.rho_values <= 2.0)),
        "monotone": est.monotone_flag,
        "ratio_100_10": r100 / r10,
        "predicted_ratio": 10.0 ** -0.5,
        "extrapolated_theta": est.extrapolated_theta,
        "limit_upper_bound": upper_limit,
        "avr_last": avr.estimate,
        "claimed_theta": claimed,
        "discrepancy_flagged": bool(discrepancy),
        "note": (
            "measured rho decays like r^-1/2 and is bounded by "
            f"{upper_limit:.6g} at r={est.r_grid[-1]:g}; this is incompatible "
            "with a limit of 2 (near the origin the meridian length satisfies "
            "A(u) = u + O(u^3), not u/2)"
            if discrepancy
            else "measured values do not exclude a limit of 2"
        ),
    }
