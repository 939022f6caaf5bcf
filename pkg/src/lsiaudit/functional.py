"""Log-Sobolev deficit of a discrete closed submanifold.

For a positive field ``f`` on a compact ``n``-dimensional shape the four
integrals are

    mass      = int f
    entropy   = int f (log f + n + n/2 log 4pi + log theta)
    dirichlet = int |grad f|^2 / f
    curvature = int f |H|^2

and ``deficit = mass log mass - entropy + dirichlet + curvature``.  The
inequality under audit says the deficit is nonnegative.  Vertex fields are
integrated against dual measures; the Dirichlet integrand lives on edges /
faces and uses the geometric mean of ``f`` there.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DomainError, UsageError
from .submanifold import _positive_field, integrate

__all__ = [
    "DeficitReport",
    "deficit",
    "compatibility",
    "normalization_lambda",
    "mass_lower_bound_check",
    "disconnected_strictness_check",
    "split_bracket",
    "corollary_report",
    "EPS_DISC",
]

EPS_DISC = 1e-3  # relative to mass


@dataclass
class DeficitReport:
    mass: float
    entropy_term: float
    dirichlet_term: float
    curvature_term: float
    rhs: float
    deficit: float
    theta_used: float
    n: int
    components: List["DeficitReport"] = field(default_factory=list)

    def bookkeeping_residual(self) -> float:
        return self.deficit - (self.rhs - self.entropy_term + self.dirichlet_term + self.curvature_term)

    def to_dict(self):
        d = asdict(self)
        d["components"] = [c.to_dict() for c in self.components]
        return d


@dataclass
class _Integrands:
    vertex_entropy: np.ndarray  # f log f, per vertex
    vertex_f: np.ndarray
    vertex_curv: np.ndarray  # f |H|^2
    element_dir: np.ndarray  # |grad f|^2 / f on edges/faces
    dual: np.ndarray
    elem: np.ndarray


def _integrands(shape, f) -> _Integrands:
    f = _positive_field(f, shape.n_vertices)
    H = shape.mean_curvature()
    g = shape.tangential_gradient(f)
    fe = shape.edge_field_mean(f)
    return _Integrands(
        vertex_entropy=f * np.log(f),
        vertex_f=f,
        vertex_curv=f * np.einsum("ij,ij->i", H, H),
        element_dir=np.einsum("ij,ij->i", g, g) / fe,
        dual=shape.dual_measure(),
        elem=shape.element_measure(),
    )


def _report(n, theta, mass, flogf, dirichlet, curvature, components=()):
    const = n + 0.5 * n * math.log(4 * math.pi) + math.log(theta)
    entropy = flogf + const * mass
    rhs = mass * math.log(mass)
    vals = (mass, entropy, dirichlet, curvature, rhs)
    if not all(math.isfinite(v) for v in vals) or mass <= 0:
        raise DomainError("deficit terms must be finite with positive mass")
    return DeficitReport(
        mass=mass,
        entropy_term=entropy,
        dirichlet_term=dirichlet,
        curvature_term=curvature,
        rhs=rhs,
        deficit=rhs - entropy + dirichlet + curvature,
        theta_used=float(theta),
        n=n,
        components=list(components),
    )


def deficit(shape, f=None, theta: float = 1.0) -> DeficitReport:
    """Deficit of the inequality for ``f`` on ``shape`` with density ``theta``."""
    if not (theta > 0 and math.isfinite(theta)):
        raise DomainError("theta must be a finite positive number")
    f = shape.f if f is None else f
    I = _integrands(shape, f)
    n = shape.intrinsic_dim
    raw = []
    labels, elabels = shape.labels, shape.element_labels
    for c in range(shape.n_components):
        v, e = labels == c, elabels == c
        raw.append(
            (
                float(np.dot(I.dual[v], I.vertex_f[v])),
                float(np.dot(I.dual[v], I.vertex_entropy[v])),
                float(np.dot(I.elem[e], I.element_dir[e])),
                float(np.dot(I.dual[v], I.vertex_curv[v])),
            )
        )
    comps = [_report(n, theta, *t) for t in raw]
    # whole-shape terms are fixed-order sums of the component terms
    totals = [math.fsum(t[k] for t in raw) for k in range(4)]
    return _report(n, theta, *totals, components=comps)


def compatibility(shape, f=None) -> float:
    """``int f log f - int |grad f|^2/f - int f |H|^2``."""
    I = _integrands(shape, shape.f if f is None else f)
    return (
        float(np.dot(I.dual, I.vertex_entropy))
        - float(np.dot(I.elem, I.element_dir))
        - float(np.dot(I.dual, I.vertex_curv))
    )


def normalization_lambda(shape, f=None) -> float:
    """Scale ``lam`` with ``compatibility(lam f) = 0``.

    Every term is linear in the scale except ``f log f``, which gains
    ``log(lam) int f``; solving gives ``lam = exp(-compatibility / mass)``.
    """
    f = _positive_field(shape.f if f is None else f, shape.n_vertices)
    mass = integrate(shape, f)
    return math.exp(-compatibility(shape, f) / mass)


@dataclass
class MassBoundReport:
    lam: float
    normalized_mass: float
    bound: float
    tol: float
    passed: bool
    report: DeficitReport

    def to_dict(self):
        d = asdict(self)
        d["report"] = self.report.to_dict()
        return d


def mass_lower_bound_check(shape, f=None, theta: float = 1.0, tol: float = EPS_DISC) -> MassBoundReport:
    """After normalization the mass must be at least ``e^n (4pi)^(n/2) theta``."""
    f = _positive_field(shape.f if f is None else f, shape.n_vertices)
    lam = normalization_lambda(shape, f)
    n = shape.intrinsic_dim
    m = integrate(shape, lam * f)
    bound = math.e**n * (4 * math.pi) ** (n / 2) * theta
    return MassBoundReport(
        lam=lam,
        normalized_mass=m,
        bound=bound,
        tol=tol,
        passed=bool(m >= bound * (1 - tol)),
        report=deficit(shape, f, theta),
    )


def split_bracket(masses) -> float:
    """``(sum m) log(sum m) - sum m log m``; positive for two or more parts."""
    m = np.asarray(masses, float)
    if np.any(m <= 0):
        raise DomainError("component masses must be positive")
    total = math.fsum(m)
    return total * math.log(total) - math.fsum(m * np.log(m))


@dataclass
class StrictnessReport:
    whole: DeficitReport
    components: List[DeficitReport]
    bracket: float
    identity_residual: float
    strictly_positive: bool

    def to_dict(self):
        return {
            "whole": self.whole.to_dict(),
            "components": [c.to_dict() for c in self.components],
            "bracket": self.bracket,
            "identity_residual": self.identity_residual,
            "strictly_positive": self.strictly_positive,
        }


def disconnected_strictness_check(shape, f=None, theta: float = 1.0) -> StrictnessReport:
    """Split the whole deficit into per-component deficits plus the
    ``a log a + b log b < (a+b) log(a+b)`` bracket."""
    whole = deficit(shape, f, theta)
    comps = whole.components
    bracket = split_bracket([c.mass for c in comps]) if len(comps) > 1 else 0.0
    resid = whole.deficit - (math.fsum(c.deficit for c in comps) + bracket)
    return StrictnessReport(
        whole=whole,
        components=comps,
        bracket=bracket,
        identity_residual=resid,
        strictly_positive=bool(bracket > 0) if len(comps) > 1 else False,
    )


def corollary_report(curve, f=None, theta_measured: Optional[float] = None) -> dict:
    """Curve on a paraboloid: deficit under the claimed density 2 and under a
    measured one.  Nothing is asserted; both numbers are reported."""
    if curve.intrinsic_dim != 1:
        raise UsageError("the paraboloid corollary concerns closed curves")
    out = {"theta_claimed": 2.0, "deficit_claimed": deficit(curve, f, 2.0).to_dict()}
    if theta_measured is not None and theta_measured > 0:
        out["theta_measured"] = float(theta_measured)
        out["deficit_measured"] = deficit(curve, f, theta_measured).to_dict()
    else:
        out["theta_measured"] = theta_measured
        out["deficit_measured"] = None
        out["note"] = "measured density is not positive; the inequality has no finite constant"
    return out
