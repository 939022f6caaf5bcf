"""Model ambient manifolds of nonnegative curvature.

Four model families are provided: flat Euclidean space, the paraboloid of
revolution ``z = a u^2 / 2``, the round cylinder ``S^1(R) x R`` and the flat
cone with total angle ``2 pi beta``.  Each exposes intrinsic distance, the
volume of metric balls about its base point, and the "sphere measure"
``d vol(B_s) / ds`` used by the Gaussian-moment integrals in :mod:`theta`.

Points are plain numpy arrays:

* Euclidean(k): Cartesian ``(x_1, ..., x_k)``
* Paraboloid, Cone: polar ``(u, v)`` with ``u >= 0`` the meridian
  coordinate (Euclidean radius for the paraboloid, distance from the apex for
  the cone) and ``v`` the rotation angle
* Cylinder: ``(angle, height)``
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, UnsupportedOperation

TWO_PI = 2.0 * math.pi

__all__ = [
    "AmbientModel",
    "Euclidean",
    "Paraboloid",
    "Cylinder",
    "Cone",
    "AVREstimate",
    "unit_ball_volume",
    "distance",
    "ball_volume",
    "avr_estimate",
    "parse_model",
    "load_model_config",
]


def unit_ball_volume(k: int) -> float:
    """Volume of the unit ball in R^k.

    Uses ``omega_k = omega_{k-2} * 2 pi / k`` with ``omega_0 = 1`` and
    ``omega_1 = 2``, which is the Gamma-function recurrence
    ``Gamma(x + 1) = x Gamma(x)`` applied to ``pi^{k/2} / Gamma(k/2 + 1)``.
    """
    if k < 0 or int(k) != k:
        raise DomainError(f"dimension must be a nonnegative integer, got {k!r}")
    omega = 1.0 if k % 2 == 0 else 2.0
    for j in range(2 if k % 2 == 0 else 3, k + 1, 2):
        omega *= TWO_PI / j
    return omega


def _angle_gap(v1, v2):
    d = np.mod(np.abs(np.asarray(v1, float) - np.asarray(v2, float)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


class AmbientModel:
    """Common interface for the model catalog."""

    kind: str = ""
    dim: int = 2
    has_general_distance: bool = True
    is_revolution: bool = False

    def base_point(self) -> np.ndarray:
        raise NotImplementedError

    def check_point(self, p) -> np.ndarray:
        raise NotImplementedError

    def distance(self, p, q) -> float:
        raise NotImplementedError

    def ball_volume(self, s):
        raise NotImplementedError

    def sphere_measure(self, s):
        """Derivative of :meth:`ball_volume` about the base point."""
        raise NotImplementedError

    def is_base(self, p) -> bool:
        p = self.check_point(p)
        return bool(np.all(p == self.base_point()))

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Euclidean(AmbientModel):
    k: int = 2

    kind = "euclidean"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"Euclidean dimension must be >= 1, got {self.k!r}")

    @property
    def dim(self):
        return int(self.k)

    def base_point(self):
        return np.zeros(self.dim)

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,) or not np.all(np.isfinite(p)):
            raise DomainError(f"expected a finite point in R^{self.dim}, got {p!r}")
        return p

    def is_base(self, p):
        # homogeneous: every point is a valid base
        self.check_point(p)
        return True

    def distance(self, p, q):
        return float(np.linalg.norm(self.check_point(p) - self.check_point(q)))

    def ball_volume(self, s):
        return unit_ball_volume(self.dim) * np.asarray(s, float) ** self.dim

    def sphere_measure(self, s):
        k = self.dim
        return k * unit_ball_volume(k) * np.asarray(s, float) ** (k - 1)

    def describe(self):
        return {"kind": self.kind, "dim": self.dim}


@dataclass(frozen=True)
class Paraboloid(AmbientModel):
    """Paraboloid ``(u cos v, u sin v, a u^2 / 2)`` with base point the origin."""

    a: float = 1.0

    kind = "paraboloid"
    dim = 2
    has_general_distance = False
    is_revolution = True

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"paraboloid parameter a must be > 0, got {self.a!r}")

    def base_point(self):
        return np.zeros(2)

    def check_point(self, p):
        return _check_polar(p)

    def is_base(self, p):
        return bool(self.check_point(p)[0] == 0.0)

    def arc_length(self, u):
        """Meridian distance from the origin to radius ``u``."""
        u = np.asarray(u, dtype=float)
        a = self.a
        w = np.sqrt(1.0 + (a * u) ** 2)
        return 0.5 * u * w + np.arcsinh(a * u) / (2.0 * a)

    def inverse_arc_length(self, s, tol=1e-12):
        """Invert :meth:`arc_length` by bisection (``u <= s`` since ``A(u) >= u``)."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise DomainError("arc length must be finite and >= 0")
        lo = np.zeros_like(s)
        hi = s.copy()
        while np.any(hi - lo > tol):
            mid = 0.5 * (lo + hi)
            below = self.arc_length(mid) < s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(mid == lo) and np.all(mid == hi):
                break
        return 0.5 * (lo + hi)

    def distance(self, p, q):
        p = self.check_point(p)
        q = self.check_point(q)
        if p[0] == 0.0:
            return float(self.arc_length(q[0]))
        if q[0] == 0.0:
            return float(self.arc_length(p[0]))
        raise UnsupportedOperation(
            "paraboloid distance is only available from the origin"
        )

    def area_from_radius(self, u):
        """Area of the geodesic disk ``{u' <= u}`` about the origin."""
        x = (self.a * np.asarray(u, float)) ** 2
        return TWO_PI * np.expm1(1.5 * np.log1p(x)) / (3.0 * self.a**2)

    def ball_volume(self, s):
        s = np.asarray(s, dtype=float)
        return self.area_from_radius(self.inverse_arc_length(s))

    def sphere_measure(self, s):
        return TWO_PI * self.inverse_arc_length(s)

    # revolution-surface data used by CurveOnSurface
    def embed(self, u, v):
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        return np.stack([u * np.cos(v), u * np.sin(v), 0.5 * self.a * u**2], axis=-1)

    def embed_jacobian(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        c, s = np.cos(v), np.sin(v)
        return np.stack([c, s, self.a * u], -1), np.stack([-u * s, u * c, 0 * u], -1)

    def metric(self, u):
        """``(E, G, dE/du, dG/du)`` of ``E du^2 + G dv^2``."""
        u = np.asarray(u, float)
        a2 = self.a**2
        return 1.0 + a2 * u**2, u**2, 2.0 * a2 * u, 2.0 * u

    def describe(self):
        return {"kind": self.kind, "a": self.a}


@dataclass(frozen=True)
class Cylinder(AmbientModel):
    radius: float = 1.0

    kind = "cylinder"
    dim = 2
    is_revolution = True

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise DomainError(f"cylinder radius must be > 0, got {self.radius!r}")

    def base_point(self):
        return np.zeros(2)

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (2,) or not np.all(np.isfinite(p)):
            raise DomainError(f"expected (angle, height), got {p!r}")
        return p

    def is_base(self, p):
        self.check_point(p)
        return True

    def distance(self, p, q):
        p = self.check_point(p)
        q = self.check_point(q)
        arc = self.radius * _angle_gap(p[0], q[0])
        return float(math.hypot(arc, p[1] - q[1]))

    def ball_volume(self, s):
        s = np.asarray(s, dtype=float)
        c = math.pi * self.radius
        disk = math.pi * s**2
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.clip(c / np.where(s > 0, s, 1.0), 0.0, 1.0)
            wrapped = 2.0 * (c * np.sqrt(np.maximum(s**2 - c**2, 0.0)) + s**2 * np.arcsin(ratio))
        return np.where(s <= c, disk, wrapped)

    def sphere_measure(self, s):
        s = np.asarray(s, dtype=float)
        c = math.pi * self.radius
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.clip(c / np.where(s > 0, s, 1.0), 0.0, 1.0)
        return np.where(s <= c, TWO_PI * s, 4.0 * s * np.arcsin(ratio))

    def embed(self, u, v):
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        R = self.radius
        return np.stack([R * np.cos(v), R * np.sin(v), u], axis=-1)

    def embed_jacobian(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        R = self.radius
        zero = 0 * u
        return np.stack([zero, zero, zero + 1], -1), np.stack([-R * np.sin(v), R * np.cos(v), zero], -1)

    def metric(self, u):
        # CurveOnSurface coordinates are (u = height, v = angle)
        u = np.asarray(u, float)
        one = np.ones_like(u)
        return one, self.radius**2 * one, 0.0 * one, 0.0 * one

    def describe(self):
        return {"kind": self.kind, "radius": self.radius}


@dataclass(frozen=True)
class Cone(AmbientModel):
    """Flat cone of total angle ``2 pi beta``; ``beta = 1`` is the plane."""

    beta: float = 0.5

    kind = "cone"
    dim = 2
    is_revolution = True

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise DomainError(f"cone angle ratio must lie in (0, 1], got {self.beta!r}")

    def base_point(self):
        return np.zeros(2)

    def check_point(self, p):
        return _check_polar(p)

    def is_base(self, p):
        return bool(self.check_point(p)[0] == 0.0)

    def unrolled_gap(self, v1, v2):
        """Angle between two meridians after cutting and unrolling the cone."""
        return self.beta * _angle_gap(v1, v2)

    def distance(self, p, q):
        p = self.check_point(p)
        q = self.check_point(q)
        gap = float(self.unrolled_gap(p[1], q[1]))
        if gap >= math.pi:
            # straight unrolled segment would leave the sector: go through the apex
            return float(p[0] + q[0])
        d2 = (p[0] - q[0]) ** 2 + 4.0 * p[0] * q[0] * math.sin(0.5 * gap) ** 2
        return float(math.sqrt(d2))

    def ball_volume(self, s):
        return self.beta * math.pi * np.asarray(s, float) ** 2

    def sphere_measure(self, s):
        return TWO_PI * self.beta * np.asarray(s, float)

    def embed(self, u, v):
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        b = self.beta
        return np.stack(
            [b * u * np.cos(v), b * u * np.sin(v), u * math.sqrt(1.0 - b * b)], axis=-1
        )

    def embed_jacobian(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        b = self.beta
        c, s = np.cos(v), np.sin(v)
        h = math.sqrt(1.0 - b * b) + 0 * u
        return np.stack([b * c, b * s, h], -1), np.stack([-b * u * s, b * u * c, 0 * u], -1)

    def metric(self, u):
        u = np.asarray(u, float)
        b2 = self.beta**2
        return np.ones_like(u), b2 * u**2, np.zeros_like(u), 2.0 * b2 * u

    def describe(self):
        return {"kind": self.kind, "beta": self.beta}


def _check_polar(p):
    p = np.asarray(p, dtype=float)
    if p.shape != (2,) or not np.all(np.isfinite(p)):
        raise DomainError(f"expected polar coordinates (u, v), got {p!r}")
    if p[0] < 0:
        raise DomainError(f"meridian coordinate u must be >= 0, got {p[0]!r}")
    return np.array([p[0], np.mod(p[1], TWO_PI)])


def distance(model: AmbientModel, p, q) -> float:
    """Intrinsic distance between two points of ``model``."""
    return model.distance(p, q)


def ball_volume(model: AmbientModel, s):
    """Volume of the metric ball of radius ``s`` about the model's base point."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0) or not np.all(np.isfinite(s_arr)):
        raise DomainError("ball radius must be finite and >= 0")
    out = model.ball_volume(s_arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class AVREstimate:
    s_grid: np.ndarray
    ratios: np.ndarray
    estimate: float


def avr_estimate(model: AmbientModel, s_grid: Sequence[float], tol: float = 1e-9) -> AVREstimate:
    """Sample ``vol(B_s) / (omega_k s^k)`` along ``s_grid``.

    Under nonnegative curvature the ratio is nonincreasing in ``s``
    (Bishop-Gromov); a violation beyond ``tol`` raises
    :class:`~lsiaudit.errors.ConsistencyError`.
    """
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DomainError("s_grid must be a nonempty 1-d sequence")
    if np.any(s <= 0) or np.any(np.diff(s) <= 0):
        raise DomainError("s_grid must be positive and strictly increasing")
    k = model.dim
    ratios = np.asarray(ball_volume(model, s), float) / (unit_ball_volume(k) * s**k)
    jumps = np.diff(ratios)
    if np.any(jumps > tol):
        i = int(np.argmax(jumps))
        raise ConsistencyError(
            f"volume ratio increased between s={s[i]:g} and s={s[i + 1]:g} "
            f"({ratios[i]:.12g} -> {ratios[i + 1]:.12g})"
        )
    return AVREstimate(s_grid=s, ratios=ratios, estimate=float(ratios[-1]))


_PARAM_ALIASES = {
    "euclidean": {"dim": "k", "k": "k"},
    "paraboloid": {"a": "a"},
    "cylinder": {"radius": "radius", "r": "radius", "R": "radius"},
    "cone": {"beta": "beta"},
}
_CLASSES = {"euclidean": Euclidean, "paraboloid": Paraboloid, "cylinder": Cylinder, "cone": Cone}


def _build(kind, params):
    kind = kind.strip().lower()
    if kind not in _CLASSES:
        raise DomainError(f"unknown model kind {kind!r}")
    aliases = _PARAM_ALIASES[kind]
    kwargs = {}
    for key, value in params.items():
        if key not in aliases:
            raise DomainError(f"unknown parameter {key!r} for model {kind!r}")
        name = aliases[key]
        kwargs[name] = int(value) if name == "k" else float(value)
    return _CLASSES[kind](**kwargs)


def parse_model(text: str) -> AmbientModel:
    """Parse a compact model description.

    Accepted forms: ``euclidean:3``, ``paraboloid:a=1``, ``cylinder:radius=2``,
    ``cone:beta=0.5`` and bare kinds (defaults apply).
    """
    kind, _, rest = text.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" in item:
                key, value = item.split("=", 1)
                params[key.strip()] = value.strip()
            elif kind.strip().lower() == "euclidean":
                params["dim"] = item
            else:
                raise DomainError(f"cannot parse model parameter {item!r}")
    return _build(kind, params)


def load_model_config(path) -> AmbientModel:
    """Read a key-value model file (``kind = cone`` / ``beta = 0.5``)."""
    params = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"malformed config line: {line!r}")
            key, value = (t.strip() for t in line.split("=", 1))
            params[key] = value
    if "kind" not in params:
        raise DomainError("model config needs a 'kind' entry")
    kind = params.pop("kind")
    return _build(kind, params)
