"""Poincaré ball primitives: points, horoballs, geodesic hyperballs and the
hyperbolic distances the eigenfunctions are built from.

All distance functions accept either the point types below or raw arrays of
shape ``(..., n)`` and broadcast over the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BallPoint",
    "BoundaryPoint",
    "Horoball",
    "GeodesicHyperball",
    "dist_to_origin",
    "dist_between",
    "horoball_signed_distance",
    "horoball_alpha",
    "hyperball_from_cone",
    "hyperball_signed_distance",
    "cone_hyperball_origin_distance",
    "ray_point",
]

BOUNDARY_RENORM_TOL = 1e-6


def _coords(p) -> np.ndarray:
    return np.asarray(getattr(p, "coords", p), dtype=float)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BallPoint:
    """A point of the open unit ball, the interior of the model."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise ValueError(f"ball point needs a 1-d vector of length >= 2, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("ball point has non-finite coordinates")
        if np.linalg.norm(c) >= 1.0:
            raise ValueError(f"|x| = {np.linalg.norm(c)!r} is not < 1")
        object.__setattr__(self, "coords", _frozen(c))

    @classmethod
    def origin(cls, n: int) -> BallPoint:
        return cls(np.zeros(n))

    @property
    def n(self) -> int:
        return self.coords.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    @property
    def delta(self) -> float:
        """Euclidean gap 1 - |x| to the boundary sphere."""
        return 1.0 - self.norm

    def __repr__(self):
        return f"BallPoint({self.coords.tolist()})"


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    """A point of the unit sphere (the asymptotic boundary).

    Inputs within ``BOUNDARY_RENORM_TOL`` of unit norm are renormalized,
    anything further off is rejected.
    """

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise ValueError(f"boundary point needs a 1-d vector of length >= 2, got shape {c.shape}")
        r = np.linalg.norm(c)
        if not np.isfinite(r) or abs(r - 1.0) > BOUNDARY_RENORM_TOL:
            raise ValueError(f"|z| = {r!r} is not within {BOUNDARY_RENORM_TOL} of 1")
        object.__setattr__(self, "coords", _frozen(c / r))

    @classmethod
    def axis(cls, n: int, k: int = 0) -> BoundaryPoint:
        e = np.zeros(n)
        e[k] = 1.0
        return cls(e)

    @property
    def n(self) -> int:
        return self.coords.size

    def __neg__(self) -> BoundaryPoint:
        return BoundaryPoint(-self.coords)

    def __repr__(self):
        return f"BoundaryPoint({self.coords.tolist()})"


@dataclass(frozen=True)
class Horoball:
    """Horoball centred at ``center`` whose horosphere passes through ``alpha * center``."""

    center: BoundaryPoint
    alpha: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [-1, 1), got {self.alpha}")

    def signed_distance(self, x) -> np.ndarray | float:
        """Signed distance to the horosphere, positive inside the horoball."""
        # horospheres about the same centre are equidistant
        offset = np.log1p(self.alpha) - np.log1p(-self.alpha)
        return horoball_signed_distance(x, self.center) - offset


@dataclass(frozen=True, eq=False)
class GeodesicHyperball:
    """Region cut off by a totally geodesic hypersphere, i.e. the part of the
    ball inside the Euclidean sphere ``|x - euclidean_center| = euclidean_radius``
    which meets the unit sphere orthogonally."""

    apex: BoundaryPoint
    opening: float
    euclidean_center: np.ndarray
    euclidean_radius: float

    def __post_init__(self):
        object.__setattr__(self, "euclidean_center", _frozen(self.euclidean_center))
        c2 = float(self.euclidean_center @ self.euclidean_center)
        rho = self.euclidean_radius
        if abs(c2 - (1.0 + rho * rho)) > 1e-10 * max(1.0, c2):
            raise ValueError("hypersphere is not orthogonal to the unit sphere")

    @property
    def n(self) -> int:
        return self.apex.n

    def contains(self, x) -> np.ndarray | bool:
        return hyperball_signed_distance(x, self) > 0


def dist_to_origin(p) -> np.ndarray | float:
    """Hyperbolic distance ln((1+|p|)/(1-|p|)) from p to the origin."""
    r = np.linalg.norm(_coords(p), axis=-1)
    d = np.log1p(r) - np.log1p(-r)
    return float(d) if np.ndim(d) == 0 else d


def dist_between(p, q) -> np.ndarray | float:
    """Hyperbolic distance between two ball points.

    Evaluates arccosh(1 + 2|p-q|^2 / ((1-|p|^2)(1-|q|^2))) through the
    equivalent half-distance form 2*arcsinh(...), which keeps full precision
    for nearby points.
    """
    p, q = _coords(p), _coords(q)
    diff = np.linalg.norm(p - q, axis=-1)
    gp = 1.0 - np.sum(p * p, axis=-1)
    gq = 1.0 - np.sum(q * q, axis=-1)
    d = 2.0 * np.arcsinh(diff / np.sqrt(gp * gq))
    return float(d) if np.ndim(d) == 0 else d


def horoball_signed_distance(x, z) -> np.ndarray | float:
    """Signed distance from x to the horosphere through the origin centred at z.

    Positive inside the horoball, ``ln((1-|x|^2)/|z-x|^2)``.
    """
    x, z = _coords(x), _coords(z)
    num = 1.0 - np.sum(x * x, axis=-1)
    den = np.sum((z - x) ** 2, axis=-1)
    d = np.log(num / den)
    return float(d) if np.ndim(d) == 0 else d


def horoball_alpha(x, z) -> np.ndarray | float:
    """Parameter alpha of the horosphere centred at z that passes through x."""
    x, z = _coords(x), _coords(z)
    x1 = np.sum(x * z, axis=-1)
    a = (x1 - np.sum(x * x, axis=-1)) / (1.0 - x1)
    return float(a) if np.ndim(a) == 0 else a


def hyperball_from_cone(z, theta: float) -> GeodesicHyperball:
    """Hyperball whose boundary at infinity is the cap cut out by the cone of
    opening ``theta`` about the ray from the origin to ``z``."""
    if not 0.0 < theta < np.pi:
        raise ValueError(f"opening must lie in (0, pi), got {theta}")
    z = z if isinstance(z, BoundaryPoint) else BoundaryPoint(z)
    half = 0.5 * theta
    rho = np.tan(half)
    return GeodesicHyperball(
        apex=z,
        opening=float(theta),
        euclidean_center=z.coords / np.cos(half),
        euclidean_radius=float(rho),
    )


def hyperball_signed_distance(x, hb: GeodesicHyperball) -> np.ndarray | float:
    """Signed hyperbolic distance to the boundary of ``hb``, positive inside.

    Uses sinh(d) = (rho^2 - |x-c|^2) / (rho (1-|x|^2)) for the orthogonal
    sphere with centre c and radius rho.
    """
    x = _coords(x)
    c, rho = hb.euclidean_center, hb.euclidean_radius
    num = rho * rho - np.sum((x - c) ** 2, axis=-1)
    den = rho * (1.0 - np.sum(x * x, axis=-1))
    d = np.arcsinh(num / den)
    return float(d) if np.ndim(d) == 0 else d


def cone_hyperball_origin_distance(theta) -> np.ndarray | float:
    """Unsigned distance from the origin to the boundary of the cone hyperball.

    Closed form ln((1 + sec - tan) / (1 - sec + tan)) at theta/2, evaluated
    as the distance to the origin of the point at Euclidean radius
    sec - tan = cos/(1 + sin), with the small-angle cancellation removed.
    """
    theta = np.asarray(theta, dtype=float)
    half = 0.5 * theta
    s = np.sin(half)
    e = np.cos(half) / (1.0 + s)
    one_minus_e = (s + 2.0 * np.sin(0.5 * half) ** 2) / (1.0 + s)
    d = np.log1p(e) - np.log(one_minus_e)
    return float(d) if np.ndim(d) == 0 else d


def ray_point(x0, delta) -> np.ndarray:
    """Point(s) ``(1 - delta) * x0`` on the ray from the origin to ``x0``."""
    x0 = _coords(x0)
    delta = np.asarray(delta, dtype=float)
    return (1.0 - delta)[..., None] * x0
