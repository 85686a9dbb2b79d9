"""Finite-difference checks of the eigen-equation and calibration of the
non-constructive constants of the distance and barrier estimates.

The operator here is deliberately independent of the evaluators: it only
samples the target function on a centred stencil.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .eigenfunctions import lambda1, profile_eval_h, radial_profile, RadialProfile
from .geometry import cone_hyperball_origin_distance

__all__ = [
    "ResidualReport",
    "CalibrationReport",
    "laplace_beltrami_fd",
    "residual_sweep",
    "sample_ball",
    "calibrate_constants",
    "log_slope",
    "H_SCHEDULE",
]

H_SCHEDULE = (1e-3, 5e-4, 2.5e-4)
H_REPORT = 1e-4

Field = Callable[[np.ndarray], np.ndarray]


def _stencil(n: int, h: float) -> np.ndarray:
    offs = np.zeros((2 * n + 1, n))
    for i in range(n):
        offs[1 + 2 * i, i] = h
        offs[2 + 2 * i, i] = -h
    return offs


def _fd_parts(f: Field, x: np.ndarray, h: float):
    n = x.shape[-1]
    r = np.linalg.norm(x, axis=-1)
    if h <= 0:
        raise ValueError("step must be positive")
    if np.any(r + n * h >= 1.0):
        raise ValueError("finite-difference stencil leaves the ball")
    vals = f(x[:, None, :] + _stencil(n, h)[None])
    f0 = vals[:, 0]
    plus, minus = vals[:, 1::2], vals[:, 2::2]
    lap = np.sum(plus - 2.0 * f0[:, None] + minus, axis=1) / (h * h)
    grad = (plus - minus) / (2.0 * h)
    g = 1.0 - r * r
    out = 0.25 * g * g * (lap + 2.0 * (n - 2) / g * np.sum(x * grad, axis=1))
    return out, f0, np.max(np.abs(vals), axis=1)


def laplace_beltrami_fd(f: Field, x, h: float):
    """Hyperbolic Laplacian of ``f`` at ``x`` by centred differences.

    For the conformal metric 4|dx|^2/(1-|x|^2)^2 this is
    ((1-|x|^2)^2/4) [Laplacian f + 2(n-2)/(1-|x|^2) x . grad f].
    ``f`` must accept arrays of shape (..., n).
    """
    x = np.asarray(getattr(x, "coords", x), dtype=float)
    single = x.ndim == 1
    out, _, _ = _fd_parts(f, np.atleast_2d(x), h)
    return float(out[0]) if single else out


def sample_ball(n: int, count: int, radius: float = 0.9, seed: int = 0) -> np.ndarray:
    """Seeded points uniformly distributed in the ball of the given radius."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (radius * rng.uniform(size=(count, 1)) ** (1.0 / n))


def log_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class ResidualReport:
    target: str
    lam: float
    h: float
    points: np.ndarray
    residuals: np.ndarray
    max: float
    mean: float
    schedule: tuple
    max_by_h: list
    order: float
    point_orders: np.ndarray
    flagged: list = field(default_factory=list)

    @property
    def order_ok(self) -> bool:
        return 1.5 <= self.order <= 2.5

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("points", "residuals", "point_orders"):
            d[k] = np.asarray(d[k]).tolist()
        d["order_ok"] = self.order_ok
        return d


def residual_sweep(
    f: Field,
    lam: float,
    points,
    h: float = H_REPORT,
    schedule=H_SCHEDULE,
    target: str = "",
) -> ResidualReport:
    """Normalized residual |Lap u + lambda u| / (1 + |u|) at ``points``.

    The convergence order is the log-log slope of the maximum residual over
    the step ``schedule``. Per-point orders come from the first halving. A
    point is flagged when its order is below 1.5 while its residual is still
    above the round-off floor.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(np.linalg.norm(pts, axis=1) > 0.9 + 1e-12):
        raise ValueError("residual sweeps are restricted to |x| <= 0.9")

    def normalized(step):
        lap, u, fmax = _fd_parts(f, pts, step)
        g = 1.0 - np.sum(pts * pts, axis=1)
        noise = 1e3 * np.finfo(float).eps * fmax * 0.25 * g * g * 4 * pts.shape[1] / step**2
        return np.abs(lap + lam * u) / (1.0 + np.abs(u)), noise / (1.0 + np.abs(u))

    res, _ = normalized(h)
    by_h = [normalized(s) for s in schedule]
    maxes = [float(r.max()) for r, _ in by_h]
    order = log_slope(schedule, maxes) if min(maxes) > 0 else float("nan")
    (r1, n1), (r2, _) = by_h[0], by_h[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        point_orders = np.log(r1 / r2) / np.log(schedule[0] / schedule[1])
    flagged = [int(i) for i in np.flatnonzero((point_orders < 1.5) & (r1 > n1))]
    return ResidualReport(
        target=target,
        lam=float(lam),
        h=h,
        points=pts,
        residuals=res,
        max=float(res.max()),
        mean=float(res.mean()),
        schedule=tuple(schedule),
        max_by_h=maxes,
        order=order,
        point_orders=point_orders,
        flagged=flagged,
    )


@dataclass
class CalibrationReport:
    n: int
    lam: float
    C1: float
    C2: float
    theta0: float
    C4: float
    theta1: float
    d0: float
    slope_w: float
    theta_min: float
    distance_limit: float = 4.0
    samples: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def calibrate_constants(
    n: int,
    lam: float | None = None,
    profile: RadialProfile | None = None,
    theta_min: float = 1e-3,
    samples: int = 600,
    fit_tol: float = 0.05,
) -> CalibrationReport:
    """Empirical constants for d(0, boundary) in [ln(C1/theta), ln(C2/theta)]
    (theta < theta0) and w_I(0) <= C4 theta^((n-1)/2) (theta < theta1).

    theta * exp(d) tends to 4 as theta -> 0; theta0 is the largest sampled
    opening up to which it stays within ``fit_tol`` of that limit.
    """
    if lam is None:
        lam = lambda1(n)
    if profile is None:
        profile = radial_profile(n, lam)
    if profile.d0 is None:
        raise ValueError("profile calibration (d0) unavailable")

    thetas = np.geomspace(theta_min, 3.0, samples)
    dist = cone_hyperball_origin_distance(thetas)
    c = thetas * np.exp(dist)
    good = np.abs(c / 4.0 - 1.0) < fit_tol
    if not good[0]:
        raise ValueError(f"distance fit fails already at theta={theta_min}")
    last = int(np.argmin(good)) - 1 if not good.all() else len(thetas) - 1
    theta0 = float(thetas[last])
    C1 = float(c[: last + 1].min())
    C2 = float(c[: last + 1].max())

    below = (thetas < theta0) & (np.log(C1 / thetas) > profile.d0)
    if not below.any():
        raise ValueError("no opening satisfies theta < theta0 and ln(C1/theta) > d0")
    theta1 = float(thetas[below].max())

    sel = thetas <= theta1
    h0 = profile_eval_h(profile, profile.d0)
    w0 = profile_eval_h(profile, dist[sel]) / h0
    expo = (n - 1) / 2.0
    C4 = float(np.max(w0 / thetas[sel] ** expo)) * 1.05
    return CalibrationReport(
        n=int(n),
        lam=float(lam),
        C1=C1,
        C2=C2,
        theta0=theta0,
        C4=C4,
        theta1=theta1,
        d0=float(profile.d0),
        slope_w=log_slope(thetas[sel], w0),
        theta_min=theta_min,
        samples=samples,
    )
