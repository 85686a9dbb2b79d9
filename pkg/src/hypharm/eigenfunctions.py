"""Individual lambda-harmonic building blocks on the ball model.

* the radial profile h(d) along the signed distance to a geodesic
  hypersphere, built as a Frobenius series in t = 1/sinh(d);
* the hyperball eigenfunction w_I = h(d)/h(d0);
* the horoball family u_{z,A1,A2} at the bottom of the spectrum;
* the explicit n = 5 hyperannulus profile.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import bisect

from .geometry import (
    BoundaryPoint,
    GeodesicHyperball,
    _coords,
    hyperball_signed_distance,
)

__all__ = [
    "CalibrationError",
    "SeriesRangeWarning",
    "RadialProfile",
    "HoroballEigenfunction",
    "HyperballEigenfunction",
    "lambda1",
    "indicial_roots",
    "frobenius_coeffs",
    "calibrate_profile",
    "radial_profile",
    "profile_eval_h",
    "ode_residual",
    "w_I_eval",
    "u_z_eval",
    "horoball_values",
    "n5_profile",
    "n5_zero",
    "n5_hyperannulus",
]

DEFAULT_TERMS = 60
T_CAP = 0.9
T_SCAN_STEP = 1e-3
SERIES_TOL = 1e-12
C3_SAFETY = 1.01


class CalibrationError(RuntimeError):
    """Raised when a profile cannot be calibrated at the requested order."""


class SeriesRangeWarning(UserWarning):
    """Series evaluated outside its calibrated monotone range."""


def lambda1(n: int) -> float:
    """Bottom of the spectrum of hyperbolic n-space, (n-1)^2/4."""
    if int(n) != n or n < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {n}")
    return (n - 1) ** 2 / 4.0


def _check_lambda(n: int, lam: float) -> float:
    l1 = lambda1(n)
    # tolerate round-off from lambda-fraction arithmetic
    if lam < 0.0 or lam > l1 * (1.0 + 1e-14):
        raise ValueError(f"lambda={lam} outside [0, {l1}] for n={n}")
    return min(float(lam), l1)


def indicial_roots(n: int, lam: float) -> tuple[float, float]:
    """Roots (r1, r2), r1 >= r2, of rho^2 - (n-1) rho + lambda = 0."""
    lam = _check_lambda(n, lam)
    half = (n - 1) / 2.0
    root = math.sqrt(max(0.0, 1.0 - lam / lambda1(n)))
    r1 = half + half * root
    return r1, r1 - (n - 1) * root


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Truncated Frobenius solution v1(t) = sum a_i t^(i+r1), t = 1/sinh(d).

    The calibration fields are ``None`` until :func:`calibrate_profile` runs.
    ``t_accurate`` is the radius inside which the estimated truncation tail
    stays below ``SERIES_TOL`` relative to the partial sum.
    """

    n: int
    lam: float
    coeffs: np.ndarray
    r1: float
    r2: float
    t0: float | None = None
    d0: float | None = None
    C3: float | None = None
    t_accurate: float | None = None

    @property
    def terms(self) -> int:
        return len(self.coeffs) - 1

    @property
    def calibrated(self) -> bool:
        return self.d0 is not None

    # v1 = t^r p(t) with p the plain power series of the coefficients
    def _p(self, t, der=0):
        c = self.coeffs if der == 0 else P.polyder(self.coeffs, der)
        return P.polyval(t, c)

    def v(self, t):
        t = np.asarray(t, dtype=float)
        return t**self.r1 * self._p(t)

    def dv(self, t):
        t = np.asarray(t, dtype=float)
        r = self.r1
        return t ** (r - 1) * (r * self._p(t) + t * self._p(t, 1))

    def d2v(self, t):
        t = np.asarray(t, dtype=float)
        r = self.r1
        return t ** (r - 2) * (
            r * (r - 1) * self._p(t) + 2 * r * t * self._p(t, 1) + t * t * self._p(t, 2)
        )

    def tail_estimate(self, t):
        """Ratio-test estimate of the omitted tail, relative to the partial sum."""
        t = np.asarray(t, dtype=float)
        nz = np.flatnonzero(self.coeffs)
        last = nz[-1]
        prev = nz[-2] if len(nz) > 1 else None
        ratio = abs(self.coeffs[last] / self.coeffs[prev]) if prev is not None else 1.0
        q = ratio * t ** (last - prev if prev is not None else 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(
                q < 1.0,
                abs(self.coeffs[last]) * t**last * q / (1.0 - q),
                np.inf,
            )
            return tail / np.abs(self._p(t))

    def h(self, d):
        return profile_eval_h(self, d)

    def dh(self, d):
        """First derivative of h with respect to d."""
        t = 1.0 / np.sinh(np.asarray(d, dtype=float))
        return self.dv(t) * (-t * np.sqrt(1.0 + t * t))

    def d2h(self, d):
        t = 1.0 / np.sinh(np.asarray(d, dtype=float))
        dt = -t * np.sqrt(1.0 + t * t)
        d2t = t * (1.0 + 2.0 * t * t)
        return self.d2v(t) * dt * dt + self.dv(t) * d2t

    def scaled_h(self, d):
        """h(d) * exp(r1 d), evaluated without overflow."""
        d = np.asarray(d, dtype=float)
        t = 1.0 / np.sinh(d)
        te = 2.0 / -np.expm1(-2.0 * d)
        return te**self.r1 * self._p(t)


def frobenius_coeffs(n: int, lam: float, N: int = DEFAULT_TERMS, a0: float = 1.0) -> RadialProfile:
    """Frobenius coefficients of the t-form radial equation about t = 0.

    Substituting sum a_i t^(i+r) into
    (1+t^2) v'' + ((2t^2+2-n)/t) v' + (lambda/t^2) v = 0 gives
    a_i F(i+r) + a_{i-2} (i-2+r)(i-1+r) = 0 with F(rho) = rho^2-(n-1)rho+lambda,
    and a_1 = 0, so only even coefficients survive.
    """
    if N < 2:
        raise ValueError(f"need at least 2 terms, got N={N}")
    if not a0 > 0:
        raise ValueError(f"a0 must be positive, got {a0}")
    lam = _check_lambda(n, lam)
    r1, r2 = indicial_roots(n, lam)

    def F(rho):
        return rho * rho - (n - 1) * rho + lam

    a = np.zeros(N + 1)
    a[0] = a0
    for i in range(2, N + 1, 2):
        f = F(i + r1)
        # i + r1 > r1 >= r2, so F has no root here
        assert f > 0.0, f"resonant index {i} for n={n}, lambda={lam}"
        a[i] = -a[i - 2] * (i - 2 + r1) * (i - 1 + r1) / f
    return RadialProfile(n=int(n), lam=lam, coeffs=a, r1=r1, r2=r2)


def calibrate_profile(profile: RadialProfile, t_cap: float = T_CAP) -> tuple[float, float, float, float]:
    """Find (t0, d0, C3, t_accurate) for a coefficient-only profile.

    t0 is the largest t up to the cap on which the truncated v1 is positive
    and strictly increasing (dense scan, then bisection on the breakpoint).
    The cap is lowered to the radius where the truncation tail exceeds
    ``SERIES_TOL``.
    """
    grid = np.arange(1, int(round(t_cap / T_SCAN_STEP)) + 1) * T_SCAN_STEP
    tail = profile.tail_estimate(grid)
    accurate = tail <= SERIES_TOL
    if not accurate[0]:
        raise CalibrationError(f"series of order {profile.terms} is inaccurate even at t={grid[0]}")
    t_acc = grid[np.argmin(accurate)] - T_SCAN_STEP if not accurate.all() else grid[-1]
    grid = grid[grid <= t_acc + 1e-15]

    def good(t):
        return bool(profile.v(t) > 0.0 and profile.dv(t) > 0.0)

    ok = (profile.v(grid) > 0.0) & (profile.dv(grid) > 0.0)
    if not ok[0]:
        raise CalibrationError(f"truncated series not positive increasing near 0 (N={profile.terms})")
    if ok.all():
        t0 = float(grid[-1])
    else:
        j = int(np.argmin(ok))
        lo, hi = float(grid[j - 1]), float(grid[j])
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if good(mid) else (lo, mid)
        t0 = lo
    d0 = float(np.arcsinh(1.0 / t0))
    ds = d0 + np.concatenate([np.linspace(0.0, 5.0, 2001), np.linspace(5.0, 60.0, 2001)[1:]])
    C3 = float(np.max(profile.scaled_h(ds))) * C3_SAFETY
    return t0, d0, C3, float(t_acc)


def radial_profile(n: int, lam: float, N: int = DEFAULT_TERMS, a0: float = 1.0) -> RadialProfile:
    """Coefficients plus calibration in one step."""
    prof = frobenius_coeffs(n, lam, N, a0)
    t0, d0, C3, t_acc = calibrate_profile(prof)
    return replace(prof, t0=t0, d0=d0, C3=C3, t_accurate=t_acc)


def profile_eval_h(profile: RadialProfile, d):
    """h(d) = v1(1/sinh d). Warns (does not fail) for 0 < d <= d0."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("profile is only defined for d > 0")
    if profile.d0 is not None and np.any(d < profile.d0 * (1.0 - 1e-12)):
        warnings.warn(
            f"h evaluated below d0={profile.d0:.6g}, outside the calibrated monotone range",
            SeriesRangeWarning,
            stacklevel=2,
        )
    out = profile.v(1.0 / np.sinh(d))
    return float(out) if out.ndim == 0 else out


def ode_residual(profile: RadialProfile, d):
    """h'' + (n-1) tanh(d) h' + lambda h from the analytic series derivatives."""
    d = np.asarray(d, dtype=float)
    t = 1.0 / np.sinh(d)
    return profile.d2h(d) + (profile.n - 1) * np.tanh(d) * profile.dh(d) + profile.lam * profile.v(t)


@dataclass(frozen=True)
class HoroballEigenfunction:
    """u_{z,A1,A2}; the default (A1, A2) = (0, 1) is the u_z of the superposition."""

    z: BoundaryPoint
    A1: float = 0.0
    A2: float = 1.0
    n: int | None = None

    def __post_init__(self):
        z = self.z if isinstance(self.z, BoundaryPoint) else BoundaryPoint(self.z)
        object.__setattr__(self, "z", z)
        if self.n is None:
            object.__setattr__(self, "n", z.n)
        if self.n != z.n:
            raise ValueError(f"dimension {self.n} does not match z of length {z.n}")
        if self.A1 == 0.0 and self.A2 == 0.0:
            raise ValueError("(A1, A2) must not both vanish")

    def __call__(self, x):
        return u_z_eval(x, self)


def horoball_values(x, z, n: int, A1: float = 0.0, A2: float = 1.0):
    """P^((n-1)/2) (A1 + A2 ln P), P = (1-|x|^2)/|z-x|^2, broadcasting x and z."""
    x, z = _coords(x), _coords(z)
    P_ = (1.0 - np.sum(x * x, axis=-1)) / np.sum((z - x) ** 2, axis=-1)
    out = P_ ** ((n - 1) / 2.0)
    if A2 == 0.0:
        return A1 * out
    return out * (A1 + A2 * np.log(P_))


def u_z_eval(x, f: HoroballEigenfunction):
    out = horoball_values(x, f.z.coords, f.n, f.A1, f.A2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HyperballEigenfunction:
    """w_I(x) = h(d(x)) / h(d0).

    ``orientation`` picks the side on which the profile variable d is positive.
    The default -1 measures d away from the cap, so w_I equals 1 at distance
    d0 outside the hyperball and decays toward the origin; this is the
    orientation the barrier estimates need. ``+1`` measures d into the cap.
    """

    hyperball: GeodesicHyperball
    profile: RadialProfile
    orientation: int = -1

    def __post_init__(self):
        if self.orientation not in (-1, 1):
            raise ValueError("orientation must be +1 or -1")
        if not self.profile.calibrated:
            raise ValueError("profile must be calibrated")
        if self.profile.n != self.hyperball.n:
            raise ValueError("profile and hyperball dimensions differ")

    def distance(self, x):
        return self.orientation * hyperball_signed_distance(x, self.hyperball)

    def __call__(self, x):
        return w_I_eval(x, self)


def w_I_eval(x, f: HyperballEigenfunction):
    d = f.distance(x)
    prof = f.profile
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeriesRangeWarning)
        ref = profile_eval_h(prof, prof.d0)
    out = profile_eval_h(prof, d) / ref
    return float(out) if np.ndim(out) == 0 else out


def n5_profile(d):
    """(cosh d - d sinh d) / cosh^3 d, written as (1 - d tanh d) sech^2 d."""
    d = np.asarray(d, dtype=float)
    out = (1.0 - d * np.tanh(d)) / np.cosh(d) ** 2
    return float(out) if out.ndim == 0 else out


def n5_zero(xtol: float = 1e-13) -> float:
    """Positive zero of the n = 5 profile (root of d tanh d = 1) on [1, 1.5]."""
    g = lambda d: math.cosh(d) - d * math.sinh(d)  # noqa: E731
    if not g(1.0) > 0.0 > g(1.5):
        raise RuntimeError("bracket [1, 1.5] does not contain a sign change")
    return float(bisect(g, 1.0, 1.5, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))


def n5_hyperannulus(x, hyperball: GeodesicHyperball):
    """The n = 5 profile composed with the signed distance to a hypersphere."""
    return n5_profile(hyperball_signed_distance(x, hyperball))
