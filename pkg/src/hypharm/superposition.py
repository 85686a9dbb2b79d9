"""Superposition of horoball eigenfunctions over a fractal boundary set, its
envelope constants and ray diagnostics, and the hyperball barrier sums.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .cantor import CantorMeasure, CantorSpec, LevelWarning, embed_circle, quadrature
from .eigenfunctions import (
    HyperballEigenfunction,
    horoball_values,
    lambda1,
    radial_profile,
    w_I_eval,
)
from .geometry import BoundaryPoint, _coords, dist_to_origin, hyperball_from_cone
from .verify import CalibrationReport, calibrate_constants

__all__ = [
    "SuperpositionField",
    "EnvelopeConstants",
    "RayRow",
    "BarrierReport",
    "SignScan",
    "auto_level",
    "field_at_level",
    "u_eval",
    "abs_integral",
    "shell_sums",
    "envelope_constants",
    "boundedness_envelope",
    "ray_profile",
    "attach_envelopes",
    "fit_envelopes",
    "decay_slope",
    "positivity_onset",
    "positivity_scan",
    "barrier_sum",
]

MIN_LEVEL = 6
SPACING_FACTOR = 10.0
_CHUNK = 1 << 22
ZERO_FLOOR = 1e-14


def auto_level(spec: CantorSpec, delta: float, min_level: int = MIN_LEVEL) -> int:
    """Smallest level >= ``min_level`` whose interval length is <= delta/10.

    Clamped to the set's level cap; callers detect the clamp through
    :func:`level_ok`.
    """
    need = math.ceil(math.log(delta / SPACING_FACTOR) / math.log(spec.ratio) - 1e-12)
    return int(min(spec.level_cap, max(min_level, need)))


def level_ok(spec: CantorSpec, level: int, delta) -> np.ndarray | bool:
    return spec.length(level) <= np.asarray(delta) / SPACING_FACTOR * (1 + 1e-12)


@dataclass(frozen=True, eq=False)
class SuperpositionField:
    """Quadrature form of u(x) = integral of u_z(x) dH^s(z) over the set.

    ``deterministic`` forces a serial evaluation; otherwise chunks of
    evaluation points are spread over ``workers`` threads. Each point's node
    sum is always a single ordered dot product, so both modes give identical
    numbers.
    """

    measure: CantorMeasure
    deterministic: bool = True
    workers: int = 4

    def __post_init__(self):
        n, s = self.n, self.s
        if not (n - 1) / 2.0 < s < n - 1:
            warnings.warn(
                f"s={s:.4g} outside ((n-1)/2, n-1) = ({(n - 1) / 2}, {n - 1}); "
                "existence results do not apply",
                stacklevel=2,
            )

    @property
    def n(self) -> int:
        return self.measure.n

    @property
    def s(self) -> float:
        return self.measure.s

    @property
    def rate(self) -> float:
        return self.s - (self.n - 1) / 2.0

    @property
    def level(self) -> int:
        return self.measure.level

    def _sum(self, x: np.ndarray, absolute: bool) -> np.ndarray:
        z, w = self.measure.points, self.measure.weights
        flat = x.reshape(-1, x.shape[-1])
        step = max(1, _CHUNK // max(1, len(w)))

        def block(i):
            vals = horoball_values(flat[i : i + step, None, :], z[None], self.n)
            return (np.abs(vals) if absolute else vals) @ w

        starts = range(0, len(flat), step)
        if self.deterministic or len(flat) <= step:
            parts = [block(i) for i in starts]
        else:
            with ThreadPoolExecutor(self.workers) as ex:
                parts = list(ex.map(block, starts))
        out = np.concatenate(parts) if parts else np.zeros(0)
        return out.reshape(x.shape[:-1])

    def _check_policy(self, x: np.ndarray):
        delta = 1.0 - np.linalg.norm(x, axis=-1)
        if not np.all(level_ok(self.measure.spec, self.level, delta)):
            warnings.warn(
                f"level {self.level} too coarse for delta={float(np.min(delta)):.3g}",
                LevelWarning,
                stacklevel=3,
            )

    def __call__(self, x):
        return u_eval(x, self)


@lru_cache(maxsize=32)
def field_at_level(spec: CantorSpec, level: int, n: int = 2, rule: str = "barycenter") -> SuperpositionField:
    return SuperpositionField(quadrature(spec, level, n, rule))


def u_eval(x, fld: SuperpositionField):
    """Quadrature value of the superposition at x (array (..., n) or point)."""
    x = _coords(x)
    fld._check_policy(x)
    out = fld._sum(x, absolute=False)
    return float(out) if out.ndim == 0 else out


def abs_integral(x, fld: SuperpositionField):
    """Quadrature of |u_z(x)|, the quantity bounded uniformly in x."""
    x = _coords(x)
    fld._check_policy(x)
    out = fld._sum(x, absolute=True)
    return float(out) if out.ndim == 0 else out


def shell_sums(x, fld: SuperpositionField) -> list[dict]:
    """Per-shell partial sums over {2^(i-1) delta <= |z-x| < 2^i delta}.

    Diagnostic view of the dyadic decomposition used in the boundedness
    estimate, each row with its shell bound K0 2^(i(s-(n-1))) delta^rate ln(128/delta^3).
    """
    x = _coords(x)
    delta = 1.0 - float(np.linalg.norm(x))
    k = 1
    while not 2.0 < 2**k * delta <= 4.0:
        k += 1
    z, w = fld.measure.points, fld.measure.weights
    dist = np.linalg.norm(z - x, axis=1)
    vals = horoball_values(x, z, fld.n)
    consts = envelope_constants(fld.n, fld.s, fld.measure.regularity_K)
    rows = []
    for i in range(1, k + 1):
        # |z - x| >= delta always; the first shell starts at 0 to absorb round-off
        lo, hi = (0.0 if i == 1 else 2 ** (i - 1) * delta), 2**i * delta
        sel = (dist >= lo) & (dist < hi)
        bound = (
            consts.K0 * 2 ** (i * (fld.s - (fld.n - 1)))
            * delta**consts.rate * math.log(128.0 / delta**3)
        )
        rows.append(
            dict(
                shell=i,
                lo=lo,
                hi=hi,
                nodes=int(sel.sum()),
                mass=float(w[sel].sum()),
                signed=float(vals[sel] @ w[sel]),
                absolute=float(np.abs(vals[sel]) @ w[sel]),
                bound=bound,
            )
        )
    return rows


@dataclass
class EnvelopeConstants:
    K: float
    K0: float
    K1: float
    M: float
    rate: float
    M0_bound: float
    M0: float | None = None
    Mtilde: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def envelope_constants(n: int, s: float, K: float) -> EnvelopeConstants:
    """Closed-form constants of the boundedness and decay estimates.

    K0 = 8^((n-1)/2) 2^s K, K1 = K0 q/(1-q) with q = 2^(s-(n-1)),
    M K = sup over delta in (0,1) of K1 delta^rate ln(128/delta^3), and
    M0_bound = K1 2^rate ln 128 is the prefactor the decay estimate implies.
    """
    rate = s - (n - 1) / 2.0
    if rate <= 0 or s >= n - 1:
        raise ValueError(f"need (n-1)/2 < s < n-1, got s={s}, n={n}")
    K0 = 8 ** ((n - 1) / 2.0) * 2**s * K
    q = 2 ** (s - (n - 1))
    K1 = K0 * q / (1.0 - q)
    # maximize e^(-rate u) (ln 128 + 3u) over u = -ln(delta) > 0
    u = max(0.0, 1.0 / rate - math.log(128.0) / 3.0)
    peak = math.exp(-rate * u) * (math.log(128.0) + 3.0 * u)
    return EnvelopeConstants(
        K=K,
        K0=K0,
        K1=K1,
        M=K1 * peak / K,
        rate=rate,
        M0_bound=K1 * 2**rate * math.log(128.0),
    )


def boundedness_envelope(delta, consts: EnvelopeConstants):
    delta = np.asarray(delta, dtype=float)
    return consts.K1 * delta**consts.rate * np.log(128.0 / delta**3)


@dataclass
class RayRow:
    delta: float
    d: float
    u: float
    abs_integral: float
    envelope_lo: float
    envelope_hi: float
    level: int
    warning: str
    on_set: bool = True

    COLUMNS = ("delta", "d", "u", "abs_integral", "envelope_lo", "envelope_hi", "level", "warning")

    def as_list(self) -> list:
        return [getattr(self, c) for c in self.COLUMNS]


def ray_profile(
    x0,
    deltas,
    fld: SuperpositionField,
    consts: EnvelopeConstants | None = None,
    on_set: bool = True,
) -> list[RayRow]:
    """Tabulate u((1 - delta) x0) along a ray.

    d is the distance to the origin, so delta = 2/(1 + e^d). Envelope columns
    are filled once ``consts`` carries fitted M0 / Mtilde. The lower envelope
    is only meaningful when x0 lies in the closure of the set (``on_set``).
    """
    x0 = _coords(x0)
    deltas = np.asarray(deltas, dtype=float)
    xs = (1.0 - deltas)[:, None] * x0
    ok = level_ok(fld.measure.spec, fld.level, deltas)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LevelWarning)
        us = fld._sum(xs, absolute=False)
        absv = fld._sum(xs, absolute=True)
    rows = []
    for delta, x, u, a, good in zip(deltas, xs, us, absv, ok):
        notes = [] if good else [f"level {fld.level} too coarse"]
        if not on_set:
            notes.append("envelopes n/a: ray target off the set")
        rows.append(
            RayRow(
                delta=float(delta),
                d=float(dist_to_origin(x)),
                u=float(u),
                abs_integral=float(a),
                envelope_lo=math.nan,
                envelope_hi=math.nan,
                level=fld.level,
                warning="; ".join(notes),
                on_set=on_set,
            )
        )
    if consts is not None:
        attach_envelopes(rows, consts)
    return rows


def attach_envelopes(rows: list[RayRow], consts: EnvelopeConstants) -> list[RayRow]:
    for r in rows:
        decay = math.exp(-consts.rate * r.d)
        if consts.M0 is not None:
            r.envelope_hi = consts.M0 * (r.d + 1.0) * decay
        if consts.Mtilde is not None and r.on_set:
            r.envelope_lo = consts.Mtilde * r.d * decay
    return rows


def _usable(rows):
    return [r for r in rows if r.d > 0 and "coarse" not in r.warning]


def fit_envelopes(rows: list[RayRow], consts: EnvelopeConstants) -> EnvelopeConstants:
    """Fit M0 (upper, 5% pad) and Mtilde (lower, on-set rows only, 5% pad)."""
    good = _usable(rows)
    if len(good) < 5:
        raise ValueError(f"need at least 5 rows with adequate level, got {len(good)}")
    rate = consts.rate
    M0 = 1.05 * max(abs(r.u) / ((r.d + 1.0) * math.exp(-rate * r.d)) for r in good)
    lower = [r for r in good if r.on_set]
    Mtilde = None
    if lower:
        bad = [r for r in lower if r.u <= 0]
        if bad:
            raise ValueError(
                f"non-positive u={bad[0].u:.3g} at delta={bad[0].delta:.3g} on a ray into the set"
            )
        Mtilde = 0.95 * min(r.u / (r.d * math.exp(-rate * r.d)) for r in lower)
    out = EnvelopeConstants(**{**consts.to_dict(), "M0": M0, "Mtilde": Mtilde})
    return out


def decay_slope(rows: list[RayRow], d_range: tuple[float, float] | None = None) -> float:
    """Least-squares slope of ln(u/(d+1)) against d over positive rows."""
    sel = [r for r in _usable(rows) if r.u > 0]
    if d_range is not None:
        sel = [r for r in sel if d_range[0] <= r.d <= d_range[1]]
    if len(sel) < 2:
        raise ValueError("not enough positive rows to fit a slope")
    d = np.array([r.d for r in sel])
    y = np.log(np.array([r.u for r in sel]) / (d + 1.0))
    return float(np.polyfit(d, y, 1)[0])


def positivity_onset(x0, fld: SuperpositionField, deltas=None) -> float | None:
    """Empirical onset of positivity along the ray to x0.

    Returns the largest sampled delta such that u((1 - delta') x0) > 0 for
    every sampled delta' <= delta, or None when the smallest sample is not
    positive.
    """
    if deltas is None:
        floor = SPACING_FACTOR * fld.measure.spacing
        deltas = np.geomspace(max(floor, 1e-12), 0.9, 120)
    deltas = np.sort(np.asarray(deltas, dtype=float))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LevelWarning)
        u = fld._sum((1.0 - deltas)[:, None] * _coords(x0), absolute=False)
    if not u[0] > 0:
        return None
    bad = np.flatnonzero(u <= 0)
    return float(deltas[bad[0] - 1] if bad.size else deltas[-1])


@dataclass
class SignScan:
    radii: np.ndarray
    params: np.ndarray
    labels: np.ndarray
    counts: dict = field(default_factory=dict)


def positivity_scan(fld: SuperpositionField, radii, n_angles: int = 360, tol: float = 1e-12) -> SignScan:
    """Sign map of u on rings in the plane of the boundary circle.

    Labels are +1 / -1, or 0 when |u| is below ``tol`` times the local
    absolute integral (or at round-off level). Counts split the outermost ring by whether the
    direction lies within delta (in circle parameter) of the set's nodes.
    """
    radii = np.asarray(radii, dtype=float)
    params = (np.arange(n_angles) + 0.5) / n_angles
    dirs = embed_circle(params, fld.n)
    xs = radii[:, None, None] * dirs[None]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LevelWarning)
        u = fld._sum(xs, absolute=False)
        a = fld._sum(xs, absolute=True)
    # absolute floor for rings where every summand is pure round-off
    floor = np.maximum(tol * a, ZERO_FLOOR * fld.measure.total_mass)
    labels = np.where(np.abs(u) <= floor, 0, np.sign(u)).astype(int)

    outer = int(np.argmax(radii))
    delta = 1.0 - radii[outer]
    nodes = np.sort(fld.measure.nodes)
    gap = np.abs(params[:, None] - nodes[None, :])
    near = np.min(np.minimum(gap, 1.0 - gap), axis=1) <= max(delta, fld.measure.spacing)
    lab = labels[outer]
    counts = {
        "positive": int((labels > 0).sum()),
        "negative": int((labels < 0).sum()),
        "zero": int((labels == 0).sum()),
        "outer_delta": float(delta),
        "outer_pos_near_set": int(((lab > 0) & near).sum()),
        "outer_pos_off_set": int(((lab > 0) & ~near).sum()),
        "outer_neg_near_set": int(((lab < 0) & near).sum()),
        "outer_neg_off_set": int(((lab < 0) & ~near).sum()),
    }
    return SignScan(radii=radii, params=params, labels=labels, counts=counts)


@dataclass
class BarrierReport:
    n: int
    lam: float
    epsilon: float
    C4: float
    theta1: float
    coverings: list
    values: list
    total: float
    theta_power_sum: float
    bound: float

    @property
    def openings_ok(self) -> bool:
        return self.theta_power_sum < self.epsilon / self.C4

    @property
    def sum_ok(self) -> bool:
        return self.total <= self.bound * 1.05

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(openings_ok=self.openings_ok, sum_ok=self.sum_ok)
        return d


def barrier_sum(
    points,
    epsilon: float,
    lam: float | None = None,
    n: int | None = None,
    calibration: CalibrationReport | None = None,
) -> BarrierReport:
    """Sum of hyperball eigenfunctions at the origin for small caps around
    ``points``.

    The i-th cap (i = 1, 2, ...) gets the opening
    theta_i = (epsilon 2^-i / C4)^(2/(n-1)), so sum theta_i^((n-1)/2) < epsilon/C4.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float)) if len(points) else np.zeros((0, n or 2))
    if n is None:
        n = pts.shape[1]
    if lam is None:
        lam = lambda1(n)
    if calibration is None:
        calibration = calibrate_constants(n, lam)
    profile = radial_profile(n, lam)
    expo = (n - 1) / 2.0
    C4 = calibration.C4
    coverings, values = [], []
    origin = np.zeros(n)
    for i, p in enumerate(pts, start=1):
        theta = (epsilon * 2.0**-i / C4) ** (1.0 / expo)
        if theta >= calibration.theta1:
            raise ValueError(
                f"opening {theta:.4g} for point {i} is not below theta1={calibration.theta1:.4g}; "
                "epsilon too large"
            )
        z = BoundaryPoint(p)
        w = HyperballEigenfunction(hyperball_from_cone(z, theta), profile)
        coverings.append((z.coords.tolist(), theta))
        values.append(w_I_eval(origin, w))
    power_sum = float(sum(t**expo for _, t in coverings))
    return BarrierReport(
        n=int(n),
        lam=float(lam),
        epsilon=float(epsilon),
        C4=C4,
        theta1=calibration.theta1,
        coverings=coverings,
        values=values,
        total=float(sum(values)),
        theta_power_sum=power_sum,
        bound=C4 * power_sum,
    )
