"""Generalized Cantor sets K_{l,m} on a boundary circle, their self-similar
Hausdorff measure, quadrature rules, density checks, and the product sets
K_{l,m} x (k-ball) used for higher dimensions.

Measure bookkeeping is done in the [0, 1] parametrization of the circle.
Embedded coordinates are only used when evaluating eigenfunctions.
"""

from __future__ import annotations

import math
import warnings
from functools import lru_cache
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gamma

__all__ = [
    "CantorSpec",
    "CantorLevel",
    "CantorMeasure",
    "ProductSpec",
    "DensityCheck",
    "LevelWarning",
    "omega_s",
    "dimension",
    "level_intervals",
    "quadrature",
    "embed_circle",
    "density_check",
    "density_sweep",
    "regularity_constant",
    "product_quadrature",
    "widest_gap_center",
    "measure_rows",
]

DEFAULT_LEVEL_CAP = 18


class LevelWarning(UserWarning):
    """Requested resolution exceeds what the level cap allows."""


@dataclass(frozen=True)
class CantorSpec:
    """l children per interval, each a/m of the parent's length."""

    l: int
    m: int
    a: float = 1.0
    level_cap: int = DEFAULT_LEVEL_CAP

    def __post_init__(self):
        if not (int(self.l) == self.l and int(self.m) == self.m):
            raise ValueError("l and m must be integers")
        if not 1 <= self.l < self.m:
            raise ValueError(f"need 1 <= l < m, got l={self.l}, m={self.m}")
        if not 0.0 < self.a <= 1.0:
            raise ValueError(f"a must lie in (0, 1], got {self.a}")
        s = self.s
        if not 0.0 < s < 1.0:
            raise ValueError(f"dimension {s} not in (0, 1)")

    @property
    def s(self) -> float:
        return dimension(self)

    @property
    def ratio(self) -> float:
        """Length contraction a/m from one level to the next."""
        return self.a / self.m

    def length(self, level: int) -> float:
        return self.ratio**level

    def barycenter(self) -> float:
        """Relative position of the self-similar measure's mean inside an interval."""
        return (self.l - 1) / (2.0 * self.l) / (1.0 - self.ratio)


@dataclass(frozen=True, eq=False)
class CantorLevel:
    level: int
    lefts: np.ndarray
    length: float

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return [(float(x), self.length) for x in self.lefts]

    def __len__(self):
        return len(self.lefts)


@dataclass(frozen=True, eq=False)
class CantorMeasure:
    """Discrete approximation of H^s restricted to a Cantor-type set.

    ``nodes`` are circle parameters in [0, 1]; ``points`` are the embedded
    boundary points, shape (N, n). For product sets ``cube`` holds the
    k-ball factor of each node.
    """

    spec: CantorSpec
    level: int
    nodes: np.ndarray
    weights: np.ndarray
    total_mass: float
    regularity_K: float
    n: int
    embedding: str
    points: np.ndarray
    cube: np.ndarray | None = field(default=None)

    @property
    def s(self) -> float:
        """Dimension of the measure (k + s for product sets)."""
        k = 0 if self.cube is None else self.cube.shape[1]
        return self.spec.s + k

    @property
    def spacing(self) -> float:
        return self.spec.length(self.level)

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class ProductSpec:
    base: CantorSpec
    k: int
    epsilon: float
    grid: int = 8

    def __post_init__(self):
        if self.k < 0 or int(self.k) != self.k:
            raise ValueError("k must be a non-negative integer")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.grid < 1:
            raise ValueError("grid resolution must be >= 1")

    @property
    def s(self) -> float:
        return self.k + self.base.s


class DensityCheck(NamedTuple):
    lower_ok: bool
    upper_ok: bool
    ratio: float
    measure: float
    lower: float
    upper: float
    level: int


def omega_s(s: float) -> float:
    """Normalizing constant pi^(s/2) / Gamma(s/2 + 1) of H^s."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    return float(math.pi ** (s / 2.0) / gamma(s / 2.0 + 1.0))


def dimension(spec: CantorSpec) -> float:
    return math.log(spec.l) / (math.log(spec.m) - math.log(spec.a))


def level_intervals(spec: CantorSpec, n: int) -> CantorLevel:
    """Level-n intervals; children sit at offsets i/l of the parent length.

    Ordering is depth first by child index, which for this layout is also
    sorted by left endpoint.
    """
    if n < 0 or n > spec.level_cap:
        raise ValueError(f"level {n} outside [0, {spec.level_cap}]")
    lefts = np.zeros(1)
    length = 1.0
    offsets = np.arange(spec.l) / spec.l
    for _ in range(n):
        lefts = (lefts[:, None] + offsets[None, :] * length).ravel()
        length *= spec.ratio
    return CantorLevel(level=n, lefts=lefts, length=length)


def embed_circle(t, n: int) -> np.ndarray:
    """Map circle parameters t in [0, 1] to (0, ..., 0, cos 2 pi t, sin 2 pi t)."""
    if n < 2:
        raise ValueError("ambient dimension must be >= 2")
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (n,))
    ang = 2.0 * np.pi * np.mod(t, 1.0)
    out[..., n - 2] = np.cos(ang)
    out[..., n - 1] = np.sin(ang)
    return out


@lru_cache(maxsize=None)
def regularity_constant(spec: CantorSpec, samples: int = 200, seed: int = 0) -> float:
    """Upper-density constant K with H^s(set within r of z) <= K r^s.

    For a = 1 this is the proven value omega_s (2m)^s; otherwise the
    empirical supremum over a density sweep, padded by 5%.
    """
    if spec.a == 1.0:
        return omega_s(spec.s) * (2 * spec.m) ** spec.s
    rows = density_sweep(spec, samples, seed=seed, K=np.inf)
    return 1.05 * max(c.ratio for c in rows)


@lru_cache(maxsize=64)
def _nodes_weights(spec: CantorSpec, level: int, rule: str) -> tuple[np.ndarray, np.ndarray]:
    if rule not in ("barycenter", "midpoint"):
        raise ValueError(f"unknown node rule {rule!r}")
    lv = level_intervals(spec, level)
    frac = spec.barycenter() if rule == "barycenter" else 0.5
    nodes = lv.lefts + frac * lv.length
    weights = np.full(nodes.size, omega_s(spec.s) / spec.l**level)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def quadrature(spec: CantorSpec, level: int, n: int = 2, rule: str = "barycenter") -> CantorMeasure:
    """Equal-weight quadrature for H^s on K_{l,m}, one node per level interval.

    ``rule="barycenter"`` places each node at the mean of the self-similar
    measure on its interval, which integrates affine functions exactly.
    ``rule="midpoint"`` uses interval midpoints.
    """
    nodes, weights = _nodes_weights(spec, level, rule)
    om = omega_s(spec.s)
    return CantorMeasure(
        spec=spec,
        level=level,
        nodes=nodes,
        weights=weights,
        total_mass=om,
        regularity_K=regularity_constant(spec),
        n=n,
        embedding="circle",
        points=embed_circle(nodes, n),
    )


def _level_for_radius(spec: CantorSpec, r: float) -> int:
    need = math.ceil(math.log(r / 10.0) / math.log(spec.ratio))
    level = max(0, need)
    if level > spec.level_cap:
        warnings.warn(
            f"radius {r:g} needs level {level} > cap {spec.level_cap}", LevelWarning, stacklevel=3
        )
        level = spec.level_cap
    return level


def density_check(spec: CantorSpec, z: float, r: float, level: int | None = None, K: float | None = None) -> DensityCheck:
    """Compare H^s(set within r of z) with omega_s r^s / l^s and K r^s.

    Distances are measured in the [0, 1] parameter, and the measure is the sum
    of node weights within r at a level whose interval length is <= r/10.
    """
    if not 0.0 < r <= 2.0:
        raise ValueError(f"radius must lie in (0, 2], got {r}")
    if level is None:
        level = _level_for_radius(spec, r)
    nodes, weights = _nodes_weights(spec, level, "barycenter")
    s = spec.s
    measure = float(weights[np.abs(nodes - z) <= r].sum())
    lower = omega_s(s) * r**s / spec.l**s
    upper = (regularity_constant(spec) if K is None else K) * r**s
    return DensityCheck(
        lower_ok=measure >= lower,
        upper_ok=measure <= upper,
        ratio=measure / r**s,
        measure=measure,
        lower=lower,
        upper=upper,
        level=level,
    )


def density_sweep(spec: CantorSpec, count: int, seed: int = 0, r_min: float = 1e-4, r_max: float = 2.0, K: float | None = None) -> list[DensityCheck]:
    """Density checks at seeded (node, log-uniform radius) pairs."""
    rng = np.random.default_rng(seed)
    fine, _ = _nodes_weights(spec, _level_for_radius(spec, r_min), "barycenter")
    out = []
    for _ in range(count):
        z = float(fine[rng.integers(len(fine))])
        r = float(np.exp(rng.uniform(np.log(r_min), np.log(r_max))))
        out.append(density_check(spec, z, r, K=K))
    return out


def product_quadrature(pspec: ProductSpec, level: int, n: int, rule: str = "barycenter") -> CantorMeasure:
    """Tensor product of the circle quadrature with a cell-centred grid on the
    k-ball of radius epsilon.

    A cube point y rescales the circle pair by sqrt(1 - |y|^2), so every
    node lies on the unit sphere. Cube weights are renormalized so their sum is
    exactly the volume of the k-ball.
    """
    k = pspec.k
    base = quadrature(pspec.base, level, n, rule)
    if k == 0:
        return base
    if n < k + 2:
        raise ValueError(f"ambient dimension {n} cannot hold a {k}-cube factor and a circle")
    if not 0.0 < pspec.s < n - 1:
        raise ValueError(f"k + s = {pspec.s} not in (0, {n - 1})")
    eps = pspec.epsilon
    axis = (np.arange(pspec.grid) + 0.5) / pspec.grid * 2 * eps - eps
    cube = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
    cube = cube[np.linalg.norm(cube, axis=1) <= eps]
    ball_vol = math.pi ** (k / 2.0) / gamma(k / 2.0 + 1.0) * eps**k
    cube_w = ball_vol / len(cube)

    nodes = np.repeat(base.nodes, len(cube))
    ys = np.tile(cube, (len(base), 1))
    scale = np.sqrt(1.0 - np.sum(ys * ys, axis=1))
    pts = embed_circle(nodes, n) * scale[:, None]
    pts[:, :k] = ys
    weights = np.repeat(base.weights, len(cube)) * cube_w
    return CantorMeasure(
        spec=pspec.base,
        level=level,
        nodes=nodes,
        weights=weights,
        total_mass=base.total_mass * ball_vol,
        regularity_K=base.regularity_K,
        n=n,
        embedding=f"product(k={k}, epsilon={eps}, grid={pspec.grid})",
        points=pts,
        cube=ys,
    )


def widest_gap_center(spec: CantorSpec, level: int = 1) -> float:
    """Circle parameter farthest from the closed set: centre of the widest gap,
    wrap-around gap included. Ties go to the smallest parameter."""
    lv = level_intervals(spec, max(1, level))
    # the set inside [0, 1] spans [0, hull]
    hull = (spec.l - 1) / spec.l / (1.0 - spec.ratio)
    starts = lv.lefts
    ends = lv.lefts + hull * lv.length
    gaps = np.append(starts[1:] - ends[:-1], 1.0 + starts[0] - ends[-1])
    j = int(np.argmax(gaps > gaps.max() * (1 - 1e-12)))
    return float(np.mod(ends[j] + 0.5 * gaps[j], 1.0))


def measure_rows(measure: CantorMeasure):
    """CSV rows (index, t, weight, x1..xn) in node order."""
    for i, (t, w, x) in enumerate(zip(measure.nodes, measure.weights, measure.points)):
        yield [i, float(t), float(w), *map(float, x)]
