from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from hypharm.geometry import (
    BallPoint,
    BoundaryPoint,
    Horoball,
    cone_hyperball_origin_distance,
    dist_between,
    dist_to_origin,
    horoball_alpha,
    horoball_signed_distance,
    hyperball_from_cone,
    hyperball_signed_distance,
    ray_point,
)


def ball_points(n, max_norm=0.95):
    return st.lists(st.floats(-1, 1), min_size=n, max_size=n).map(
        lambda v: np.asarray(v) * max_norm / max(1.0, np.linalg.norm(v) * 1.0001)
    )


def test_ball_point_validation():
    assert BallPoint.origin(3).norm == 0.0
    with pytest.raises(ValueError):
        BallPoint([1.0, 0.0])
    with pytest.raises(ValueError):
        BallPoint([0.1])
    with pytest.raises(ValueError):
        BallPoint([np.nan, 0.0])
    p = BallPoint([0.3, 0.4])
    assert p.delta == pytest.approx(0.5)
    assert not p.coords.flags.writeable


def test_boundary_point_renormalizes_or_rejects():
    z = BoundaryPoint([1.0 + 5e-7, 0.0])
    assert np.linalg.norm(z.coords) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        BoundaryPoint([0.9, 0.0])
    assert np.allclose((-BoundaryPoint.axis(3, 1)).coords, [0, -1, 0])


def test_dist_to_origin_matches_metric_integral():
    # the metric 4|dx|^2/(1-|x|^2)^2 has length element 2 dr/(1-r^2) radially
    for r in (0.1, 0.5, 0.9, 0.999):
        length, _ = quad(lambda t: 2.0 / (1.0 - t * t), 0.0, r, epsabs=1e-13)
        assert dist_to_origin([r, 0.0]) == pytest.approx(length, rel=1e-12)


def test_dist_between_matches_arccosh_form():
    rng = np.random.default_rng(1)
    p = rng.uniform(-0.6, 0.6, (50, 3))
    q = rng.uniform(-0.6, 0.6, (50, 3))
    gp = 1 - np.sum(p * p, 1)
    gq = 1 - np.sum(q * q, 1)
    ref = np.arccosh(1 + 2 * np.sum((p - q) ** 2, 1) / (gp * gq))
    assert np.allclose(dist_between(p, q), ref, rtol=1e-10)


@settings(max_examples=60, deadline=None)
@given(ball_points(3), ball_points(3), ball_points(3))
def test_dist_between_is_a_metric(p, q, r):
    assert dist_between(p, p) == 0.0
    assert dist_between(p, q) == pytest.approx(dist_between(q, p), rel=1e-12, abs=1e-14)
    assert dist_between(p, r) <= dist_between(p, q) + dist_between(q, r) + 1e-9
    assert dist_between(np.zeros(3), p) == pytest.approx(dist_to_origin(p), rel=1e-9, abs=1e-12)


def test_horoball_distance_is_busemann_limit():
    # signed distance = lim d(0, t z) - d(x, t z) as t -> 1
    rng = np.random.default_rng(2)
    z = BoundaryPoint([0.6, 0.8])
    for x in rng.uniform(-0.5, 0.5, (10, 2)):
        t = 1 - 1e-7
        lim = dist_to_origin(t * z.coords) - dist_between(x, t * z.coords)
        assert horoball_signed_distance(x, z) == pytest.approx(lim, abs=1e-5)


def test_horoball_alpha_level_sets():
    z = BoundaryPoint.axis(3)
    rng = np.random.default_rng(3)
    for x in rng.uniform(-0.5, 0.5, (10, 3)):
        a = horoball_alpha(x, z)
        assert horoball_signed_distance(a * z.coords, z) == pytest.approx(horoball_signed_distance(x, z), abs=1e-10)
        assert Horoball(z, a).signed_distance(x) == pytest.approx(0.0, abs=1e-10)
    assert horoball_signed_distance(np.zeros(3), z) == 0.0
    # inside the horoball is positive
    assert horoball_signed_distance([0.5, 0, 0], z) > 0 > horoball_signed_distance([-0.5, 0, 0], z)


def test_hyperball_from_cone_geometry():
    z = BoundaryPoint([0.0, 1.0])
    theta = 0.7
    hb = hyperball_from_cone(z, theta)
    c, rho = hb.euclidean_center, hb.euclidean_radius
    assert c @ c == pytest.approx(1 + rho * rho)
    # the cap boundary sits at angle theta/2 from z
    for sgn in (1, -1):
        ang = math.pi / 2 + sgn * theta / 2
        edge = np.array([math.cos(ang), math.sin(ang)])
        assert np.linalg.norm(edge - c) == pytest.approx(rho, rel=1e-12)
    assert hb.contains([0.0, 0.95])
    assert not hb.contains([0.0, 0.0])
    for bad in (0.0, math.pi, -1.0):
        with pytest.raises(ValueError):
            hyperball_from_cone(z, bad)


def test_hyperball_signed_distance_against_minimization():
    # n = 2: the hyperbolic geodesic is the arc |p - c| = rho inside the disk
    hb = hyperball_from_cone(BoundaryPoint([1.0, 0.0]), 1.1)
    c, rho = hb.euclidean_center, hb.euclidean_radius
    half = math.atan(1 / rho)  # angular half-width of the arc seen from c

    def arc(phi):
        return c + rho * np.array([math.cos(math.pi + phi), math.sin(math.pi + phi)])

    rng = np.random.default_rng(4)
    for x in rng.uniform(-0.6, 0.6, (12, 2)):
        res = minimize_scalar(lambda p: dist_between(x, arc(p)), bounds=(-half + 1e-9, half - 1e-9),
                              method="bounded", options={"xatol": 1e-12})
        assert abs(hyperball_signed_distance(x, hb)) == pytest.approx(res.fun, abs=1e-7)


def test_cone_origin_distance_closed_form_and_limit():
    th = np.geomspace(1e-6, 3.0, 40)
    half = th / 2
    ref = np.log((1 + 1 / np.cos(half) - np.tan(half)) / (1 - 1 / np.cos(half) + np.tan(half)))
    got = cone_hyperball_origin_distance(th)
    big = th > 1e-2
    assert np.allclose(got[big], ref[big], rtol=1e-12)
    # d + ln theta -> ln 4, first correction is O(theta)
    assert got[0] + math.log(th[0]) == pytest.approx(math.log(4), abs=1e-5)
    for t in (0.01, 0.5, 2.0):
        hb = hyperball_from_cone(BoundaryPoint.axis(3), t)
        assert -hyperball_signed_distance(np.zeros(3), hb) == pytest.approx(cone_hyperball_origin_distance(t), rel=1e-12)


def test_broadcasting_and_ray_point():
    x = np.zeros((4, 5, 3))
    assert dist_to_origin(x).shape == (4, 5)
    assert isinstance(dist_to_origin([0.1, 0.2]), float)
    pts = ray_point(BoundaryPoint.axis(2, 1), [1.0, 0.5, 0.0])
    assert np.allclose(pts, [[0, 0], [0, 0.5], [0, 1]])
