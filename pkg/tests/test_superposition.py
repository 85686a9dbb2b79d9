from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypharm.cantor import CantorSpec, LevelWarning, ProductSpec, embed_circle, product_quadrature, quadrature, widest_gap_center
from hypharm.eigenfunctions import HoroballEigenfunction, lambda1
from hypharm.superposition import (
    EnvelopeConstants,
    SuperpositionField,
    abs_integral,
    attach_envelopes,
    auto_level,
    barrier_sum,
    boundedness_envelope,
    decay_slope,
    envelope_constants,
    field_at_level,
    fit_envelopes,
    positivity_onset,
    positivity_scan,
    ray_profile,
    shell_sums,
    u_eval,
)
from hypharm.verify import calibrate_constants, residual_sweep, sample_ball

K23 = CantorSpec(2, 3)
S = math.log(2) / math.log(3)


def quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LevelWarning)
        return fn(*a, **kw)


def test_u_vanishes_at_origin():
    for level in (3, 8, 12):
        assert abs(quiet(u_eval, np.zeros(2), field_at_level(K23, level))) < 1e-14


def test_u_eval_matches_direct_loop():
    fld = field_at_level(K23, 5)
    x = np.array([0.3, -0.5])
    ref = sum(w * HoroballEigenfunction(z)(x) for z, w in zip(fld.measure.points, fld.measure.weights))
    assert quiet(u_eval, x, fld) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 0.95))
def test_triangle_inequality(t, r):
    fld = field_at_level(K23, 8)
    x = r * embed_circle(t, 2)
    assert abs(quiet(u_eval, x, fld)) <= quiet(abs_integral, x, fld) * (1 + 1e-12) + 1e-15


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-6, 1.0))
def test_auto_level_policy(delta):
    L = auto_level(K23, delta)
    assert L >= 6
    assert K23.length(L) <= delta / 10 * (1 + 1e-12)
    if L > 6:
        assert K23.length(L - 1) > delta / 10


def test_level_policy_warning_and_existence_warning():
    fld = field_at_level(K23, 3)
    with pytest.warns(LevelWarning):
        u_eval(np.array([0.99, 0.0]), fld)
    with pytest.warns(UserWarning, match="existence"):
        SuperpositionField(quadrature(K23, 3, n=3))


def test_deterministic_and_threaded_agree():
    m = quadrature(K23, 9)
    pts = sample_ball(2, 3000, radius=0.95, seed=0)
    a = SuperpositionField(m, deterministic=True)._sum(pts, absolute=False)
    b = SuperpositionField(m, deterministic=False, workers=3)._sum(pts, absolute=False)
    assert np.array_equal(a, b)


def test_level_refinement_converges():
    x = 0.95 * embed_circle(0.2, 2)
    vals = [quiet(u_eval, x, field_at_level(K23, L)) for L in (6, 8, 10)]
    assert abs(vals[1] - vals[2]) <= 0.01 * abs(vals[2])


def test_superposition_is_eigenfunction():
    fld = field_at_level(K23, 8)
    f = lambda x: quiet(fld._sum, np.asarray(x), absolute=False)  # noqa: E731
    rep = residual_sweep(f, lambda1(2), sample_ball(2, 20, radius=0.8, seed=5))
    assert rep.max < 1e-5 and rep.order_ok


def test_envelope_constants_against_direct_formulas():
    K = 5.057
    c = envelope_constants(2, S, K)
    assert c.rate == pytest.approx(S - 0.5)
    assert c.K0 == pytest.approx(math.sqrt(8) * 2**S * K)
    q = 2 ** (S - 1)
    assert c.K1 == pytest.approx(c.K0 * q / (1 - q))
    deltas = np.geomspace(1e-12, 1 - 1e-12, 200001)
    assert c.M * K == pytest.approx(boundedness_envelope(deltas, c).max(), rel=1e-6)
    with pytest.raises(ValueError):
        envelope_constants(2, 0.4, K)


def test_shell_sums_partition_the_field():
    fld = field_at_level(K23, 10)
    x = 0.99 * embed_circle(fld.measure.nodes[17], 2)
    rows = shell_sums(x, fld)
    assert sum(r["signed"] for r in rows) == pytest.approx(u_eval(x, fld), rel=1e-12)
    assert sum(r["mass"] for r in rows) == pytest.approx(fld.measure.total_mass, rel=1e-12)
    assert 2 < rows[-1]["hi"] <= 4
    assert all(r["absolute"] <= r["bound"] for r in rows)


def ray_rows(level=10, dmin=1.0, dmax=8.0, count=25, antipode=False):
    fld = field_at_level(K23, level)
    x0 = embed_circle(widest_gap_center(K23), 2) if antipode else fld.measure.points[5]
    d = np.linspace(dmin, dmax, count)
    consts = envelope_constants(2, fld.s, fld.measure.regularity_K)
    return fld, ray_profile(x0, 2 / (1 + np.exp(d)), fld, on_set=not antipode), consts


def test_ray_profile_rows_and_envelopes():
    fld, rows, consts = ray_rows()
    assert [r.d for r in rows] == pytest.approx(np.linspace(1, 8, 25))
    assert all(r.warning == "" for r in rows)
    fitted = fit_envelopes(rows, consts)
    attach_envelopes(rows, fitted)
    assert fitted.M0 >= fitted.Mtilde > 0
    assert all(r.envelope_lo <= r.u <= r.envelope_hi for r in rows)
    origin = ray_profile(fld.measure.points[0], [1.0], fld)[0]
    assert origin.d == 0 and abs(origin.u) < 1e-14
    assert isinstance(decay_slope(rows), float)


def test_fit_rejects_bad_rays():
    _, rows, consts = ray_rows(antipode=True)
    fitted = fit_envelopes(rows, consts)
    assert fitted.Mtilde is None
    assert all(math.isnan(r.envelope_lo) for r in attach_envelopes(rows, fitted))
    for r in rows:
        r.on_set = True
    with pytest.raises(ValueError, match="non-positive"):
        fit_envelopes(rows, consts)
    with pytest.raises(ValueError):
        fit_envelopes(rows[:3], consts)


def test_coarse_rows_are_flagged():
    fld = field_at_level(K23, 6)
    rows = ray_profile(fld.measure.points[0], [0.1, 1e-4], fld)
    assert rows[0].warning == "" and "coarse" in rows[1].warning


def test_antipode_negative_and_node_positive():
    t = widest_gap_center(K23)
    for delta in (0.2, 0.1, 0.05, 0.01):
        fld = field_at_level(K23, auto_level(K23, delta))
        assert u_eval((1 - delta) * embed_circle(t, 2), fld) < 0
    fld = field_at_level(K23, 12)
    node = fld.measure.points[100]
    d2 = positivity_onset(node, fld)
    assert d2 is not None
    deltas = np.geomspace(1e-3, d2, 30)
    assert np.all(fld._sum((1 - deltas)[:, None] * node, absolute=False) > 0)


def test_positivity_scan_structure():
    fld = field_at_level(K23, 9)
    scan = positivity_scan(fld, [0.0, 0.6, 0.995], n_angles=180)
    assert np.all(scan.labels[0] == 0)
    c = scan.counts
    assert c["outer_pos_off_set"] == 0
    assert c["outer_neg_off_set"] > 0 and c["outer_pos_near_set"] > 0


def test_barrier_sum_properties():
    cal = calibrate_constants(3)
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((6, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    reps = [barrier_sum(pts[:k], 1e-3, calibration=cal) for k in range(1, 7)]
    totals = [r.total for r in reps]
    assert all(b > a for a, b in zip(totals, totals[1:]))
    assert all(th < cal.theta1 for _, th in reps[-1].coverings)
    assert reps[-1].openings_ok and reps[-1].sum_ok
    half = barrier_sum(pts, 5e-4, calibration=cal)
    assert half.bound == pytest.approx(reps[-1].bound / 2, rel=1e-12)
    empty = barrier_sum([], 1e-3, n=3, calibration=cal)
    assert empty.total == 0.0 and empty.coverings == []
    with pytest.raises(ValueError, match="theta1"):
        barrier_sum(pts[:1], 10.0, calibration=cal)
    d = reps[0].to_dict()
    assert d["openings_ok"] and len(d["values"]) == 1


def test_barrier_below_bottom_of_spectrum():
    rep = barrier_sum(np.eye(3)[:2], 1e-3, lam=0.5)
    assert rep.lam == 0.5 and rep.total <= rep.bound * 1.05


def test_product_measure_field():
    m = product_quadrature(ProductSpec(K23, 1, 0.2, grid=6), 6, n=4)
    fld = SuperpositionField(m)
    assert fld.s == pytest.approx(1 + S)
    assert quiet(u_eval, np.zeros(4), fld) == pytest.approx(0.0, abs=1e-14)
    assert isinstance(EnvelopeConstants(**envelope_constants(4, fld.s, 1.0).to_dict()), EnvelopeConstants)
