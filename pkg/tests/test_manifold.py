import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

import smoothlip as sl
from smoothlip.errors import (CoverFailureError, DomainError, OutOfChartError)
from smoothlip.manifold import quasi_ball_sample, sample_pairs_near

MODELS = {
    "euclidean": sl.Euclidean(2, box=[(-1, 1), (-1, 1)]),
    "sphere": sl.Sphere(1.0),
    "torus": sl.FlatTorus([2 * math.pi, 2 * math.pi]),
    "disk": sl.PoincareDisk(1.0),
}


def random_points(model, n, rng):
    return model.sample_region(n, rng, quasi=False)


# ---------------------------------------------------------------------------
# geodesic_distance
# ---------------------------------------------------------------------------

def test_euclidean_pythagoras():
    m = sl.Euclidean(2, box=[(-5, 5), (-5, 5)])
    assert sl.geodesic_distance(m, sl.Point((0, 0)), sl.Point((3, 4))) == pytest.approx(5.0, abs=1e-14)


def test_sphere_antipodal():
    m = sl.Sphere(1.0)
    d = sl.geodesic_distance(m, sl.Point((0.0, 0.0)), sl.Point((math.pi, 0.0)))
    assert d == pytest.approx(math.pi, abs=1e-14)


def test_poincare_radial_against_quadrature():
    # Oracle: integrate the conformal factor 2/(1-t^2) along the radius.
    oracle, err = quad(lambda t: 2.0 / (1.0 - t * t), 0.0, 0.5)
    assert err < 1e-12
    m = sl.PoincareDisk(1.0)
    d = sl.geodesic_distance(m, sl.Point((0.0, 0.0)), sl.Point((0.5, 0.0)))
    assert d == pytest.approx(oracle, abs=1e-12)
    assert d == pytest.approx(1.0986122886681098, abs=1e-12)


def test_invalid_coordinates_raise():
    with pytest.raises(DomainError):
        sl.geodesic_distance(sl.PoincareDisk(1.0), sl.Point((1.5, 0.0)),
                             sl.Point((0.0, 0.0)))
    with pytest.raises(DomainError):
        sl.geodesic_distance(sl.Sphere(1.0), sl.Point((4.0, 0.0)),
                             sl.Point((0.0, 0.0)))
    with pytest.raises(DomainError):
        sl.Euclidean(2).validate(np.array([[np.nan, 0.0]]))


@pytest.mark.parametrize("name", sorted(MODELS))
def test_distance_symmetry_and_triangle(name):
    model = MODELS[name]
    rng = np.random.default_rng(7)
    p = random_points(model, 1000, rng)
    q = random_points(model, 1000, rng)
    s = random_points(model, 1000, rng)
    dpq = model.distance(p, q)
    dqp = model.distance(q, p)
    assert np.max(np.abs(dpq - dqp)) <= 1e-12
    viol = dpq - (model.distance(p, s) + model.distance(s, q))
    assert np.max(viol) <= 1e-9


# ---------------------------------------------------------------------------
# exp / log
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(MODELS))
def test_exp_log_roundtrip(name):
    model = MODELS[name]
    rng = np.random.default_rng(11)
    centers = random_points(model, 200, rng)
    delta = sl.chart_radius(model, centers[0], 0.05)
    v = rng.normal(size=(200, model.dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    v *= rng.uniform(0, 3 * delta * 0.999, size=(200, 1))
    for i in range(0, 200, 50):
        chart = sl.Chart(model=model, center=sl.Point(tuple(centers[i])),
                         radius=delta, distortion=1.05)
        pts = sl.exp_map(chart, v)
        back = sl.log_map(chart, pts)
        assert np.max(np.abs(back - v)) < 1e-8


def test_exp_zero_is_center():
    for model in MODELS.values():
        rng = np.random.default_rng(3)
        c = random_points(model, 1, rng)[0]
        chart = sl.Chart(model=model, center=sl.Point(tuple(c)),
                         radius=0.1, distortion=1.05)
        p = sl.exp_map(chart, np.zeros(model.dim))
        assert sl.geodesic_distance(model, p, sl.Point(tuple(c))) < 1e-12


def test_euclidean_exp_is_translation():
    m = sl.Euclidean(2)
    chart = sl.Chart(model=m, center=sl.Point((0.25, -0.5)), radius=1.0,
                     distortion=1.0)
    p = sl.exp_map(chart, np.array([0.1, 0.2]))
    assert np.allclose(p.array, [0.35, -0.3], atol=1e-15)


def test_sphere_meridian_quarter_turn():
    # Tangent vector of norm pi/2 at the north pole lands on the equator.
    m = sl.Sphere(1.0)
    chart = sl.Chart(model=m, center=sl.Point((0.0, 0.0)),
                     radius=math.pi / 4, distortion=1.2)
    p = sl.exp_map(chart, np.array([math.pi / 2, 0.0]))
    d = sl.geodesic_distance(m, p, sl.Point((0.0, 0.0)))
    assert d == pytest.approx(math.pi / 2, abs=1e-12)
    assert p.coords[0] == pytest.approx(math.pi / 2, abs=1e-12)


def test_out_of_chart_errors():
    m = sl.Euclidean(1)
    chart = sl.Chart(model=m, center=sl.Point((0.0,)), radius=0.1,
                     distortion=1.0)
    with pytest.raises(OutOfChartError):
        sl.exp_map(chart, np.array([0.5]))
    with pytest.raises(OutOfChartError):
        sl.log_map(chart, sl.Point((2.0,)))


def test_radial_isometry_log_norm_is_distance():
    # Gauss lemma in closed form: ||log_p(q)|| = d(p, q).
    rng = np.random.default_rng(5)
    for model in MODELS.values():
        c = random_points(model, 1, rng)[0]
        q = model.ball_sample(c, 0.4, 100, rng)
        logs = model.log(c, q)
        d = model.distance(c[None, :], q)
        assert np.max(np.abs(np.linalg.norm(logs, axis=1) - d)) < 1e-10


# ---------------------------------------------------------------------------
# chart_radius and distortion
# ---------------------------------------------------------------------------

def test_chart_radius_euclidean_is_cap():
    m = sl.Euclidean(2)
    assert sl.chart_radius(m, sl.Point((0, 0)), 0.05) == pytest.approx(1.0)
    assert sl.chart_radius(m, sl.Point((0, 0)), 0.05, cap=0.3) == pytest.approx(0.3)


def test_chart_radius_sphere_bisection_oracle():
    # Oracle: solve rho/sin(rho) = 1.05 by bisection on the closed form.
    lo, hi = 1e-9, math.pi - 1e-9
    for _ in range(200):
        mid = (lo + hi) / 2
        if mid / math.sin(mid) <= 1.05:
            lo = mid
        else:
            hi = mid
    rho_star = lo
    m = sl.Sphere(1.0)
    delta = sl.chart_radius(m, sl.Point((1.0, 1.0)), 0.05)
    assert 3 * delta == pytest.approx(rho_star, abs=1e-9)


def test_chart_radius_torus_wrap():
    m = sl.FlatTorus([2 * math.pi, 2 * math.pi])
    # distortion is 1 below the wrap, so only the injectivity cap binds
    delta = sl.chart_radius(m, sl.Point((0.0, 0.0)), 100.0)
    assert 3 * delta == pytest.approx(math.pi, rel=1e-9)
    # wrap-distance oracle: points straddling the seam
    d = sl.geodesic_distance(m, sl.Point((0.1, 0.0)),
                             sl.Point((2 * math.pi - 0.1, 0.0)))
    assert d == pytest.approx(0.2, abs=1e-12)


def test_chart_radius_disk_inverts_sinh():
    m = sl.PoincareDisk(1.0)
    delta = sl.chart_radius(m, sl.Point((0.0, 0.0)), 0.05, cap=10.0)
    rho = 3 * delta
    assert math.sinh(rho) / rho == pytest.approx(1.05, abs=1e-10)


@pytest.mark.parametrize("name", ["sphere", "disk"])
def test_chart_bilipschitz_invariant(name):
    # 200 random tangent pairs per chart: two-sided distortion bound.
    model = MODELS[name]
    rng = np.random.default_rng(13)
    eps_prime = 0.05
    for trial in range(5):
        c = random_points(model, 1, rng)[0]
        delta = sl.chart_radius(model, c, eps_prime)
        r = 3 * delta * np.sqrt(rng.uniform(size=(200, 1)))
        ang = rng.uniform(0, 2 * math.pi, size=(200, 1))
        u = np.hstack([r * np.cos(ang), r * np.sin(ang)])
        v = np.roll(u, 1, axis=0)
        pu = model.exp(c, u)
        pv = model.exp(c, v)
        d = model.distance(pu, pv)
        en = np.linalg.norm(u - v, axis=1)
        ok = en > 1e-12
        ratio = d[ok] / en[ok]
        assert np.max(ratio) <= (1 + eps_prime) * (1 + 1e-9)
        assert np.min(ratio) >= 1.0 / (1 + eps_prime) * (1 - 1e-9)


# ---------------------------------------------------------------------------
# build_cover
# ---------------------------------------------------------------------------

def _const(c):
    return lambda pts: np.full(len(np.atleast_2d(pts)), float(c))


def test_cover_empty_region():
    atlas = sl.build_cover(sl.Euclidean(1), np.empty((0, 1)), 0.05,
                           _const(0.0), _const(1.0))
    assert len(atlas) == 0


def test_cover_single_point():
    atlas = sl.build_cover(sl.Euclidean(1), np.array([[0.3]]), 0.05,
                           _const(0.0), _const(1.0))
    assert len(atlas) == 1
    assert atlas.charts[0].center.coords == (0.3,)


def test_cover_box_coverage_predicate():
    m = sl.Euclidean(2, box=[(0, 1), (0, 1)])
    region = m.sample_region(900, quasi=True)
    atlas = sl.build_cover(m, region, 0.05, _const(0.0), _const(1.0), cap=0.2)
    centers = atlas.centers
    radii = atlas.radii
    d = np.stack([m.distance(c[None, :], region) for c in centers])
    assert np.all((d <= radii[:, None]).any(axis=0))
    # greedy determinism: same input, same cover
    atlas2 = sl.build_cover(m, region, 0.05, _const(0.0), _const(1.0), cap=0.2)
    assert np.array_equal(atlas2.centers, centers)


def test_cover_sphere_invariant_sweep():
    m = sl.Sphere(1.0)
    region = m.sample_region(5000, quasi=True)
    atlas = sl.build_cover(m, region, 0.05, _const(0.0), _const(1.0))
    centers = atlas.centers
    radii = atlas.radii
    d = np.stack([m.distance(c[None, :], region) for c in centers])
    assert np.all((d <= radii[:, None]).any(axis=0))
    # all charts share the distortion-limited radius on a homogeneous model
    assert np.allclose(radii, radii[0])
    assert m.distortion(3 * radii[0]) <= 1.05 + 1e-12


def test_cover_oscillation_conditions_hold():
    # Gentle scenario: slowly varying f, generous eps; conditions hold on
    # the sample without collapsing delta.
    m = sl.Euclidean(1, box=[(-1, 1)])
    region = np.linspace(-1, 1, 401)[:, None]
    f = sl.FunctionOracle.ramp(m, [0.0], slope=0.1)
    eps = _const(0.5)
    atlas = sl.build_cover(m, region, 0.05, f, eps, cap=0.5)
    f_vals = f(region)
    for chart, eps_c in zip(atlas.charts, atlas.eps_values):
        d = m.distance(chart.center_array[None, :], region)
        ball = d <= 3 * chart.radius
        f_c = f(chart.center_array[None, :])[0]
        assert np.all(np.abs(f_vals[ball] - f_c) <= eps_c / 2 + 1e-12)


def test_cover_oscillation_shrinks_delta():
    # Steep f forces halving: 3*delta must fall to ~eps/(2K).
    m = sl.Euclidean(1, box=[(-1, 1)])
    region = np.linspace(-1, 1, 801)[:, None]
    f = sl.FunctionOracle.distance_to_point(m, [0.0])
    atlas = sl.build_cover(m, region, 0.05, f, _const(0.2), cap=1.0)
    assert all(3 * c.radius <= 0.2 for c in atlas.charts)


def test_cover_failure_below_floor():
    # The floor sits above the sample spacing, so the oscillation check
    # always sees violating neighbors and halving must hit the floor.
    m = sl.Euclidean(1, box=[(-1, 1)])
    region = np.linspace(-1, 1, 801)[:, None]
    f = sl.FunctionOracle.ramp(m, [0.0], slope=1e7)
    with pytest.raises(CoverFailureError):
        sl.build_cover(m, region, 0.05, f, _const(1e-3), delta_floor=0.01)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def test_quasi_ball_sample_fill():
    m = sl.Sphere(1.0)
    c = np.array([1.0, 1.0])
    pts = quasi_ball_sample(m, c, 0.4, target_fill=0.04)
    rng = np.random.default_rng(0)
    probes = m.ball_sample(c, 0.4, 2000, rng)
    d = np.stack([m.distance(p[None, :], probes) for p in pts])
    assert np.max(d.min(axis=0)) <= 0.04


def test_sample_pairs_floor_and_keep():
    m = sl.Euclidean(1, box=[(-1, 1)])
    rng = np.random.default_rng(0)
    anchors = np.zeros((10, 1))
    keep = lambda pts: np.abs(pts[:, 0]) <= 0.5
    P, Q, d = sample_pairs_near(m, anchors, 0.5, 200, rng, floor=0.01, keep=keep)
    assert np.all(d >= 0.01)
    assert np.all(np.abs(P[:, 0]) <= 0.5) and np.all(np.abs(Q[:, 0]) <= 0.5)
