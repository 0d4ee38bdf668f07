import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import smoothlip as sl
from smoothlip.errors import (DomainError, EstimationError, OutOfChartError,
                              OutOfDomainError)
from smoothlip.field import write_field_csv


def grid_1d(n=11, h=0.1, origin=-0.5):
    return sl.TangentGrid(spacing=(h,), shape=(n,), origin=(origin,))


def make_field(values, h=0.1):
    values = np.asarray(values, dtype=float)
    grid = sl.TangentGrid(spacing=(h,) * values.ndim, shape=values.shape,
                          origin=(0.0,) * values.ndim)
    return sl.GridField(grid=grid, values=values)


# ---------------------------------------------------------------------------
# construction invariants
# ---------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(DomainError):
        sl.TangentGrid(spacing=(0.0,), shape=(4,), origin=(0.0,))
    with pytest.raises(DomainError):
        sl.TangentGrid(spacing=(0.1, 0.1), shape=(4,), origin=(0.0, 0.0))
    with pytest.raises(DomainError):
        sl.TangentGrid(spacing=(0.1,) * 3, shape=(300, 300, 300),
                       origin=(0.0,) * 3)  # node cap


def test_field_validation():
    grid = grid_1d(5)
    with pytest.raises(DomainError):
        sl.GridField(grid=grid, values=np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        sl.GridField(grid=grid, values=np.array([1, 2, np.inf, 4, 5.0]))
    fld = sl.GridField(grid=grid, values=np.arange(5.0))
    with pytest.raises(ValueError):
        fld.values[0] = 3.0  # immutable


# ---------------------------------------------------------------------------
# sample_to_grid
# ---------------------------------------------------------------------------

def test_sample_constant_oracle():
    m = sl.Euclidean(2)
    chart = sl.Chart(model=m, center=sl.Point((0.0, 0.0)), radius=1.0,
                     distortion=1.0)
    grid = sl.TangentGrid.cube(1.0, 9, 2)
    fld = sl.sample_to_grid(sl.FunctionOracle.constant(3.5), chart, grid)
    assert np.all(fld.values == 3.5)


def test_sample_distance_on_euclidean_chart_is_node_norm():
    m = sl.Euclidean(2)
    center = sl.Point((0.2, -0.1))
    chart = sl.Chart(model=m, center=center, radius=1.0, distortion=1.0)
    grid = sl.TangentGrid.cube(1.0, 17, 2)
    fld = sl.sample_to_grid(sl.FunctionOracle.distance_to_point(m, center.array),
                            chart, grid)
    assert np.allclose(fld.values, fld.node_norms(), atol=1e-12)


def test_sample_distance_on_sphere_polar():
    # Geodesic polar coordinates: f = d(., north pole) pulled back at the
    # north pole equals the tangent norm; cross-check both computations.
    m = sl.Sphere(1.0)
    pole = sl.Point((0.0, 0.0))
    delta = 0.4
    chart = sl.Chart(model=m, center=pole, radius=delta, distortion=1.1)
    grid = sl.TangentGrid.cube(3 * delta / math.sqrt(2), 17, 2)
    fld = sl.sample_to_grid(sl.FunctionOracle.distance_to_point(m, pole.array),
                            chart, grid)
    assert np.allclose(fld.values, fld.node_norms(), atol=1e-10)
    pts = m.exp(pole.array, grid.nodes())
    d = m.distance(pole.array[None, :], pts)
    assert np.allclose(fld.values.ravel(), d, atol=1e-12)


def test_sample_outside_chart_raises():
    m = sl.Euclidean(2)
    chart = sl.Chart(model=m, center=sl.Point((0.0, 0.0)), radius=0.1,
                     distortion=1.0)
    with pytest.raises(OutOfChartError):
        sl.sample_to_grid(sl.FunctionOracle.constant(0.0), chart,
                          sl.TangentGrid.cube(1.0, 9, 2))


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

def test_interpolate_exact_at_nodes():
    rng = np.random.default_rng(0)
    fld = make_field(rng.normal(size=(7, 7)))
    nodes = fld.grid.nodes()
    assert np.allclose(sl.interpolate(fld, nodes), fld.values.ravel(),
                       atol=1e-14)


def test_interpolate_midpoint():
    fld = make_field([0.0, 1.0])
    assert sl.interpolate(fld, np.array([0.05])) == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=30, deadline=None, derandomize=True)
@given(st.integers(1, 3), st.integers(0, 10_000))
def test_interpolate_affine_reproduction(dim, seed):
    rng = np.random.default_rng(seed)
    n = 6
    grid = sl.TangentGrid(spacing=(0.2,) * dim, shape=(n,) * dim,
                          origin=(-0.6,) * dim)
    a = rng.normal(size=dim)
    b = rng.normal()
    vals = (grid.nodes() @ a + b).reshape(grid.shape)
    fld = sl.GridField(grid=grid, values=vals)
    x = rng.uniform(-0.55, 0.35, size=(50, dim))
    assert np.max(np.abs(sl.interpolate(fld, x) - (x @ a + b))) <= 1e-12


def test_interpolate_outside_hull_raises():
    fld = make_field([0.0, 1.0, 2.0])
    with pytest.raises(OutOfDomainError):
        sl.interpolate(fld, np.array([0.5]))


def test_interpolate_axiswise_nonexpansion():
    # Pairs along one axis: the interpolant's slope never beats the
    # axis-adjacent node estimate.
    rng = np.random.default_rng(4)
    fld = make_field(rng.normal(size=(9, 9)))
    L = sl.discrete_lipschitz(fld)
    for axis in range(2):
        x = rng.uniform(0.0, 0.8, size=(200, 2))
        t = rng.uniform(0.01, 0.2, size=200)
        y = x.copy()
        y[:, axis] = np.minimum(y[:, axis] + t, 0.8)
        vx = sl.interpolate(fld, x)
        vy = sl.interpolate(fld, y)
        sep = np.abs(y[:, axis] - x[:, axis])
        ok = sep > 1e-9
        assert np.max(np.abs(vy[ok] - vx[ok]) / sep[ok]) <= L + 1e-9


# ---------------------------------------------------------------------------
# Lipschitz estimators
# ---------------------------------------------------------------------------

def test_discrete_lipschitz_constant_field():
    assert sl.discrete_lipschitz(make_field(np.full((5, 5), 2.0))) == 0.0


def test_discrete_lipschitz_linear_slope():
    x = np.linspace(0, 1, 11)
    fld = make_field(2 * x, h=0.1)
    assert sl.discrete_lipschitz(fld) == pytest.approx(2.0, abs=1e-12)


def test_discrete_lipschitz_manifold_sphere_distance():
    m = sl.Sphere(1.0)
    rng = np.random.default_rng(17)
    p = m.sample_region(10_000, rng, quasi=False)
    q = m.sample_region(10_000, rng, quasi=False)
    anchor = np.array([0.7, 0.3])
    f = sl.FunctionOracle.distance_to_point(m, anchor)
    est = sl.discrete_lipschitz_manifold(f(p), f(q), m.distance(p, q))
    assert 0.99 <= est <= 1.0 + 1e-12


def test_discrete_lipschitz_manifold_degenerate():
    with pytest.raises(EstimationError):
        sl.discrete_lipschitz_manifold([1.0], [2.0], [0.0])
    est = sl.discrete_lipschitz_manifold([1.0, 1.0], [2.0, 1.5], [0.0, 0.5])
    assert est == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# differences
# ---------------------------------------------------------------------------

def test_gradient_affine_exact():
    grid = sl.TangentGrid(spacing=(0.1, 0.2), shape=(7, 7), origin=(0.0, 0.0))
    a = np.array([1.5, -2.0])
    fld = sl.GridField(grid=grid, values=(grid.nodes() @ a).reshape(7, 7))
    g, flags = sl.discrete_gradient(fld, (3, 3))
    assert np.allclose(g, a, atol=1e-12)
    assert not flags.any()


def test_gradient_boundary_flagged():
    fld = make_field(np.linspace(0, 1, 5) ** 2)
    g, flags = sl.discrete_gradient(fld, (0,))
    assert flags[0]


def test_second_difference_quadratic():
    x = np.linspace(-1, 1, 21)
    fld = make_field(x ** 2 / 2, h=0.1)
    val, flagged = sl.discrete_second_difference(fld, (10,), 0)
    assert val == pytest.approx(1.0, abs=1e-10)
    assert not flagged


def test_second_difference_abs_kink():
    h = 0.05
    x = np.arange(-5, 6) * h
    fld = make_field(np.abs(x), h=h)
    val, flagged = sl.discrete_second_difference(fld, (5,), 0)
    assert val == pytest.approx(2.0 / h, abs=1e-9)
    assert not flagged


def test_second_difference_boundary_shift_flagged():
    fld = make_field(np.linspace(0, 1, 5) ** 2)
    val, flagged = sl.discrete_second_difference(fld, (0,), 0)
    assert flagged


# ---------------------------------------------------------------------------
# round trips and CSV
# ---------------------------------------------------------------------------

def test_sample_then_interpolate_identity():
    m = sl.Euclidean(2)
    chart = sl.Chart(model=m, center=sl.Point((0.0, 0.0)), radius=1.0,
                     distortion=1.0)
    grid = sl.TangentGrid.cube(0.9, 9, 2)
    f = sl.FunctionOracle.distance_to_point(m, [0.3, 0.1])
    fld = sl.sample_to_grid(f, chart, grid)
    assert np.allclose(sl.interpolate(fld, grid.nodes()),
                       fld.values.ravel(), atol=1e-14)


def test_csv_format_and_determinism(tmp_path):
    rng = np.random.default_rng(1)
    fld = make_field(rng.normal(size=(3, 4)))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_field_csv(fld, p1)
    write_field_csv(fld, p2)
    text = p1.read_text()
    assert text == p2.read_text()
    lines = text.strip().split("\n")
    assert lines[0] == "axis0,axis1,value"
    assert len(lines) == 1 + 12
    # lexicographic node order, values parse back exactly
    vals = np.array([float(l.split(",")[2]) for l in lines[1:]])
    assert np.array_equal(vals, fld.values.ravel())
