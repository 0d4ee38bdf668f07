import numpy as np
import pytest
from scipy.integrate import quad

import smoothlip as sl
from smoothlip.envelope import EnvelopeParams, lasry_lions
from smoothlip.errors import MarginError, ParameterError
from smoothlip.smooth import Mollifier, choose_radius, mollify


def field_1d(values, h, origin):
    values = np.asarray(values, dtype=float)
    grid = sl.TangentGrid(spacing=(h,), shape=(len(values),), origin=(origin,))
    return sl.GridField(grid=grid, values=values)


def random_lipschitz_field_1d(rng, n, h, K):
    slopes = rng.uniform(-K, K, size=n - 1)
    return field_1d(np.concatenate([[0.0], np.cumsum(slopes * h)]), h,
                    -(n - 1) * h / 2)


def test_kernel_invariants():
    for rho, spacing in ((0.1, (0.02,)), (0.25, (0.05, 0.05)), (0.01, (0.05,))):
        m = Mollifier(rho, spacing)
        assert abs(m.weights.sum() - 1.0) <= 1e-12
        assert np.all(m.weights >= 0)
        for axis in range(m.dim):
            assert np.allclose(m.weights, np.flip(m.weights, axis=axis),
                               atol=1e-15)
        # support strictly inside the radius
        if m.support_steps:
            assert m.support_steps * spacing[0] < rho


def test_subgrid_radius_degenerates_to_identity():
    m = Mollifier(0.01, (0.05,))
    assert m.weights.shape == (1,)
    assert m.weights[0] == 1.0
    fld = field_1d(np.random.default_rng(0).normal(size=20), 0.05, 0.0)
    out = mollify(fld, m)
    assert np.array_equal(out.values, fld.values)
    assert out.grid == fld.grid


def test_constant_reproduction():
    fld = field_1d(np.full(41, 2.5), 0.05, -1.0)
    out = mollify(fld, Mollifier(0.2, (0.05,)))
    assert np.max(np.abs(out.values - 2.5)) <= 1e-12


def test_affine_reproduction():
    rng = np.random.default_rng(1)
    for _ in range(5):
        a = rng.normal()
        b = rng.normal()
        x = np.linspace(-1, 1, 81)
        fld = field_1d(a * x + b, x[1] - x[0], -1.0)
        out = mollify(fld, Mollifier(0.15, fld.grid.spacing))
        xs = out.grid.axis_coords(0)
        assert np.max(np.abs(out.values - (a * xs + b))) <= 1e-12


def test_abs_at_origin_against_quadrature():
    # Continuum oracle: integral of |y| against the normalized bump.
    rho = 0.1
    h = 0.002
    x = np.arange(-500, 501) * h
    fld = field_1d(np.abs(x), h, x[0])
    out = mollify(fld, Mollifier(rho, (h,)))
    mid = out.grid.shape[0] // 2
    assert abs(out.grid.axis_coords(0)[mid]) < 1e-12
    val = out.values[mid]
    assert 0.0 < val <= rho
    mass, _ = quad(lambda t: np.exp(-1.0 / (1.0 - t * t)), -1, 1)
    oracle, _ = quad(lambda t: abs(t * rho) * np.exp(-1.0 / (1.0 - t * t)) / mass,
                     -1, 1)
    assert val == pytest.approx(oracle, abs=2 * h)
    assert sl.discrete_lipschitz(out) <= 1.0 + 1e-9


def test_lipschitz_nonexpansion_random_fields():
    rng = np.random.default_rng(3)
    for _ in range(20):
        K = float(rng.uniform(0.2, 4.0))
        fld = random_lipschitz_field_1d(rng, 101, 0.02, K)
        out = mollify(fld, Mollifier(float(rng.uniform(0.01, 0.3)), (0.02,)))
        assert sl.discrete_lipschitz(out) <= sl.discrete_lipschitz(fld) + 1e-9


def test_value_closeness_bound():
    rng = np.random.default_rng(4)
    h = 0.02
    for _ in range(10):
        K = float(rng.uniform(0.2, 2.0))
        rho = float(rng.uniform(0.05, 0.3))
        fld = random_lipschitz_field_1d(rng, 121, h, K)
        out = mollify(fld, Mollifier(rho, (h,)))
        steps = (fld.grid.shape[0] - out.grid.shape[0]) // 2
        diff = np.abs(out.values - fld.values[steps:fld.grid.shape[0] - steps])
        assert diff.max() <= K * rho + h * K + 1e-12


def test_gradient_closeness_on_envelope_outputs():
    # C^{1,1} proxy: mollification moves central-difference gradients of
    # a double-envelope output by at most rho * max(1/mu, 1/lambda) plus
    # one stencil step of the same curvature scale.
    rng = np.random.default_rng(5)
    h = 0.01
    lam, mu = 0.1, 0.05
    for _ in range(5):
        raw = random_lipschitz_field_1d(rng, 401, h, 1.0)
        fld = lasry_lions(raw, EnvelopeParams(lam, mu))
        rho = 0.04
        out = mollify(fld, Mollifier(rho, (h,)))
        steps = (fld.grid.shape[0] - out.grid.shape[0]) // 2
        curv = max(1.0 / mu, 1.0 / lam)
        for idx in range(1, out.grid.shape[0] - 1):
            g_out, _ = sl.discrete_gradient(out, (idx,))
            g_in, _ = sl.discrete_gradient(fld, (idx + steps,))
            assert abs(g_out[0] - g_in[0]) <= rho * curv + h * curv + 1e-9


def test_margin_errors():
    fld = field_1d(np.zeros(11), 0.1, 0.0)
    with pytest.raises(MarginError):
        mollify(fld, Mollifier(0.7, (0.1,)))  # reach 6 per side > 5 available
    with pytest.raises(MarginError):
        choose_radius(0.1, 1.0, margin=0.05, spacing=0.1)


def test_choose_radius_rules():
    assert choose_radius(0.01, 1.0, margin=0.5, spacing=0.001) == pytest.approx(0.01)
    # K = 0: cap wins, the error is zero regardless
    assert choose_radius(5.0, 0.0, margin=np.inf, spacing=0.001,
                         cap=1.0) == pytest.approx(1.0)
    # huge eps: never exceed the padding
    assert choose_radius(100.0, 1.0, margin=0.3, spacing=0.001) == pytest.approx(0.3)
    with pytest.raises(ParameterError):
        choose_radius(-1.0, 1.0, margin=0.5, spacing=0.001)
