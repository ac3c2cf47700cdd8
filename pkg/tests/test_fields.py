import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drolimit import (
    CompactWindow,
    Grid,
    InputError,
    ScalarField,
    gradient_fd,
    lipschitz_estimate,
    load_csv,
    save_csv,
    sup_distance,
)


def test_grid_nodes_exact():
    g = Grid.line(-8.0, 8.0, 513)
    assert g.dim == 1
    assert g.spacing[0] == pytest.approx(16.0 / 512)
    assert g.axes[0][0] == -8.0
    assert g.axes[0][-1] == 8.0
    assert g.axes[0][256] == 0.0


def test_grid_validation():
    with pytest.raises(InputError):
        Grid.line(1.0, -1.0, 64)
    with pytest.raises(InputError):
        Grid.line(0.0, 1.0, 4)
    with pytest.raises(InputError):
        Grid.box((0, 0, 0), (1, 1, 1), (16, 16, 16))


def test_eval_constant_field():
    g = Grid.line(-1.0, 1.0, 32)
    f = ScalarField.constant(g, 3.0)
    assert f.eval(0.37) == 3.0


def test_eval_node_hit_sin():
    g = Grid.line(-math.pi, math.pi, 513)
    f = ScalarField.from_function(g, np.sin)
    assert abs(f.eval(0.0)) <= 1e-12


def test_eval_clamp_outside_box():
    g = Grid.line(-math.pi, math.pi, 513)
    f = ScalarField.from_function(g, np.sin)
    # outside the box the boundary node value (sin(pi) ~ 1e-16) is returned
    assert f.eval(math.pi + 5.0) == f.values[-1]
    assert abs(f.eval(math.pi + 5.0)) <= 1e-12


def test_eval_reproduces_nodes_bitwise():
    rng = np.random.default_rng(0)
    g = Grid.line(-2.3, 1.7, 61)
    f = ScalarField(g, rng.standard_normal(g.shape))
    assert np.array_equal(f.eval(g.axes[0]), f.values)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-6, 0.5))
def test_eval_lipschitz_in_values(x, eps):
    g = Grid.line(-4.0, 4.0, 65)
    rng = np.random.default_rng(7)
    vals = rng.standard_normal(g.shape)
    f = ScalarField(g, vals)
    bumped = ScalarField(g, vals + eps)
    assert abs(bumped.eval(x) - f.eval(x)) <= eps + 1e-15


def test_sup_norm():
    g = Grid.line(-math.pi, math.pi, 257)
    cos = ScalarField.from_function(g, np.cos)
    assert cos.sup_norm() == pytest.approx(1.0)
    assert ScalarField.constant(g, -2.0).sup_norm() == 2.0
    g2 = Grid.line(-1.0, 1.0, 257)
    ident = ScalarField.from_function(g2, lambda x: x)
    w = CompactWindow((-0.5,), (0.5,))
    assert ident.sup_norm(w) == pytest.approx(0.5, abs=g2.spacing[0])


def test_window_margin_enforced():
    g = Grid.line(-8.0, 8.0, 65)
    with pytest.raises(InputError):
        CompactWindow((-7.5,), (7.5,)).mask(g)
    CompactWindow((-4.0,), (4.0,)).mask(g)  # fine


def test_gradient_fd():
    g = Grid.line(-2.0, 2.0, 513)
    const = ScalarField.constant(g, 1.0)
    assert gradient_fd(const)[0].sup_norm() == 0.0
    affine = ScalarField.from_function(g, lambda x: 2.0 * x)
    interior = gradient_fd(affine)[0].values[1:-1]
    assert np.allclose(interior, 2.0, atol=1e-12)
    sin = ScalarField.from_function(Grid.line(-math.pi, math.pi, 2049), np.sin)
    at0 = gradient_fd(sin)[0].eval(0.0)
    assert at0 == pytest.approx(1.0, abs=1e-5)


def test_gradient_fd_kink_away_from_node():
    g = Grid.line(-1.0, 1.0, 513)
    f = ScalarField.from_function(g, np.abs)
    d = gradient_fd(f)[0]
    assert d.eval(0.5) == pytest.approx(1.0, abs=1e-6)


def test_lipschitz_estimate():
    g = Grid.line(-1.0, 1.0, 257)
    assert lipschitz_estimate(ScalarField.constant(g, 4.0)) == 0.0
    assert lipschitz_estimate(ScalarField.from_function(g, lambda x: 2.0 * x)) == pytest.approx(2.0)
    gs = Grid.line(-math.pi, math.pi, 4097)
    assert lipschitz_estimate(ScalarField.from_function(gs, np.sin)) == pytest.approx(1.0, abs=1e-5)


def test_sup_distance_zero_iff_equal():
    g = Grid.line(0.0, 1.0, 16)
    rng = np.random.default_rng(1)
    a = ScalarField(g, rng.standard_normal(g.shape))
    b = ScalarField(g, a.values.copy())
    assert sup_distance(a, b) == 0.0
    c = ScalarField(g, a.values + 1e-12)
    assert sup_distance(a, c) > 0.0


def test_csv_roundtrip_1d(tmp_path):
    g = Grid.line(-1.0, 1.0, 33)
    f = ScalarField.from_function(g, np.tanh)
    path = tmp_path / "field.csv"
    save_csv(f, path)
    back = load_csv(path)
    assert back.grid.n == g.n
    assert np.allclose(back.values, f.values, atol=0, rtol=0)


def test_csv_roundtrip_2d(tmp_path):
    g = Grid.box((-1.0, 0.0), (1.0, 2.0), (9, 11))
    f = ScalarField.from_function(g, lambda x, y: x * y)
    path = tmp_path / "field2.csv"
    save_csv(f, path)
    back = load_csv(path)
    assert back.grid.n == g.n
    assert np.allclose(back.values, f.values)


def test_bilinear_affine_exact_and_clamped():
    g = Grid.box((-2.0, -3.0), (2.0, 3.0), (16, 24))
    f = ScalarField.from_function(g, lambda x, y: 1.5 * x - 0.7 * y + 0.2)
    rng = np.random.default_rng(3)
    pts = rng.uniform((-2, -3), (2, 3), size=(100, 2))
    assert np.max(np.abs(f.eval(pts) - (1.5 * pts[:, 0] - 0.7 * pts[:, 1] + 0.2))) < 1e-12
    # clamped corner
    assert f.eval(np.array([10.0, 10.0])) == pytest.approx(f.values[-1, -1])
    # node exactness
    nodes = g.nodes()
    assert np.array_equal(f.eval(nodes).reshape(g.shape), f.values)


def test_nonfinite_rejected():
    g = Grid.line(0.0, 1.0, 16)
    with pytest.raises(InputError):
        ScalarField(g, np.full(g.shape, np.nan))
    f = ScalarField.constant(g, 1.0)
    with pytest.raises(InputError):
        f.eval(np.nan)
