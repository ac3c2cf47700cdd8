import math

import numpy as np
import pytest

from drolimit import (
    Action,
    AmbiguitySpec,
    CompactWindow,
    ConfigError,
    Grid,
    OperatorConfig,
    ORNSTEIN_UHLENBECK,
    PdeScheme,
    ReferenceModel,
    ScalarField,
    brownian_model,
    cfl_time_step,
    generator_apply,
    solve,
    solve_terminal,
    step_forward,
    sup_distance,
)
from drolimit.validation import named_field, normal_cdf


@pytest.fixture(scope="module")
def grid():
    return Grid.line(-8.0, 8.0, 513)


@pytest.fixture(scope="module")
def window():
    return CompactWindow((-4.0,), (4.0,))


def cfg_for(grid, m=0.5, drifts=((0.0,),), sigma=1.0):
    return OperatorConfig(
        model=brownian_model([list(b) for b in drifts], [[sigma]]),
        ambiguity=AmbiguitySpec(m=m),
        grid=grid,
    )


def test_cfl_bound_formula(grid):
    cfg = cfg_for(grid, m=0.5, drifts=((0.3,),), sigma=1.0)
    h = grid.spacing[0]
    expect = 0.8 / (1.0 / h ** 2 + (0.3 + 0.5) / h)
    assert cfl_time_step(cfg, PdeScheme(cfl_safety=0.8)) == pytest.approx(expect)


def test_cfl_violation_rejected(grid):
    cfg = cfg_for(grid)
    v = named_field(grid, "cos")
    with pytest.raises(ConfigError):
        step_forward(cfg, PdeScheme(), v, dt=1.0)


def test_zero_generator_leaves_field(grid):
    cfg = cfg_for(grid, m=0.0, drifts=((0.0,),), sigma=0.0)
    v = named_field(grid, "tanh")
    out = step_forward(cfg, PdeScheme(), v, dt=0.01)
    assert np.array_equal(out.values, v.values)


def test_affine_gradient_source(grid):
    # v = c x, sigma = 0, b = 0, m = 1: interior update is v + dt |c|
    cfg = cfg_for(grid, m=1.0, sigma=0.0)
    c = -1.7
    v = ScalarField.from_function(grid, lambda x: c * x)
    dt = 0.5 * cfl_time_step(cfg, PdeScheme())
    out = step_forward(cfg, PdeScheme(), v, dt=dt)
    interior = slice(1, -1)
    assert np.allclose(out.values[interior], v.values[interior] + dt * abs(c), atol=1e-12)


def test_constant_preserved(grid):
    cfg = cfg_for(grid, m=0.7)
    v = ScalarField.constant(grid, 3.3)
    out = step_forward(cfg, PdeScheme(), v)
    assert np.allclose(out.values, 3.3, atol=1e-14)


def test_step_monotone_in_data(grid):
    rng = np.random.default_rng(0)
    cfg = cfg_for(grid, m=0.5, drifts=((0.4,),))
    dt = cfl_time_step(cfg, PdeScheme())
    for _ in range(20):
        u = rng.standard_normal(grid.shape)
        v = u + rng.random(grid.shape)
        su = step_forward(cfg, PdeScheme(), ScalarField(grid, u), dt=dt)
        sv = step_forward(cfg, PdeScheme(), ScalarField(grid, v), dt=dt)
        assert np.all(su.values <= sv.values + 1e-12)


def test_step_nonexpansive_linear_case(grid):
    rng = np.random.default_rng(1)
    cfg = cfg_for(grid, m=0.0, drifts=((0.4,),))
    dt = cfl_time_step(cfg, PdeScheme())
    for _ in range(10):
        u = rng.standard_normal(grid.shape)
        v = rng.standard_normal(grid.shape)
        su = step_forward(cfg, PdeScheme(), ScalarField(grid, u), dt=dt)
        sv = step_forward(cfg, PdeScheme(), ScalarField(grid, v), dt=dt)
        assert np.max(np.abs(su.values - sv.values)) <= np.max(np.abs(u - v)) + 1e-12


def test_gradient_source_nonnegative(grid):
    cfg = cfg_for(grid, m=0.8, sigma=0.0)
    rng = np.random.default_rng(2)
    v = rng.standard_normal(grid.shape)
    out = step_forward(cfg, PdeScheme(), ScalarField(grid, v))
    assert np.all(out.values >= v - 1e-14)


def test_generator_apply_values(grid):
    cfg = cfg_for(grid, m=0.5)
    f = named_field(grid, "cos")
    gen = generator_apply(cfg, f)
    # at 0: -1/2 cos(0) + m |sin(0)| = -1/2 ; at pi/2: 0 + 0.5
    assert gen.eval(0.0) == pytest.approx(-0.5, abs=1e-3)
    assert gen.eval(math.pi / 2) == pytest.approx(0.5, abs=1e-3)
    const = ScalarField.constant(grid, 2.0)
    assert generator_apply(cfg, const).sup_norm() == 0.0


def test_generator_apply_ou_drift(grid):
    model = ReferenceModel(
        ORNSTEIN_UHLENBECK,
        [Action("a0", sigma=np.array([[1.0]]), theta=np.array([[0.7]]), kappa=np.array([0.2]))],
    )
    cfg = OperatorConfig(model=model, ambiguity=AmbiguitySpec(m=0.0), grid=grid)
    f = named_field(grid, "cos")
    gen = generator_apply(cfg, f)
    x = 1.5
    expect = -0.5 * math.cos(x) + (-0.7 * x + 0.2) * (-math.sin(x))
    assert gen.eval(x) == pytest.approx(expect, abs=2e-3)


def test_step_consistent_with_generator(grid, window):
    cfg = cfg_for(grid, m=0.5, drifts=((0.3,),))
    f = named_field(grid, "cos")
    dt = cfl_time_step(cfg, PdeScheme())
    quotient = (step_forward(cfg, PdeScheme(), f, dt=dt).values - f.values) / dt
    gen = generator_apply(cfg, f).values
    mask = window.mask(grid)
    # upwind versus central differences: first order in the spacing
    assert np.max(np.abs(quotient - gen)[mask]) <= 5 * grid.spacing[0]


def test_solve_heat_anchor(grid, window):
    cfg = cfg_for(grid, m=0.0)
    u0 = named_field(grid, "cos")
    run = solve(cfg, PdeScheme(), u0, 0.5, snapshot_times=[0.0, 0.25, 0.5])
    assert run.times == [0.0, 0.25, 0.5]
    ref = ScalarField.from_function(grid, lambda x: math.exp(-0.25) * np.cos(x))
    assert sup_distance(run.at(0.5), ref, window) <= 5e-3
    const = solve(cfg, PdeScheme(), ScalarField.constant(grid, 1.5), 0.4)
    assert np.allclose(const.at(0.4).values, 1.5, atol=1e-12)


def test_solve_cdf_anchor(grid, window):
    cfg = cfg_for(grid, m=0.5)
    u0 = named_field(grid, "normal_cdf")
    run = solve(cfg, PdeScheme(), u0, 1.0)
    ref = ScalarField.from_function(grid, lambda x: normal_cdf((x + 0.5) / math.sqrt(2.0)))
    assert sup_distance(run.at(1.0), ref, window) <= 1e-2


def test_terminal_solve_is_time_reversed(grid):
    cfg = cfg_for(grid, m=0.3)
    h = named_field(grid, "tanh")
    fwd = solve(cfg, PdeScheme(), h, 0.4)
    bwd = solve_terminal(cfg, PdeScheme(), h, 0.4)
    assert bwd.times[0] == 0.0 and bwd.times[-1] == 0.4
    assert np.array_equal(bwd.at(0.0).values, fwd.at(0.4).values)
    assert np.array_equal(bwd.at(0.4).values, h.values)


def test_2d_requires_diagonal_diffusion():
    g2 = Grid.box((-4.0, -4.0), (4.0, 4.0), (33, 33))
    sigma = np.array([[1.0, 0.5], [0.0, 1.0]])
    model = brownian_model([[0.0, 0.0]], sigma, dim=2)
    cfg = OperatorConfig(model=model, ambiguity=AmbiguitySpec(m=0.1), grid=g2)
    with pytest.raises(ConfigError):
        cfl_time_step(cfg, PdeScheme())


def test_2d_heat_smoke():
    g2 = Grid.box((-6.0, -6.0), (6.0, 6.0), (49, 49))
    model = brownian_model([[0.0, 0.0]], np.eye(2), dim=2)
    cfg = OperatorConfig(model=model, ambiguity=AmbiguitySpec(m=0.0), grid=g2)
    u0 = ScalarField.from_function(g2, lambda x, y: np.cos(x) * np.cos(y))
    run = solve(cfg, PdeScheme(), u0, 0.25)
    ref = ScalarField.from_function(g2, lambda x, y: math.exp(-0.25) * np.cos(x) * np.cos(y))
    w2 = CompactWindow((-2.0, -2.0), (2.0, 2.0))
    assert sup_distance(run.at(0.25), ref, w2) <= 2e-2


def test_snapshot_csv(tmp_path, grid):
    cfg = cfg_for(grid, m=0.0)
    run = solve(cfg, PdeScheme(), named_field(grid, "cos"), 0.1, snapshot_times=[0.05, 0.1])
    path = tmp_path / "snaps.csv"
    run.save_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t,x,value"
