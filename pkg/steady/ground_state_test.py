import numpy as np
import pytest

from model.errors import BadArguments
from model.grid import Grid
from model.nonlinearity import make_cubic
from steady.ground_state import exact_cubic_profile, ground_state, ground_state_newton, pde_residual

NL = make_cubic(0.3)
GRID = Grid.symmetric(40.0, 1601)
FINE = Grid.symmetric(40.0, 3201)


@pytest.fixture(scope="module")
def state():
    return ground_state(NL, GRID)


def test_peak_is_beta_star(state):
    center = GRID.n // 2
    assert state.W.values[center] == pytest.approx(NL.beta_star, abs=1e-12)
    assert state.W.values[center] == pytest.approx(0.47794, abs=1e-5)


def test_profile_is_even_and_decreasing(state):
    v = state.W.values
    assert np.array_equal(v, v[::-1])
    right = v[GRID.n // 2:]
    assert np.all(np.diff(right) < 0.0)
    assert np.all(v[1:-1] > 0.0)


def test_matches_closed_form_homoclinic(state):
    exact = exact_cubic_profile(0.3, GRID.nodes)
    np.testing.assert_allclose(state.W.values[1:-1], exact[1:-1], atol=1e-9)


def test_tail_decays_at_the_linearized_rate(state):
    i = int(np.searchsorted(GRID.nodes, 34.0))
    ratio = state.W.values[i] / state.W.values[i + 20]
    assert ratio == pytest.approx(np.exp(np.sqrt(0.3)), rel=1e-4)


def test_residual_is_second_order(state):
    coarse = state.residual
    fine = ground_state(NL, FINE).residual
    assert coarse <= 1e-3
    assert 3.5 <= coarse / fine <= 4.5


def test_newton_agrees_to_discretization_order(state):
    gap = np.max(np.abs(ground_state_newton(NL, GRID).W.values - state.W.values))
    fine_state = ground_state(NL, FINE)
    fine_gap = np.max(np.abs(ground_state_newton(NL, FINE).W.values - fine_state.W.values))
    assert gap <= 1e-3
    assert 3.0 <= gap / fine_gap <= 5.0


def test_newton_residual_is_tiny(state):
    newton = ground_state_newton(NL, GRID, seed=state.W)
    assert pde_residual(NL, newton.W) <= 1e-10
    assert newton.method == "newton"


def test_heterogeneous_media_use_the_newton_path():
    bump = make_cubic(0.3, heterogeneity=lambda x: 0.1 * np.exp(-x ** 2), m_bounds=(0.0, 0.1))
    grid = Grid.symmetric(30.0, 601)
    with pytest.raises(BadArguments):
        ground_state(bump, grid)
    hetero = ground_state_newton(bump, grid)
    assert hetero.residual <= 1e-10
    assert np.all(hetero.W.values[1:-1] > 0.0)


def test_closed_form_rejects_bad_parameter():
    with pytest.raises(BadArguments):
        exact_cubic_profile(0.6, [0.0])


@pytest.mark.parametrize("n", [801, 2401, 3201, 4001])
def test_quadrature_converges_on_refined_grids(n):
    grid = Grid.symmetric(40.0, n)
    gs = ground_state(NL, grid)
    assert gs.W.values[n // 2] == pytest.approx(NL.beta_star, abs=1e-12)
    assert np.all(np.isfinite(gs.W.values))
