import numpy as np
import pytest

from applications.bathtub import (
    bathtub_optimize,
    ground_state_not_minimizer,
    mass_of_ground_state,
    seed_ranking,
)
from applications.conftest import FLOQUET, GRID, NL, SOLVER, THRESHOLD
from model.config import OptimizerParams
from model.errors import NotConverged
from model.grid import Field, Grid, indicator
from model.nonlinearity import make_cubic
from steady.eigen import principal_eigenpair
from steady.ground_state import GroundState, exact_cubic_profile, ground_state
from threshold.families import Family

OPTIMIZER = OptimizerParams(max_outer=12, fp_tol=1e-2)


def _optimize(seed: Family, box, steady, optimizer=OPTIMIZER):
    return bathtub_optimize(NL, GRID, seed, SOLVER, box, THRESHOLD, FLOQUET, optimizer, tol_L=1e-5, steady=steady)


@pytest.fixture(scope="module")
def optimum(box, steady):
    return _optimize(Family.single_block(GRID), box, steady)


def test_optimal_datum_is_an_indicator(optimum):
    assert optimum.converged
    assert optimum.kkt_violation <= OPTIMIZER.kkt_tol
    assert optimum.sandwich_holds(OPTIMIZER.kkt_tol)
    assert optimum.min_on >= optimum.c - OPTIMIZER.kkt_tol


def test_optimal_datum_is_cheaper_than_ground_state(optimum):
    mass_W = mass_of_ground_state(ground_state(NL, Grid.symmetric(40.0, 1601)))
    assert optimum.mass < mass_W
    assert optimum.mass == pytest.approx(GRID.dx * optimum.u0_opt.values.sum())


def test_two_seeds_reach_the_same_mass(optimum, box, steady):
    other = _optimize(Family.two_bump(GRID, 1.0), box, steady)
    assert other.converged
    assert abs(other.mass - optimum.mass) <= 2.0 * OPTIMIZER.fp_tol


def test_exhausted_search_reports_its_best_datum(box, steady):
    strict = OptimizerParams(max_outer=1, fp_tol=1e-12)
    with pytest.raises(NotConverged) as err:
        _optimize(Family.single_block(GRID), box, steady, strict)
    best = err.value.best
    assert best is not None
    assert not best.converged
    assert best.mass > 0.0
    assert len(best.history) == 1


def test_seed_ranking_halves_at_the_block_edges():
    grid = Grid.symmetric(10.0, 101)
    rank = seed_ranking(indicator(grid, [(-3.0, 3.0)]), 0.5)
    center = grid.n // 2
    assert rank.values.max() == pytest.approx(1.0)
    np.testing.assert_allclose(rank.values, rank.values[::-1], atol=1e-12)
    assert np.all(np.diff(rank.values[center:]) <= 1e-12)
    edge = int(np.searchsorted(grid.nodes, 3.0 - 1e-9))
    assert rank.values[edge] == pytest.approx(0.5, abs=0.02)


def test_mass_tail_is_exact_for_an_exponential_profile():
    grid = Grid.symmetric(5.0, 51)
    k = np.sqrt(0.3)
    profile = GroundState(Field(grid, np.exp(-k * np.abs(grid.nodes))), 1.0, k)
    q = np.exp(-k * grid.dx)
    assert mass_of_ground_state(profile) == pytest.approx(grid.dx * (1.0 + 2.0 * q / (1.0 - q)), rel=1e-12)


def test_mass_of_ground_state_is_domain_independent():
    small = mass_of_ground_state(ground_state(NL, Grid.symmetric(30.0, 1201)))
    large = mass_of_ground_state(ground_state(NL, Grid.symmetric(60.0, 2401)))
    assert small == pytest.approx(large, abs=1e-8)


def test_mass_of_ground_state_matches_closed_form():
    grid = Grid.symmetric(40.0, 3201)
    exact = grid.dx * exact_cubic_profile(0.3, grid.nodes).sum()
    assert mass_of_ground_state(ground_state(NL, grid)) == pytest.approx(exact, rel=1e-6)


def test_masses_differ_between_barriers():
    grid = Grid.symmetric(40.0, 1601)
    a = mass_of_ground_state(ground_state(make_cubic(0.3), grid))
    b = mass_of_ground_state(ground_state(make_cubic(0.2), grid))
    assert a > 0.0 and b > 0.0
    assert np.isfinite(a) and np.isfinite(b)
    assert a != pytest.approx(b, rel=1e-3)


def test_ground_state_is_not_a_minimizer():
    grid = Grid.symmetric(40.0, 1601)
    steady = ground_state(NL, grid)
    report = ground_state_not_minimizer(steady, principal_eigenpair(NL, grid, steady.W))
    assert report.certified
    assert report.spread > 0.5
