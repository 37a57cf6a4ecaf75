import numpy as np
import pytest

from model.errors import BadArguments
from model.grid import Field, Grid
from threshold.families import Family, superlevel_fraction

GRID = Grid.symmetric(10.0, 201)


def test_two_bump_covers_both_intervals():
    u = Family.two_bump(GRID, 1.0).datum(2.0)
    assert u.at(2.0) == 1.0
    assert u.at(-2.0) == 1.0
    assert u.at(0.0) == 0.0
    assert u.at(4.0) == 0.0
    assert u.grid.dx * u.values.sum() == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("family", [
    Family.two_bump(GRID, 0.5),
    Family.single_block(GRID),
    Family.scaled_profile(Field(GRID, np.exp(-GRID.nodes ** 2))),
    Family.level_set(Field(GRID, np.exp(-GRID.nodes ** 2))),
    Family.graded(Field(GRID, np.exp(-GRID.nodes ** 2)), kappa=2.0),
])
def test_families_are_monotone(family):
    prev = family.datum(0.0).values
    for L in (0.3, 0.31, 1.0, 2.5, 4.0):
        cur = family.datum(L).values
        assert np.all(cur >= prev - 1e-15)
        assert cur.min() >= 0.0 and cur.max() <= 1.0
        prev = cur
    assert np.any(family.datum(4.0).values > family.datum(0.0).values)


def test_single_block_is_two_bump_without_gap():
    np.testing.assert_allclose(Family.single_block(GRID).datum(1.3).values,
                               Family.two_bump(GRID, 0.0).datum(1.3).values, atol=1e-12)


def test_block_data_depend_continuously_on_length():
    family = Family.single_block(GRID)
    a, b = family.datum(1.0).values, family.datum(1.0 + 1e-6).values
    assert np.max(np.abs(a - b)) <= 1e-6 / GRID.dx + 1e-12


def test_superlevel_fraction_of_a_tent():
    grid = Grid.symmetric(2.0, 5, "neumann_zero")
    tent = Field(grid, np.array([0.0, 0.5, 1.0, 0.5, 0.0]))
    frac = superlevel_fraction(tent, 0.875)
    # {tent > 0.875} = (-0.25, 0.25): half of the center cell
    np.testing.assert_allclose(frac.values, [0.0, 0.0, 0.5, 0.0, 0.0])


def test_constant_family_needs_neumann():
    with pytest.raises(BadArguments):
        Family.constant(GRID)


def test_negative_gap_is_rejected():
    with pytest.raises(BadArguments):
        Family.two_bump(GRID, -0.1)
