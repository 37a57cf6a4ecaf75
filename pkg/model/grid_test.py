import numpy as np
import pytest

from model.errors import BadArguments
from model.grid import Field, Grid, indicator, norms

GRID = Grid.symmetric(2.0, 5)


def test_symmetric_grid_nodes():
    assert GRID.dx == 1.0
    np.testing.assert_array_equal(GRID.nodes, [-2.0, -1.0, 0.0, 1.0, 2.0])
    assert GRID.width == 4.0


def test_doubled_grid_keeps_spacing():
    doubled = GRID.doubled()
    assert doubled == Grid(-4.0, 4.0, 9)
    assert doubled.dx == GRID.dx


@pytest.mark.parametrize("args", [(1.0, 1.0, 5), (0.0, 1.0, 2), (0.0, 1.0, 5, "periodic")])
def test_invalid_grids_are_rejected(args):
    with pytest.raises(BadArguments):
        Grid(*args)


def test_interior_depends_on_boundary_mode():
    assert GRID.interior == slice(1, -1)
    assert Grid.symmetric(2.0, 5, "neumann_zero").interior == slice(0, 5)


def test_constant_field_pins_dirichlet_ends():
    np.testing.assert_array_equal(Field.constant(GRID, 0.5).values, [0.0, 0.5, 0.5, 0.5, 0.0])
    np.testing.assert_array_equal(Field.constant(Grid.symmetric(2.0, 5, "neumann_zero"), 0.5).values, [0.5] * 5)


def test_norms_use_the_rectangle_rule():
    n = norms(Field(GRID, np.array([0.0, 1.0, -2.0, 1.0, 0.0])))
    assert n.sup == 2.0
    assert n.l1 == 4.0
    assert n.l2 == pytest.approx(np.sqrt(6.0))


def test_field_rejects_bad_values():
    with pytest.raises(BadArguments):
        Field(GRID, np.zeros(4))
    with pytest.raises(BadArguments):
        Field(GRID, np.array([0.0, np.nan, 0.0, 0.0, 0.0]))


def test_field_values_are_read_only():
    fld = Field.zeros(GRID)
    with pytest.raises(ValueError):
        fld.values[2] = 1.0


def test_indicator_weights_partial_cells():
    fld = indicator(GRID, [(-0.25, 0.25)])
    np.testing.assert_allclose(fld.values, [0.0, 0.0, 0.5, 0.0, 0.0])
    assert fld.dot(Field.constant(GRID, 1.0)) == pytest.approx(0.5)


def test_indicator_is_continuous_in_its_endpoints():
    a = indicator(GRID, [(-1.0, 1.0)]).values
    b = indicator(GRID, [(-1.0 - 1e-9, 1.0 + 1e-9)]).values
    assert np.max(np.abs(a - b)) < 1e-8


def test_field_interpolates_and_bounds_check():
    fld = Field(GRID, np.array([0.0, 0.2, 1.0, 0.2, 0.0]))
    assert fld.at(0.5) == pytest.approx(0.6)
    assert fld.is_solution_like()
    assert not Field(GRID, np.array([0.0, 1.1, 0.0, 0.0, 0.0])).is_solution_like()
