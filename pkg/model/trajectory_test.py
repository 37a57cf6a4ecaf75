import numpy as np
import pytest

from model.errors import BadArguments
from model.grid import Field, Grid
from model.trajectory import Fate, Trajectory

GRID = Grid.symmetric(1.0, 3)
W = Field(GRID, np.array([0.0, 0.5, 0.0]))


def _traj(**kwargs) -> Trajectory:
    values = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 2.0, 0.0]])
    return Trajectory(GRID, np.array([0.0, 1.0, 2.0]), values, **kwargs)


def test_values_between_samples_are_interpolated():
    np.testing.assert_allclose(_traj().values_at(0.25), [0.0, 0.25, 0.0])
    np.testing.assert_allclose(_traj().values_at(2.0), [0.0, 2.0, 0.0])


def test_values_outside_the_range_are_rejected():
    with pytest.raises(BadArguments):
        _traj().values_at(2.5)


def test_spliced_trajectory_hands_over_to_the_steady_state():
    spliced = _traj().spliced(1.0, W)
    assert spliced.t_end == 1.0
    np.testing.assert_array_equal(spliced.values_at(7.0), W.values)
    np.testing.assert_allclose(spliced.values_at(0.5), [0.0, 0.5, 0.0])


def test_splice_needs_both_time_and_state():
    with pytest.raises(BadArguments):
        _traj(splice_time=1.0)


def test_times_must_increase():
    with pytest.raises(BadArguments):
        Trajectory(GRID, np.array([0.0, 0.0]), np.zeros((2, 3)))


def test_log_offsets_scale_rows():
    traj = _traj(log_offsets=np.array([0.0, 0.0, 800.0]))
    assert traj.log_sup()[2] == pytest.approx(np.log(2.0) + 800.0)
    np.testing.assert_allclose(traj.normalized(2), [0.0, 1.0, 0.0])
    assert traj.offset(2) == 800.0


def test_truncation_keeps_offsets_aligned():
    cut = _traj(log_offsets=np.array([0.0, 1.0, 2.0])).truncated(1.0)
    assert cut.times.size == 2
    np.testing.assert_array_equal(cut.log_offsets, [0.0, 1.0])


def test_fate_certification_flag():
    assert Fate("invasion", 3.0, 0.99).certified
    assert not Fate("undecided", 400.0, 0.4).certified
    assert Fate("extinction", 0.0, 0.0).to_dict()["kind"] == "extinction"
