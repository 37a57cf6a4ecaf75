import numpy as np
import pytest

from applications.conftest import FLOQUET, GRID, NL, SOLVER, THRESHOLD
from applications.orthogonality import orthogonality_residual
from floquet.bundle import compute_bundle
from forward.solver import evolve
from model.errors import BadArguments
from model.trajectory import Trajectory
from threshold.bisection import find_critical_length, threshold_trajectory
from threshold.families import Family


def test_threshold_trajectory_is_nearly_orthogonal_to_p(critical, bundle):
    report = orthogonality_residual(critical, bundle)
    assert not report.degenerate
    assert report.median <= 0.05


def test_off_threshold_trajectory_is_not(critical, bundle, block):
    datum = Family.single_block(GRID).datum(1.2 * block.L_star)
    off = evolve(NL, GRID, datum, SOLVER.model_copy(update={"T_max": critical.t_end}))
    on = orthogonality_residual(critical, bundle)
    assert orthogonality_residual(off, bundle).median > 2.0 * on.median


def test_steady_trajectory_is_degenerate(bundle, steady):
    times = bundle.p.times[:5]
    traj = Trajectory(GRID, times, np.tile(steady.values, (5, 1)))
    report = orthogonality_residual(traj, bundle)
    assert report.degenerate
    np.testing.assert_array_equal(report.rho, 0.0)


def test_needs_three_samples(bundle, steady):
    traj = Trajectory(GRID, bundle.p.times[:2], np.tile(steady.values, (2, 1)))
    with pytest.raises(BadArguments):
        orthogonality_residual(traj, bundle)


def test_needs_matching_times(bundle, steady):
    traj = Trajectory(GRID, bundle.p.times[:4] + 0.013, np.tile(steady.values, (4, 1)))
    with pytest.raises(BadArguments):
        orthogonality_residual(traj, bundle)


def test_residual_shrinks_as_the_bracket_tightens(box, steady, eigen, critical, bundle):
    loose = find_critical_length(Family.single_block(GRID), NL, SOLVER, box, THRESHOLD, tol_L=1e-3, steady=steady)
    loose_traj = threshold_trajectory(loose, FLOQUET.splice_tol, THRESHOLD.tol_W)
    loose_bundle = compute_bundle(loose_traj, NL, eigen, SOLVER, FLOQUET)
    tight = orthogonality_residual(critical, bundle)
    assert tight.median < orthogonality_residual(loose_traj, loose_bundle).median
