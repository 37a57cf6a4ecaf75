import numpy as np
import pytest

from floquet.bundle import (
    compute_bundle,
    frozen_trajectory,
    linearized_coefficient,
    pairing,
    solve_adjoint,
    terminal_time,
)
from model.config import FloquetParams, SolverParams
from model.errors import BadArguments, NumericFailure
from model.grid import Field, Grid
from model.nonlinearity import eval_fprime, make_cubic
from model.trajectory import Trajectory
from steady.eigen import principal_eigenpair
from steady.ground_state import ground_state

NL = make_cubic(0.3)
GRID = Grid.symmetric(30.0, 601)
CN = SolverParams(dt=0.01, T_max=20.0, store_stride=10, scheme="imex_cn")
FLOQUET = FloquetParams()
T_END = 20.0


@pytest.fixture(scope="module")
def steady():
    return ground_state(NL, GRID)


@pytest.fixture(scope="module")
def eigen(steady):
    return principal_eigenpair(NL, GRID, steady.W)


@pytest.fixture(scope="module")
def bundle(steady, eigen):
    return compute_bundle(frozen_trajectory(steady), NL, eigen, CN, FLOQUET, T_end=T_END)


def test_forward_bundle_grows_like_the_principal_mode(bundle, eigen):
    phi = eigen.phi.values
    for k in range(0, bundle.v.times.size, 40):
        t = bundle.v.times[k]
        expected = phi * np.exp(-eigen.lam * t)
        err = np.max(np.abs(bundle.v.field(k).values - expected)) / np.exp(-eigen.lam * t)
        assert err <= 1e-4


def test_adjoint_decays_like_the_principal_mode(bundle, eigen):
    p0 = bundle.p.field(0).values
    for k in range(0, bundle.p.times.size, 40):
        t = bundle.p.times[k]
        expected = p0 * np.exp(eigen.lam * t)
        assert np.max(np.abs(bundle.p.field(k).values - expected)) <= 1e-4 * np.max(expected)


def test_bundle_shares_time_grid_and_is_normalized(bundle):
    np.testing.assert_allclose(bundle.p.times, bundle.v.times)
    assert bundle.p.t_end == pytest.approx(T_END)
    assert pairing(bundle.p, bundle.v, 0) == pytest.approx(1.0, abs=1e-12)
    assert np.max(bundle.v0().values) == pytest.approx(1.0)


def test_normalized_bundle_ignores_terminal_scale(steady, eigen, bundle):
    doubled = Field(GRID, 2.0 * eigen.phi.values)
    other = compute_bundle(frozen_trajectory(steady), NL, eigen, CN, FLOQUET, terminal=doubled, T_end=T_END)
    scale = np.max(np.abs(bundle.p0().values))
    np.testing.assert_allclose(other.p0().values, bundle.p0().values, atol=1e-12 * scale)


def test_pairing_is_conserved_with_backward_euler(steady, eigen):
    be = CN.model_copy(update={"scheme": "imex_be"})
    b = compute_bundle(frozen_trajectory(steady), NL, eigen, be, FLOQUET, T_end=5.0)
    for k in range(b.p.times.size):
        assert pairing(b.p, b.v, k) == pytest.approx(1.0, abs=1e-10)


def test_terminal_datum_must_be_positive(steady, eigen):
    with pytest.raises(BadArguments):
        solve_adjoint(frozen_trajectory(steady), NL, eigen, CN, FLOQUET, terminal=Field.zeros(GRID), T_end=1.0)


def test_terminal_time_rounds_up_to_the_step(steady, eigen):
    T = terminal_time(frozen_trajectory(steady), eigen, CN, FLOQUET)
    raw = FLOQUET.terminal_efolds / abs(eigen.lam)
    assert raw <= T < raw + CN.dt + 1e-12


def test_unspliced_trajectory_has_no_terminal_time(eigen):
    traj = Trajectory(GRID, np.array([0.0, 1.0]), np.zeros((2, GRID.n)))
    with pytest.raises(NumericFailure):
        terminal_time(traj, eigen, CN, FLOQUET)


def test_linearized_coefficient_of_zero_state():
    traj = Trajectory(GRID, np.array([0.0, 1.0]), np.zeros((2, GRID.n)))
    c = linearized_coefficient(traj, NL, 0.5)
    np.testing.assert_allclose(c.values, -0.3)


def test_linearized_coefficient_after_splice_uses_w(steady):
    traj = Trajectory(GRID, np.array([0.0, 1.0]), np.zeros((2, GRID.n)), splice_time=1.0, steady_state=steady.W)
    c = linearized_coefficient(traj, NL, 7.5)
    np.testing.assert_allclose(c.values, eval_fprime(NL, GRID.nodes, steady.W.values))
