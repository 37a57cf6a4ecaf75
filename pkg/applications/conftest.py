import pytest

from floquet.bundle import compute_bundle
from forward.fate import calibrate_invasion_box
from model.config import FateParams, FloquetParams, SolverParams, ThresholdParams
from model.grid import Grid
from model.nonlinearity import make_cubic
from steady.eigen import principal_eigenpair
from threshold.bisection import default_steady, find_critical_length, threshold_trajectory
from threshold.families import Family

NL = make_cubic(0.3)
GRID = Grid.symmetric(25.0, 251)
SOLVER = SolverParams(dt=0.02, T_max=100.0, store_stride=5, scheme="imex_be")
THRESHOLD = ThresholdParams(trial_stride=25, tol_W=0.05)
FLOQUET = FloquetParams(terminal_efolds=20.0, splice_tol=1e-3)


@pytest.fixture(scope="session")
def box() -> FateParams:
    alpha, R = calibrate_invasion_box(NL, GRID, SOLVER, FateParams())
    return FateParams(alpha_inv=alpha, R_inv=R)


@pytest.fixture(scope="session")
def steady():
    return default_steady(NL, GRID)


@pytest.fixture(scope="session")
def block(box, steady):
    return find_critical_length(Family.single_block(GRID), NL, SOLVER, box, THRESHOLD, tol_L=1e-6, steady=steady)


@pytest.fixture(scope="session")
def critical(block):
    return threshold_trajectory(block, FLOQUET.splice_tol, THRESHOLD.tol_W)


@pytest.fixture(scope="session")
def eigen(steady):
    return principal_eigenpair(NL, GRID, steady)


@pytest.fixture(scope="session")
def bundle(critical, eigen):
    return compute_bundle(critical, NL, eigen, SOLVER, FLOQUET)
