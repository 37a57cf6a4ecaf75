import pytest

from model.config import LabConfig
from pipeline.lab_runner import LabRunner

SMALL = {
    "grid.x_max": 25.0,
    "grid.n": 251,
    "solver.dt": 0.02,
    "solver.T_max": 100.0,
    "solver.store_stride": 5,
    "threshold.trial_stride": 25,
    "threshold.tol_W": 0.05,
    "threshold.tol_L": 1e-6,
    "floquet.terminal_efolds": 20.0,
    "floquet.splice_tol": 1e-3,
    "run.progress": False,
}
CFG = LabConfig().with_overrides(SMALL)


@pytest.fixture(scope="session")
def adjoint_run(tmp_path_factory):
    """A runner whose output directory already holds a single_block adjoint run."""
    runner = LabRunner(CFG, tmp_path_factory.mktemp("adjoint"))
    line = runner.adjoint_cmd(family="single_block")
    return runner, line
