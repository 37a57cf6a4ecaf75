import pytest

from model.config import LabConfig
from model.errors import BadArguments
from pipeline.acceptance import AcceptanceSuite, verify
from pipeline.lab_runner import LabRunner
from storage.run_log import read_report

CFG = LabConfig().with_overrides({"grid.x_max": 30.0, "grid.n": 1201, "run.progress": False})


@pytest.fixture
def suite(tmp_path):
    return AcceptanceSuite(LabRunner(CFG, tmp_path))


def test_every_criterion_is_registered(suite):
    assert [name for name, _ in suite.rules] == [
        "ground_state",
        "spectrum",
        "autonomous_floquet",
        "adjoint_uniqueness",
        "exponential_separation",
        "sharp_threshold",
        "fate_prediction",
        "orthogonality",
        "derivative_formula",
        "bathtub",
        "truncation",
    ]


def test_unknown_criterion_is_rejected(suite):
    with pytest.raises(BadArguments):
        suite.run(["warp_drive"])


def test_steady_criteria_pass(suite):
    verdicts = suite.run(["ground_state", "spectrum", "autonomous_floquet"])
    assert [v.name for v in verdicts] == ["ground_state", "spectrum", "autonomous_floquet"]
    assert all(v.passed for v in verdicts), [v.message for v in verdicts]


def test_verify_writes_its_report(tmp_path):
    runner = LabRunner(CFG, tmp_path)
    lines = verify(runner, ["spectrum"])
    assert lines.startswith("PASS spectrum")
    assert read_report(tmp_path / "verify.csv")[0]["passed"] == "True"
