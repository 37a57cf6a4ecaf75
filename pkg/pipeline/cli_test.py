import json

import pytest

from main import build_parser, cli, overrides_from
from storage.run_log import read_manifest

COARSE = ["--x-max", "20", "--n", "801", "--no-progress"]


def test_flags_map_onto_config_keys():
    args = build_parser().parse_args(["steady", "--a", "0.25", "--workers", "3", "--rng-seed", "7"])
    overrides = overrides_from(args)
    assert overrides["nonlinearity.a"] == 0.25
    assert overrides["run.workers"] == 3
    assert overrides["run.seed"] == 7
    assert overrides["grid.n"] is None


def test_steady_run_writes_manifest(tmp_path, capsys):
    assert cli(["steady", "--a", "0.3", "--out", str(tmp_path), *COARSE]) == 0
    assert "beta_star" in capsys.readouterr().out
    manifest = read_manifest(tmp_path)
    assert manifest.exit_code == 0
    assert "nonlinearity.a=0.3" in manifest.config
    assert str(tmp_path / "W.csv") in manifest.outputs


def test_flag_beats_config_file(tmp_path):
    config = tmp_path / "lab.cfg"
    config.write_text("grid.n = 401  # coarse\nnonlinearity.a = 0.2\n")
    out = tmp_path / "out"
    assert cli(["steady", "--config", str(config), "--n", "801", "--x-max", "20", "--out", str(out),
                "--no-progress"]) == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert "grid.n=801" in manifest["config"]
    assert "nonlinearity.a=0.2" in manifest["config"]


def test_reruns_are_byte_identical(tmp_path):
    first, second = tmp_path / "one", tmp_path / "two"
    assert cli(["steady", "--out", str(first), *COARSE]) == 0
    assert cli(["steady", "--out", str(second), "--workers", "2", *COARSE]) == 0
    for name in ("W.csv", "phi.csv", "steady_report.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_invalid_parameter_exits_2(tmp_path):
    assert cli(["steady", "--a", "0.7", "--out", str(tmp_path)]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert cli(["steady", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exit_info:
        cli(["fly"])
    assert exit_info.value.code == 2


def test_missing_adjoint_run_exits_2(tmp_path):
    assert cli(["orthogonality", "--out", str(tmp_path), *COARSE]) == 2
    assert read_manifest(tmp_path).exit_code == 2
