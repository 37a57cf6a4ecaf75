import json

import numpy as np
import pytest

from model.errors import BadArguments
from model.grid import Field, Grid
from model.trajectory import Trajectory
from storage.run_log import (
    RunManifest,
    format_value,
    read_header,
    read_manifest,
    read_profile,
    read_report,
    read_trajectory,
    write_manifest,
    write_profile,
    write_report,
    write_trajectory,
)

GRID = Grid.symmetric(2.0, 5)
ECHO = ["grid.n=5", "nonlinearity.a=0.3"]


def test_profile_file_layout(tmp_path):
    path = write_profile(tmp_path / "W.csv", Field(GRID, np.array([0.0, 0.1, 1.0 / 3.0, 0.1, 0.0])), ECHO)
    lines = path.read_text().splitlines()
    assert lines[0] == "# grid.n=5"
    assert "x,value" in lines
    assert lines[-3] == "0,0.33333333333333331"
    restored = read_profile(path)
    assert restored.grid == GRID
    np.testing.assert_array_equal(restored.values, [0.0, 0.1, 1.0 / 3.0, 0.1, 0.0])


def test_profile_bytes_are_reproducible(tmp_path):
    fld = Field(GRID, np.linspace(0.0, 1.0, 5))
    a = write_profile(tmp_path / "a.csv", fld, ECHO).read_bytes()
    b = write_profile(tmp_path / "b.csv", fld, ECHO).read_bytes()
    assert a == b


def test_trajectory_keeps_offsets_and_splice(tmp_path):
    W = Field(GRID, np.array([0.0, 0.2, 0.5, 0.2, 0.0]))
    traj = Trajectory(GRID, np.array([0.0, 0.5]), np.ones((2, 5)), splice_time=0.5, steady_state=W,
                      log_offsets=np.array([0.0, 700.0]))
    path = write_trajectory(tmp_path / "p.csv", traj, ECHO)
    assert read_header(path)["splice_time"] == "0.5"
    restored = read_trajectory(path, steady_state=W)
    assert restored.splice_time == 0.5
    np.testing.assert_array_equal(restored.log_offsets, [0.0, 700.0])
    np.testing.assert_array_equal(restored.values, traj.values)


def test_unspliced_trajectory_reads_back_plain(tmp_path):
    traj = Trajectory(GRID, np.array([0.0]), np.zeros((1, 5)))
    restored = read_trajectory(write_trajectory(tmp_path / "u.csv", traj))
    assert restored.splice_time is None
    assert restored.log_offsets is None


def test_plain_trajectory_rows_are_time_then_field(tmp_path):
    traj = Trajectory(GRID, np.array([0.0, 1.0]), np.full((2, 5), 0.25))
    path = write_trajectory(tmp_path / "u.csv", traj, ECHO)
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    assert lines[0].startswith("t,u(")
    assert lines[1].split(",") == ["0"] + ["0.25"] * 5
    assert read_header(path)["log_offset"] == "0"


def test_rescaled_trajectory_announces_its_offset_column(tmp_path):
    traj = Trajectory(GRID, np.array([0.0]), np.ones((1, 5)), log_offsets=np.array([3.0]))
    path = write_trajectory(tmp_path / "v.csv", traj, ECHO)
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    assert lines[0].startswith("t,log_offset,u(")
    assert read_header(path)["log_offset"] == "1"


def test_trajectory_with_wrong_width_is_rejected(tmp_path):
    path = write_trajectory(tmp_path / "u.csv", Trajectory(GRID, np.array([0.0]), np.zeros((1, 5))))
    text = path.read_text().replace("n=5", "n=6")
    path.write_text(text)
    with pytest.raises(BadArguments):
        read_trajectory(path)


def test_report_rows(tmp_path):
    rows = [{"r": 0.5, "L_star": 1.25, "kind": "invasion", "gamma": None}]
    path = write_report(tmp_path / "rep.csv", rows, ECHO, {"tool": "lab"})
    assert path.read_text().splitlines()[2] == "# tool=lab"
    assert read_report(path) == [{"r": "0.5", "L_star": "1.25", "kind": "invasion", "gamma": ""}]


def test_empty_report_is_rejected(tmp_path):
    with pytest.raises(BadArguments):
        write_report(tmp_path / "empty.csv", [])


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(True) == "True"
    assert format_value(3) == "3"
    assert format_value(None) == ""


def test_manifest_records_digests(tmp_path):
    out = write_profile(tmp_path / "W.csv", Field(GRID, np.zeros(5)))
    path = write_manifest(tmp_path, RunManifest(command="steady", config=ECHO), outputs=[out])
    data = json.loads(path.read_text())
    assert data["command"] == "steady"
    assert len(data["outputs"][str(out)]) == 32
    assert read_manifest(tmp_path).config == ECHO


def test_corrupt_manifest_is_overwritten(tmp_path):
    (tmp_path / "run_manifest.json").write_text("{not json")
    write_manifest(tmp_path, RunManifest(command="verify", config=[]))
    assert read_manifest(tmp_path).command == "verify"


def test_missing_files_are_bad_arguments(tmp_path):
    with pytest.raises(BadArguments):
        read_profile(tmp_path / "nope.csv")
    with pytest.raises(BadArguments):
        read_manifest(tmp_path)
