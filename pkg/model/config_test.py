import pytest

from model.config import LabConfig, flatten, load_config, parse_key_value_text, unflatten
from model.errors import BadArguments


def test_defaults_come_from_the_profile():
    cfg = load_config()
    assert cfg.nonlinearity.a == 0.3
    assert cfg.grid.n == 1601
    assert cfg.solver.scheme == "imex_be"
    assert cfg.tol_L() == pytest.approx(4e-5)


def test_key_value_file_overrides_yaml(tmp_path):
    path = tmp_path / "lab.cfg"
    path.write_text("# coarse run\ngrid.n = 401\nfate.alpha_inv = null\nthreshold.tol_L = 1e-5  # tight\n")
    cfg = load_config(str(path))
    assert cfg.grid.n == 401
    assert cfg.fate.alpha_inv is None
    assert cfg.tol_L() == 1e-5


def test_flags_override_the_file(tmp_path):
    path = tmp_path / "lab.cfg"
    path.write_text("grid.n = 401\n")
    cfg = load_config(str(path), {"grid.n": 801, "grid.x_max": None})
    assert cfg.grid.n == 801
    assert cfg.grid.x_max == 40.0


def test_bad_lines_and_values_are_rejected(tmp_path):
    with pytest.raises(BadArguments):
        parse_key_value_text("grid.n 401")
    with pytest.raises(BadArguments):
        load_config(overrides={"nonlinearity.a": 0.6})
    with pytest.raises(BadArguments):
        load_config(overrides={"grid.colour": "blue"})
    with pytest.raises(BadArguments):
        load_config(str(tmp_path / "missing.cfg"))


def test_echo_is_sorted_and_complete():
    lines = LabConfig().echo()
    assert lines == sorted(lines)
    assert "grid.n=1601" in lines
    assert "run.seed=12345" in lines
    assert not any(line.startswith(("run.out=", "run.workers=", "run.progress=")) for line in lines)


def test_flatten_round_trip():
    tree = {"grid": {"n": 5, "bc": "neumann_zero"}, "run": {"seed": 1}}
    assert unflatten(flatten(tree)) == tree
    with pytest.raises(BadArguments):
        unflatten({"seed": 1})


def test_with_overrides_returns_a_new_config():
    cfg = LabConfig()
    other = cfg.with_overrides({"optimizer.j": "quadratic"})
    assert other.optimizer.j == "quadratic"
    assert cfg.optimizer.j == "linear"


def test_echo_ignores_where_and_how_a_run_executes():
    base = LabConfig()
    moved = base.with_overrides({"run.out": "elsewhere", "run.workers": 4, "run.progress": False})
    assert moved.echo() == base.echo()
    assert base.with_overrides({"run.seed": 7}).echo() != base.echo()
