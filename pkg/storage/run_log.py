import csv
import hashlib
import json
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
from pydantic import BaseModel, Field as PydanticField

from model.errors import BadArguments
from model.grid import Field, Grid
from model.lablog import lab_log
from model.trajectory import Trajectory

NUMBER_FORMAT = "%.17g"
MANIFEST_NAME = "run_manifest.json"


def tool_version() -> str:
    try:
        return version("threshold-lab")
    except PackageNotFoundError:
        return "0.1.0"


def format_value(value: Any) -> str:
    """Floats with 17 significant digits, None as an empty cell, everything else via str."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return NUMBER_FORMAT % float(value)
    return str(value)


def _header_text(echo: Iterable[str], extra: Optional[dict] = None) -> list[str]:
    lines = [f"# {line}" for line in echo]
    lines += [f"# {key}={format_value(value)}" for key, value in (extra or {}).items()]
    return lines


def read_header(path: str | Path) -> dict[str, str]:
    """Parses the leading '# key=value' lines of a file."""
    header = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
    return header


def _prepare(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _grid_keys(grid: Grid) -> dict:
    return {"grid.x_min": grid.x_min, "grid.x_max": grid.x_max, "grid.n": grid.n, "grid.bc": grid.bc}


def _grid_from(header: dict[str, str], path: Path) -> Grid:
    try:
        return Grid(float(header["grid.x_min"]), float(header["grid.x_max"]), int(header["grid.n"]),
                    header["grid.bc"])
    except KeyError as e:
        raise BadArguments(f"{path} has no grid header ({e.args[0]})") from e


def write_profile(path: str | Path, fld: Field, echo: Iterable[str] = (), extra: Optional[dict] = None) -> Path:
    """
    Writes a profile as an x,value CSV with '#' header lines.

    Returns:
        Path: The written file.
    """
    path = _prepare(path)
    header = _header_text(echo, {**_grid_keys(fld.grid), **(extra or {})})
    data = np.column_stack([fld.grid.nodes, fld.values])
    np.savetxt(path, data, fmt=NUMBER_FORMAT, delimiter=",", header="\n".join(header + ["x,value"]), comments="")
    lab_log("SAVE", str(path))
    return path


def read_profile(path: str | Path) -> Field:
    """
    Reads a profile written by write_profile.

    Raises:
        BadArguments: If the file is missing or has no grid header.
    """
    path = Path(path)
    if not path.exists():
        raise BadArguments(f"Profile not found: {path}")
    grid = _grid_from(read_header(path), path)
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=_header_rows(path) + 1, ndmin=2)
    return Field(grid, data[:, 1])


def _header_rows(path: Path) -> int:
    count = 0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            count += 1
    return count


def write_trajectory(path: str | Path, traj: Trajectory, echo: Iterable[str] = (),
                     extra: Optional[dict] = None) -> Path:
    """
    Writes a trajectory as t,u(x_0),...,u(x_{n-1}) rows.

    A rescaled trajectory (nonzero log offsets, e.g. a growing bundle direction) gets a
    log_offset column after t, announced by "log_offset=1" in the header; its rows hold
    the normalized field, the physical one being exp(log_offset) times larger. Splice
    time goes into the header; the steady state is not stored.

    Returns:
        Path: The written file.
    """
    path = _prepare(path)
    rescaled = traj.log_offsets is not None and bool(np.any(traj.log_offsets != 0.0))
    keys = {**_grid_keys(traj.grid), "splice_time": traj.splice_time, "log_offset": int(rescaled), **(extra or {})}
    names = ["t"] + (["log_offset"] if rescaled else []) + [f"u({NUMBER_FORMAT % x})" for x in traj.grid.nodes]
    columns = [traj.times] + ([traj.log_offsets] if rescaled else []) + [traj.values]
    np.savetxt(path, np.column_stack(columns), fmt=NUMBER_FORMAT, delimiter=",",
               header="\n".join(_header_text(echo, keys) + [",".join(names)]), comments="")
    lab_log("SAVE", str(path))
    return path


def read_trajectory(path: str | Path, steady_state: Optional[Field] = None) -> Trajectory:
    """
    Reads a trajectory written by write_trajectory.

    Args:
        path (str | Path): The CSV file.
        steady_state (Field | None): Re-attached at the stored splice time when given.

    Returns:
        Trajectory: The trajectory (spliced when both a splice time and steady_state exist).
    """
    path = Path(path)
    if not path.exists():
        raise BadArguments(f"Trajectory not found: {path}")
    header = read_header(path)
    grid = _grid_from(header, path)
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=_header_rows(path) + 1, ndmin=2)
    rescaled = header.get("log_offset") == "1"
    offsets = data[:, 1] if rescaled else None
    values = data[:, 2:] if rescaled else data[:, 1:]
    if values.shape[1] != grid.n:
        raise BadArguments(f"{path} holds {values.shape[1]} columns of u, its header says n={grid.n}")
    splice = header.get("splice_time") or None
    if splice is None or steady_state is None:
        return Trajectory(grid, data[:, 0], values, log_offsets=offsets)
    return Trajectory(grid, data[:, 0], values, splice_time=float(splice), steady_state=steady_state,
                      log_offsets=offsets)


def write_report(path: str | Path, rows: list[dict], echo: Iterable[str] = (), extra: Optional[dict] = None) -> Path:
    """
    Writes report rows (dicts sharing their keys) as a CSV with '#' header lines.

    Returns:
        Path: The written file.
    """
    path = _prepare(path)
    if not rows:
        raise BadArguments(f"Refusing to write an empty report to {path}")
    columns = list(rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as f:
        for line in _header_text(echo, extra):
            f.write(line + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
    lab_log("SAVE", str(path))
    return path


def read_report(path: str | Path) -> list[dict[str, str]]:
    """Reads report rows as strings keyed by column name."""
    path = Path(path)
    if not path.exists():
        raise BadArguments(f"Report not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def file_digest(path: str | Path) -> str:
    return hashlib.md5(Path(path).read_bytes()).hexdigest()


class RunManifest(BaseModel):
    """
    Provenance of one run.

    Attributes:
        command (str): Subcommand.
        config (list[str]): Resolved configuration as section.key=value lines.
        version (str): Tool version.
        started (str): UTC start time.
        wall_clock_s (float): Elapsed seconds.
        inputs (dict[str, str]): md5 digests of input files.
        outputs (dict[str, str]): md5 digests of output files.
        exit_code (int): Process exit status.
    """
    command: str
    config: list[str]
    version: str = PydanticField(default_factory=tool_version)
    started: str = PydanticField(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    wall_clock_s: float = 0.0
    inputs: dict[str, str] = PydanticField(default_factory=dict)
    outputs: dict[str, str] = PydanticField(default_factory=dict)
    exit_code: int = 0


def write_manifest(out_dir: str | Path, manifest: RunManifest, inputs: Iterable[Path] = (),
                   outputs: Iterable[Path] = ()) -> Path:
    """
    Writes run_manifest.json into out_dir with md5 digests of the given files.

    A corrupt manifest from an earlier run is overwritten.

    Returns:
        Path: The manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_NAME
    if path.exists():
        try:
            json.loads(path.read_text(encoding="utf-8") or "{}")
        except json.JSONDecodeError:
            lab_log("WARN", f"Corrupt manifest at {path}; overwriting")
    manifest = manifest.model_copy(update={
        "inputs": {**manifest.inputs, **{str(p): file_digest(p) for p in inputs}},
        "outputs": {**manifest.outputs, **{str(p): file_digest(p) for p in outputs}},
    })
    path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    lab_log("SAVE", str(path))
    return path


def read_manifest(out_dir: str | Path) -> RunManifest:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        raise BadArguments(f"No manifest in {out_dir}")
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
