from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from model.errors import BadArguments

ROOT = Path(__file__).parent.parent
PROFILE_YAML = ROOT / "config" / "lab_profile.yaml"
EXECUTION_KEYS = ("run.out", "run.progress", "run.workers")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class NonlinearityConfig(_Section):
    """
    Reaction term selection.

    Attributes:
        kind (str): "cubic" is the only kind settable from configuration files.
        a (float): Cubic parameter, f(u) = u(1-u)(u-a), 0 < a < 1/2.
    """
    kind: Literal["cubic"] = "cubic"
    a: float = 0.3


class GridConfig(_Section):
    """
    Symmetric truncated domain [-x_max, x_max].

    Attributes:
        x_max (float): Half-width of the domain.
        n (int): Number of nodes, including both boundary nodes.
        bc (str): Boundary condition mode.
    """
    x_max: float = Field(40.0, gt=0)
    n: int = Field(1601, ge=3)
    bc: Literal["dirichlet_zero", "neumann_zero"] = "dirichlet_zero"


class SolverParams(_Section):
    """
    Time stepping parameters.

    Attributes:
        dt (float): Time step.
        T_max (float): Final time of an evolution.
        store_stride (int): Store every store_stride-th step.
        scheme (str): IMEX variant for the diffusion part.
    """
    dt: float = Field(0.005, gt=0)
    T_max: float = Field(400.0, gt=0)
    store_stride: int = Field(20, ge=1)
    scheme: Literal["imex_be", "imex_cn"] = "imex_be"


class FateParams(_Section):
    """
    Fate certificate parameters.

    Attributes:
        delta (float): Extinction margin, sup u < theta*(1-delta).
        alpha_inv (float | None): Invasion box height; calibrated when unset.
        R_inv (float | None): Invasion box half-width; calibrated when unset.
    """
    delta: float = Field(0.1, gt=0, lt=1)
    alpha_inv: Optional[float] = None
    R_inv: Optional[float] = None


class ThresholdParams(_Section):
    """
    Certified bisection parameters.

    Attributes:
        tol_L (float | None): Bracket width target; defaults to 1e-6 * x_max.
        L_start (float): First trial of the bracketing search.
        L_cap (float): Largest parameter tried before giving up.
        max_escalation (int): Largest T_max multiplier for undecided trials.
        trial_stride (int): Storage stride used by fate trials.
        tol_W (float): Required closest approach of the mid trajectory to W.
    """
    tol_L: Optional[float] = None
    L_start: float = Field(0.5, gt=0)
    L_cap: float = Field(30.0, gt=0)
    max_escalation: int = Field(8, ge=1)
    trial_stride: int = Field(100, ge=1)
    tol_W: float = Field(1e-3, gt=0)


class FloquetParams(_Section):
    """
    Adjoint bundle parameters.

    Attributes:
        splice_tol (float): Hand over to W once ||u - W||_sup drops below this.
        terminal_efolds (float): T_end = T_splice + terminal_efolds / |lambda|.
        tol_pair (float): Allowed drift of the p-v pairing.
        tol_unique (float): Allowed gap between normalized p(0) from two terminal data.
        memory_budget_mb (float): Largest doubled-domain bundle the doubling check will build.
    """
    splice_tol: float = Field(1e-4, gt=0)
    terminal_efolds: float = Field(40.0, gt=0)
    tol_pair: float = Field(1e-6, gt=0)
    tol_unique: float = Field(1e-3, gt=0)
    memory_budget_mb: float = Field(2048.0, gt=0)


class OptimizerParams(_Section):
    """
    Bathtub optimizer parameters.

    Attributes:
        j (str): Cost density, "linear" j(u) = u or "quadratic" j(u) = u + kappa*u^2/2.
        kappa (float): Curvature of the quadratic cost.
        kkt_tol (float): Level-set sandwich tolerance (relative to sup p).
        fp_tol (float): Fixed-point tolerance on the symmetric-difference mass.
        max_outer (int): Maximum outer iterations.
        seed_smoothing (float): Width of the Gaussian used to rank the seed datum.
    """
    j: Literal["linear", "quadratic"] = "linear"
    kappa: float = Field(1.0, gt=0)
    kkt_tol: float = Field(1e-2, gt=0)
    fp_tol: float = Field(1e-3, gt=0)
    max_outer: int = Field(8, ge=1)
    seed_smoothing: float = Field(1.0, gt=0)


class RunConfig(_Section):
    """
    Run-level settings.

    Attributes:
        out (str): Output directory.
        workers (int): Worker processes for sweeps.
        seed (int): Seed for random directions.
        progress (bool): Show tqdm progress bars.
    """
    out: str = "runs"
    workers: int = Field(1, ge=1)
    seed: int = 12345
    progress: bool = True


class LabConfig(_Section):
    """
    The fully resolved configuration of one run.
    """
    nonlinearity: NonlinearityConfig = NonlinearityConfig()
    grid: GridConfig = GridConfig()
    solver: SolverParams = SolverParams()
    fate: FateParams = FateParams()
    threshold: ThresholdParams = ThresholdParams()
    floquet: FloquetParams = FloquetParams()
    optimizer: OptimizerParams = OptimizerParams()
    run: RunConfig = RunConfig()

    @field_validator("nonlinearity")
    @classmethod
    def _check_a(cls, value: NonlinearityConfig) -> NonlinearityConfig:
        if not 0.0 < value.a < 0.5:
            raise ValueError(f"nonlinearity.a must lie in (0, 1/2), got {value.a}")
        return value

    def tol_L(self) -> float:
        """
        Returns the bisection tolerance, defaulting to 1e-6 * x_max.

        Returns:
            float: Absolute bracket width target.
        """
        return self.threshold.tol_L if self.threshold.tol_L is not None else 1e-6 * self.grid.x_max

    def echo(self) -> list[str]:
        """
        Flattens the configuration into sorted "section.key=value" lines.

        Keys that only steer execution (EXECUTION_KEYS) are left out, so reruns that differ
        in them write identical files.

        Returns:
            list[str]: One line per resolved parameter.
        """
        return [f"{key}={value}" for key, value in sorted(flatten(self.model_dump()).items())
                if key not in EXECUTION_KEYS]

    def with_overrides(self, overrides: dict[str, Any]) -> "LabConfig":
        """
        Returns a copy with dotted-key overrides applied.

        Args:
            overrides (dict[str, Any]): Mapping such as {"grid.n": 801}.

        Returns:
            LabConfig: The new configuration.
        """
        merged = flatten(self.model_dump())
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return _build(unflatten(merged))


def flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    """
    Flattens nested dictionaries into dotted keys.

    Args:
        tree (dict): Nested mapping.
        prefix (str): Key prefix used during recursion.

    Returns:
        dict[str, Any]: Flat mapping.
    """
    flat = {}
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat


def unflatten(flat: dict[str, Any]) -> dict:
    """
    Rebuilds a nested mapping from dotted keys.

    Args:
        flat (dict[str, Any]): Mapping with keys like "grid.n".

    Returns:
        dict: Nested mapping.

    Raises:
        BadArguments: If a key has no section.
    """
    tree: dict = {}
    for dotted, value in flat.items():
        if "." not in dotted:
            raise BadArguments(f"Configuration key '{dotted}' has no section")
        section, key = dotted.split(".", 1)
        tree.setdefault(section, {})[key] = value
    return tree


def parse_key_value_text(text: str) -> dict[str, Any]:
    """
    Parses the flat key=value configuration format ('#' starts a comment).

    Values are parsed as YAML scalars so numbers, booleans and "null" keep their types.

    Args:
        text (str): File contents.

    Returns:
        dict[str, Any]: Dotted keys to values.

    Raises:
        BadArguments: On a line without '='.
    """
    pairs = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadArguments(f"Config line {number} is not key=value: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs[key] = yaml.safe_load(value) if value else None
    return pairs


def _build(tree: dict) -> LabConfig:
    try:
        return LabConfig(**tree)
    except ValidationError as e:
        raise BadArguments(f"Invalid configuration: {e}") from e


def load_config(config_path: str | None = None, overrides: dict[str, Any] | None = None) -> LabConfig:
    """
    Resolves the configuration: flags > key=value file > lab_profile.yaml defaults.

    Args:
        config_path (str | None): Optional key=value configuration file.
        overrides (dict[str, Any] | None): Dotted-key values from command-line flags;
            None values are ignored.

    Returns:
        LabConfig: The resolved configuration.

    Raises:
        BadArguments: If the file is missing or a value is invalid.
    """
    defaults = yaml.safe_load(PROFILE_YAML.read_text()) if PROFILE_YAML.exists() else {}
    merged = flatten(defaults or {})
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise BadArguments(f"Config file not found: {config_path}")
        merged.update(parse_key_value_text(path.read_text(encoding="utf-8")))
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return _build(unflatten(merged))
