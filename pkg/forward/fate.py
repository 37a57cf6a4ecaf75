from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from forward.solver import evolve
from model.config import FateParams, SolverParams
from model.errors import BadArguments, NumericFailure
from model.grid import Field, Grid, indicator
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity
from model.trajectory import Fate, Trajectory

BOUNDARY_TOL = 1e-8
OUTER_FRACTION = 0.1


def _widest_run(mask: np.ndarray) -> tuple[int, int]:
    """Returns (start, stop) of the longest run of True in mask, (0, 0) when empty."""
    if not mask.any():
        return 0, 0
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    starts, stops = edges[::2], edges[1::2]
    k = int(np.argmax(stops - starts))
    return int(starts[k]), int(stops[k])


def certify(nl: Nonlinearity, grid: Grid, t: float, u: np.ndarray, fate: FateParams) -> Optional[Fate]:
    """
    Tries to certify the fate of one profile.

    Extinction: sup u < theta*(1 - delta), so the spatially constant supersolution decays.
    Invasion: u >= alpha_inv on a run of nodes of half-width >= R_inv, so u lies above a
    calibrated invading box datum.

    Args:
        nl (Nonlinearity): Reaction term.
        grid (Grid): Mesh.
        t (float): Sample time.
        u (np.ndarray): Node values.
        fate (FateParams): Certificate parameters with alpha_inv and R_inv set.

    Returns:
        Fate | None: The certified fate, or None when neither certificate holds.
    """
    sup_u = float(np.max(u))
    if sup_u < nl.theta * (1.0 - fate.delta):
        return Fate("extinction", t, sup_u)
    start, stop = _widest_run(u >= fate.alpha_inv)
    if stop > start:
        half = 0.5 * (stop - 1 - start) * grid.dx
        if half >= fate.R_inv:
            return Fate("invasion", t, sup_u, float(np.min(u[start:stop])), half)
    return None


def _require_box(fate: FateParams) -> None:
    if fate.alpha_inv is None or fate.R_inv is None:
        raise BadArguments("Invasion box is not calibrated: set fate.alpha_inv and fate.R_inv")


def fate_stopper(nl: Nonlinearity, grid: Grid, fate: FateParams) -> Callable[[float, np.ndarray], bool]:
    """Predicate for evolve(stop_when=...) that ends a run at the first certified sample."""
    _require_box(fate)
    return lambda t, u: certify(nl, grid, t, u, fate) is not None


def classify_fate(traj: Trajectory, nl: Nonlinearity, fate: FateParams) -> Fate:
    """
    Certifies the fate of a computed trajectory at its earliest certifiable sample.

    Args:
        traj (Trajectory): The stored solution.
        nl (Nonlinearity): The reaction term used to compute it.
        fate (FateParams): Certificate parameters (calibrated box required).

    Returns:
        Fate: Extinction or Invasion with t_cert, or Undecided at the final time.
    """
    _require_box(fate)
    for k, t in enumerate(traj.times):
        found = certify(nl, traj.grid, float(t), traj.values[k], fate)
        if found is not None:
            return found
    last = traj.values[-1]
    start, stop = _widest_run(last >= fate.alpha_inv)
    box_min = float(np.min(last[start:stop])) if stop > start else 0.0
    return Fate("undecided", traj.t_end, float(np.max(last)), box_min, 0.5 * max(stop - start - 1, 0) * traj.grid.dx)


def run_fate(nl: Nonlinearity, grid: Grid, u0, params: SolverParams, fate: FateParams,
               store_stride: Optional[int] = None) -> tuple[Fate, Trajectory]:
    """
    Evolves u0 until its fate is certified or T_max is reached.

    Returns:
        tuple[Fate, Trajectory]: The fate and the (possibly early-stopped) trajectory.
    """
    traj = evolve(nl, grid, u0, params, stop_when=fate_stopper(nl, grid, fate), store_stride=store_stride)
    return classify_fate(traj, nl, fate), traj


def calibrate_invasion_box(nl: Nonlinearity, grid: Grid, params: SolverParams, fate: FateParams,
                           alpha: Optional[float] = None, R_start: float = 1.0) -> tuple[float, float]:
    """
    Finds a box datum alpha*1_(-R, R) that provably invades.

    The box is certified once u >= 1 - delta on the doubled box [-2R, 2R]: the solution
    then dominates its own initial datum, so it increases in time by comparison.
    R doubles from R_start until that happens within T_max.

    Args:
        nl (Nonlinearity): Reaction term.
        grid (Grid): Mesh (the doubled box must fit inside it).
        params (SolverParams): Time stepping parameters.
        fate (FateParams): Supplies delta.
        alpha (float | None): Box height; defaults to (beta* + 1) / 2.
        R_start (float): First half-width tried.

    Returns:
        tuple[float, float]: (alpha_inv, R_inv).

    Raises:
        BadArguments: If alpha <= beta* or alpha >= 1.
        NumericFailure: If no box within the domain invades before T_max.
    """
    alpha = 0.5 * (nl.beta_star + 1.0) if alpha is None else float(alpha)
    if not nl.beta_star < alpha < 1.0:
        raise BadArguments(f"Invasion box height must lie in (beta*, 1) = ({nl.beta_star:.6f}, 1), got {alpha}")
    center = 0.5 * (grid.x_min + grid.x_max)
    x = grid.nodes
    R = R_start
    while center + 2.0 * R < grid.x_max - grid.dx:
        window = np.abs(x - center) <= 2.0 * R
        u0 = Field(grid, alpha * indicator(grid, [(center - R, center + R)]).values)

        def decided(t, u, window=window):
            return bool(np.max(u) < nl.theta * (1.0 - fate.delta) or np.min(u[window]) >= 1.0 - fate.delta)

        traj = evolve(nl, grid, u0, params, stop_when=decided)
        last = traj.values[-1]
        if np.min(last[window]) >= 1.0 - fate.delta:
            lab_log("CALIB", f"alpha_inv={alpha:.6f} R_inv={R:g} certified at t={traj.t_end:g}")
            return alpha, R
        lab_log("CALIB", f"R={R:g} did not invade by t={traj.t_end:g} (sup={np.max(last):.4f}); doubling")
        R *= 2.0
    raise NumericFailure("Invasion box calibration failed: increase solver.T_max or grid.x_max")


def resolve_fate(nl: Nonlinearity, grid: Grid, params: SolverParams, fate: FateParams) -> FateParams:
    """Returns fate parameters with the invasion box filled in, calibrating when unset."""
    if fate.alpha_inv is not None and fate.R_inv is not None:
        return fate
    alpha, R = calibrate_invasion_box(nl, grid, params, fate, alpha=fate.alpha_inv)
    return fate.model_copy(update={"alpha_inv": alpha, "R_inv": R})


@dataclass(frozen=True)
class TruncationReport:
    """
    Outcome of the truncated-domain validity check.

    Attributes:
        passed (bool): Both criteria hold.
        sign_ok (bool): d_u f(x, u) <= 0 on the outer band at every stored time.
        boundary_ok (bool): u < 1e-8 at the boundary nodes at every stored time.
        worst_x (float): Location of the worst offender.
        worst_t (float): Time of the worst offender.
        worst_value (float): Its value (d_u f or u, depending on the failing criterion).
        message (str): Human readable verdict.
    """
    passed: bool
    sign_ok: bool
    boundary_ok: bool
    worst_x: float
    worst_t: float
    worst_value: float
    message: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def truncation_check(traj: Trajectory, nl: Nonlinearity) -> TruncationReport:
    """
    Checks that the truncated domain behaves like the whole line.

    On the outer 10% of each half of the domain d_u f(x, u(t,x)) must be <= 0, and the
    boundary nodes (first interior nodes for Dirichlet, boundary nodes for Neumann) must
    stay below 1e-8 at every stored time.

    Args:
        traj (Trajectory): Stored solution.
        nl (Nonlinearity): Its reaction term.

    Returns:
        TruncationReport: pass/fail with the worst offender.
    """
    grid = traj.grid
    x = grid.nodes
    center = 0.5 * (grid.x_min + grid.x_max)
    outer = np.abs(x - center) >= (1.0 - OUTER_FRACTION) * 0.5 * grid.width
    edge_nodes = np.array([1, grid.n - 2]) if grid.bc == "dirichlet_zero" else np.array([0, grid.n - 1])

    slopes = nl.multiplier(x[outer]) * nl.f0_prime(traj.values[:, outer])
    k_s, i_s = np.unravel_index(int(np.argmax(slopes)), slopes.shape)
    worst_slope = float(slopes[k_s, i_s])
    edge = traj.values[:, edge_nodes]
    k_b, i_b = np.unravel_index(int(np.argmax(edge)), edge.shape)
    worst_edge = float(edge[k_b, i_b])

    sign_ok = worst_slope <= 0.0
    boundary_ok = worst_edge < BOUNDARY_TOL
    if not boundary_ok:
        worst = (float(x[edge_nodes[i_b]]), float(traj.times[k_b]), worst_edge)
        message = f"boundary value {worst_edge:.3e} >= {BOUNDARY_TOL:g}: enlarge x_max"
    elif not sign_ok:
        worst = (float(x[outer][i_s]), float(traj.times[k_s]), worst_slope)
        message = f"d_u f = {worst_slope:.3e} > 0 in the outer band: enlarge x_max"
    else:
        worst = (float(x[outer][i_s]), float(traj.times[k_s]), worst_slope)
        message = "truncation valid"
    return TruncationReport(sign_ok and boundary_ok, sign_ok, boundary_ok, *worst, message)
