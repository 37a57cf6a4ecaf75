from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from tqdm import tqdm

from forward.fate import fate_stopper, run_fate, resolve_fate
from forward.solver import evolve
from model.config import FateParams, SolverParams, ThresholdParams
from model.errors import BudgetExhausted, NumericFailure
from model.grid import Field, Grid
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity
from model.trajectory import Fate, Trajectory
from steady.ground_state import ground_state_newton
from threshold.families import Family

# Halving below this without reaching extinction means the family is degenerate.
L_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class ThresholdResult:
    """
    Certified bracket of the sharp threshold of a family.

    Attributes:
        family (Family): The family that was bisected.
        L_lo (float): Largest parameter certified extinct.
        L_hi (float): Smallest parameter certified invading.
        mid_traj (Trajectory): Evolution of datum((L_lo + L_hi) / 2).
        steady (Field): Steady state the mid trajectory is compared with.
        distances (np.ndarray): ||u(t) - steady||_sup at the stored times of mid_traj.
        trials (int): Number of fate trials.
        escalation (int): Largest T_max multiplier used.
    """
    family: Family = field(repr=False)
    L_lo: float
    L_hi: float
    mid_traj: Trajectory = field(repr=False)
    steady: Field = field(repr=False)
    distances: np.ndarray = field(repr=False)
    trials: int = 0
    escalation: int = 1

    @property
    def L_star(self) -> float:
        return 0.5 * (self.L_lo + self.L_hi)

    @property
    def dist_to_W(self) -> float:
        return float(np.min(self.distances))

    @property
    def t_closest(self) -> float:
        return float(self.mid_traj.times[int(np.argmin(self.distances))])

    def to_dict(self) -> dict:
        return {
            **self.family.to_dict(),
            "L_lo": self.L_lo,
            "L_hi": self.L_hi,
            "L_star": self.L_star,
            "dist_to_W": self.dist_to_W,
            "t_closest": self.t_closest,
            "trials": self.trials,
            "escalation": self.escalation,
        }


def default_steady(nl: Nonlinearity, grid: Grid) -> Field:
    """Centered steady state of the discrete problem, seeded by the quadrature ground state."""
    return ground_state_newton(nl, grid).W


def settle_fate(nl: Nonlinearity, grid: Grid, u0: Field, solver: SolverParams, fate: FateParams,
                max_escalation: int, store_stride: Optional[int] = None, start: int = 1) -> tuple[Fate, int]:
    """
    Runs u0 to a certified fate, doubling T_max while it stays undecided.

    Args:
        nl (Nonlinearity): Reaction term.
        grid (Grid): Mesh.
        u0 (Field): Initial datum.
        solver (SolverParams): Base time stepping; T_max is multiplied.
        fate (FateParams): Calibrated certificate parameters.
        max_escalation (int): Largest allowed T_max multiplier.
        store_stride (int | None): Storage stride of the trial.
        start (int): First multiplier.

    Returns:
        tuple[Fate, int]: The certified fate and the multiplier that settled it.

    Raises:
        BudgetExhausted: If the fate is undecided at the largest multiplier.
    """
    multiplier = start
    while True:
        params = solver.model_copy(update={"T_max": solver.T_max * multiplier})
        result, _ = run_fate(nl, grid, u0, params, fate, store_stride=store_stride)
        if result.certified:
            return result, multiplier
        multiplier *= 2
        if multiplier > max_escalation:
            raise BudgetExhausted(f"Fate still undecided at T_max={params.T_max:g}")
        lab_log("TRIAL", f"undecided, escalating T_max to {solver.T_max * multiplier:g}")


class _Trials:
    """Fate trials with T_max escalation; tracks the bracket reached so far."""

    def __init__(self, family: Family, nl: Nonlinearity, solver: SolverParams, fate: FateParams,
                 threshold: ThresholdParams):
        self.family = family
        self.nl = nl
        self.solver = solver
        self.fate = fate
        self.threshold = threshold
        self.lo: Optional[float] = None
        self.hi: Optional[float] = None
        self.count = 0
        self.escalation = 1

    def __call__(self, L: float) -> Fate:
        try:
            result, multiplier = settle_fate(self.nl, self.family.grid, self.family.datum(L), self.solver, self.fate,
                                             self.threshold.max_escalation, self.threshold.trial_stride,
                                             start=self.escalation)
        except BudgetExhausted as e:
            bracket = None if self.lo is None or self.hi is None else (self.lo, self.hi)
            raise BudgetExhausted(f"L={L:.12g}: {e}; bracket reached {bracket}", bracket=bracket) from e
        finally:
            self.count += 1
        self.escalation = max(self.escalation, multiplier)
        if result.kind == "extinction":
            self.lo = L
        else:
            self.hi = L
        lab_log("TRIAL", f"L={L:.12g} -> {result.kind} at t={result.time:g}")
        return result


def _bracket(trial: _Trials, threshold: ThresholdParams) -> None:
    L = threshold.L_start
    if trial(L).kind == "invasion":
        while trial.lo is None:
            L *= 0.5
            if L < L_FLOOR:
                raise NumericFailure(f"{trial.family.label} invades for every L down to {L_FLOOR:g}")
            trial(L)
        return
    while trial.hi is None:
        if L >= threshold.L_cap:
            raise BudgetExhausted(f"No invasion for {trial.family.label} up to L_cap={threshold.L_cap:g}",
                                  bracket=(trial.lo, float("inf")))
        L = min(2.0 * L, threshold.L_cap)
        trial(L)


def find_critical_length(family: Family, nl: Nonlinearity, solver: SolverParams, fate: FateParams,
                         threshold: ThresholdParams, tol_L: float, steady: Optional[Field] = None,
                         progress: bool = False) -> ThresholdResult:
    """
    Brackets the sharp threshold of a monotone family and bisects it down to tol_L.

    Every trial is a full evolution with a certified fate; undecided trials are rerun with
    T_max doubled up to threshold.max_escalation. The mid datum is then evolved and its
    distance to the steady state recorded at every stored time.

    Args:
        family (Family): Monotone family of data.
        nl (Nonlinearity): Reaction term.
        solver (SolverParams): Time stepping; T_max is the base trial horizon.
        fate (FateParams): Certificate parameters; the invasion box is calibrated when unset.
        threshold (ThresholdParams): Bracketing and escalation limits.
        tol_L (float): Target bracket width.
        steady (Field | None): Reference steady state; defaults to the centered ground state.
        progress (bool): Show a tqdm bar over the bisection.

    Returns:
        ThresholdResult: The certified bracket with its mid trajectory.

    Raises:
        BudgetExhausted: If L_cap is reached or a trial stays undecided.
    """
    grid = family.grid
    fate = resolve_fate(nl, grid, solver, fate)
    trial = _Trials(family, nl, solver, fate, threshold)
    _bracket(trial, threshold)
    steps = max(0, int(np.ceil(np.log2(max(trial.hi - trial.lo, tol_L) / tol_L))))
    with tqdm(total=steps, desc=f"bisect {family.label}", disable=not progress, leave=False) as bar:
        while trial.hi - trial.lo > tol_L:
            trial(0.5 * (trial.lo + trial.hi))
            bar.update(1)
    lab_log("INFO", f"{family.label}: L* in [{trial.lo:.12g}, {trial.hi:.12g}] after {trial.count} trials")

    if steady is None:
        steady = default_steady(nl, grid)
    L_mid = 0.5 * (trial.lo + trial.hi)
    params = solver.model_copy(update={"T_max": solver.T_max * trial.escalation})
    mid = evolve(nl, grid, family.datum(L_mid), params, stop_when=fate_stopper(nl, grid, fate))
    distances = np.max(np.abs(mid.values - steady.values[None, :]), axis=1)
    return ThresholdResult(family, trial.lo, trial.hi, mid, steady, distances, trial.count, trial.escalation)


def threshold_trajectory(result: ThresholdResult, splice_tol: float, tol_W: float) -> Trajectory:
    """
    The mid trajectory truncated at T_c and handed over to the steady state.

    T_c is the first stored time with ||u - W||_sup < splice_tol, or the closest approach
    when that is still within tol_W.

    Args:
        result (ThresholdResult): From find_critical_length.
        splice_tol (float): Hand-over distance.
        tol_W (float): Largest acceptable closest approach.

    Returns:
        Trajectory: Spliced at T_c with steady_state = W.

    Raises:
        NumericFailure: If the mid trajectory never comes within tol_W of W.
    """
    close = np.flatnonzero(result.distances < splice_tol)
    if close.size:
        k = int(close[0])
    elif result.dist_to_W <= tol_W:
        k = int(np.argmin(result.distances))
    else:
        raise NumericFailure(
            f"Mid trajectory stays {result.dist_to_W:.3e} > tol_W={tol_W:g} from W: tighten tol_L"
        )
    t_c = float(result.mid_traj.times[k])
    lab_log("SPLICE", f"T_c={t_c:g} with ||u - W||_sup={result.distances[k]:.3e}")
    return result.mid_traj.spliced(t_c, result.steady)


def hover_time(traj: Trajectory, W: Field, band: float = 0.05) -> float:
    """
    Time spent by traj within band of W in sup norm.

    Counts the stored intervals whose two end samples are both within the band.
    """
    dist = np.max(np.abs(traj.values - W.values[None, :]), axis=1)
    inside = dist < band
    return float(np.sum(np.diff(traj.times)[inside[:-1] & inside[1:]]))
