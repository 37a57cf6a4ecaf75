from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter1d

from floquet.bundle import compute_bundle
from forward.fate import resolve_fate
from model.config import FateParams, FloquetParams, OptimizerParams, SolverParams, ThresholdParams
from model.errors import NotConverged
from model.grid import Field, Grid, norms
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity
from steady.eigen import EigenPair, principal_eigenpair
from steady.ground_state import GroundState
from threshold.bisection import ThresholdResult, default_steady, find_critical_length, threshold_trajectory
from threshold.families import Family

# Datum values strictly inside (0, 1) beyond this margin count as intermediate.
INTERMEDIATE = 1e-9
# Smallest blending step before the search gives up.
MIN_STEP = 1.0 / 64.0


def j_prime(u: np.ndarray, optimizer: OptimizerParams) -> np.ndarray:
    """Derivative of the cost density: 1 for j(u) = u, 1 + kappa u for the quadratic one."""
    if optimizer.j == "linear":
        return np.ones_like(u)
    return 1.0 + optimizer.kappa * u


def cost(u0: Field, optimizer: OptimizerParams) -> float:
    """int j(u0) dx."""
    u = u0.values
    density = u if optimizer.j == "linear" else u + 0.5 * optimizer.kappa * u * u
    return float(u0.grid.dx * np.sum(density))


def mass_of_ground_state(steady: GroundState) -> float:
    """
    int W dx: rectangle rule on the grid, continued past both ends.

    Beyond each end W(x) = W(end) exp(-sqrt(|f'(0)|) |x - end|), so the missing nodes
    add the geometric sum W(end) q / (1 - q) with q = exp(-sqrt(|f'(0)|) dx).
    """
    W = steady.W
    q = float(np.exp(-steady.decay_rate * W.grid.dx))
    tails = (W.values[0] + W.values[-1]) * q / (1.0 - q)
    return float(W.grid.dx * (np.sum(W.values) + tails))


@dataclass(frozen=True)
class NotMinimizerReport:
    """
    For u0 = W the adjoint at t = 0 is proportional to phi; the bathtub condition would force
    phi to be constant on {0 < W < 1}.

    Attributes:
        spread (float): max phi - min phi on |x| <= x_max / 2 (phi sup-normalized).
        mass_W (float): int W dx.
        certified (bool): spread > 0.
    """
    spread: float
    mass_W: float
    certified: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ground_state_not_minimizer(steady: GroundState, eigen: EigenPair) -> NotMinimizerReport:
    grid = steady.grid
    window = np.abs(grid.nodes - 0.5 * (grid.x_min + grid.x_max)) <= 0.25 * grid.width
    phi = eigen.phi.values[window]
    spread = float(phi.max() - phi.min())
    return NotMinimizerReport(spread, mass_of_ground_state(steady), spread > 1e-6)


@dataclass(frozen=True, eq=False)
class BathtubResult:
    """
    Outcome of the bathtub search.

    Attributes:
        u0_opt (Field): Final datum, at its sharp threshold.
        c (float): Multiplier of the datum's own adjoint, relative to sup p(0).
        mass (float): int u0_opt dx.
        iterations (int): Trial data evaluated.
        kkt_violation (float): Mass of {0 < u0 < 1} where c j'(u0) lies outside the range of p(0) over the
            node cell widened by kkt_tol.
        min_on (float): min of p(0)/sup p(0) over {u0 = 1}.
        max_off (float): max of p(0)/sup p(0) over {u0 = 0, |x| <= x_max/2}.
        converged (bool): Whether the level sets stopped moving with the sandwich satisfied.
        history (list[float]): Mass of every trial datum.
    """
    u0_opt: Field = field(repr=False)
    c: float
    mass: float
    iterations: int
    kkt_violation: float
    min_on: float
    max_off: float
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)

    def sandwich_holds(self, kkt_tol: float) -> bool:
        """min over {u0 = 1} >= c - kkt_tol >= max over {u0 = 0} - 2 kkt_tol."""
        return self.min_on >= self.c - kkt_tol >= self.max_off - 2.0 * kkt_tol

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "mass": self.mass,
            "iterations": self.iterations,
            "kkt_violation": self.kkt_violation,
            "min_on": self.min_on,
            "max_off": self.max_off,
            "converged": self.converged,
        }


def seed_ranking(u0: Field, width: float) -> Field:
    """
    Gaussian-smoothed, sup-normalized seed datum.

    Its superlevel sets rank the points of the seed from the core outward, so it can
    be blended with an adjoint profile.

    Args:
        u0 (Field): Seed datum.
        width (float): Standard deviation of the Gaussian, in x units.

    Returns:
        Field: Ranking with sup 1.
    """
    smooth = gaussian_filter1d(u0.values, width / u0.grid.dx, mode="constant")
    return Field(u0.grid, smooth / np.max(smooth))


def _adjoint_at_start(result: ThresholdResult, nl: Nonlinearity, eigen: EigenPair, solver: SolverParams,
                      threshold: ThresholdParams, floquet: FloquetParams) -> Field:
    traj = threshold_trajectory(result, floquet.splice_tol, threshold.tol_W)
    p0 = compute_bundle(traj, nl, eigen, solver, floquet).p0()
    return Field(p0.grid, p0.values / np.max(np.abs(p0.values)))


def _kkt(u0: Field, p: Field, optimizer: OptimizerParams) -> tuple[float, float, float, float]:
    """Multiplier, violation mass, min over the set and max off it, against the datum's own adjoint p."""
    grid = u0.grid
    u, pv = u0.values, p.values
    middle = (u > INTERMEDIATE) & (u < 1.0 - INTERMEDIATE)
    on = u >= 1.0 - INTERMEDIATE
    window = np.abs(grid.nodes - 0.5 * (grid.x_min + grid.x_max)) <= 0.25 * grid.width
    off = (u <= INTERMEDIATE) & window
    min_on = float(pv[on].min()) if on.any() else float("inf")
    max_off = float(pv[off].max()) if off.any() else float("-inf")
    if middle.any():
        c = float(np.median(pv[middle] / j_prime(u[middle], optimizer)))
    else:
        c = 0.5 * (min_on + max_off) if np.isfinite(max_off) else min_on
    # range of the piecewise-linear p over each node cell
    mids = 0.5 * (pv[1:] + pv[:-1])
    left = np.concatenate([[pv[0]], mids])
    right = np.concatenate([mids, [pv[-1]]])
    lo = np.minimum(np.minimum(left, right), pv) - optimizer.kkt_tol
    hi = np.maximum(np.maximum(left, right), pv) + optimizer.kkt_tol
    target = c * j_prime(u, optimizer)
    off_balance = (target < lo) | (target > hi)
    violation = float(grid.dx * np.sum(middle & off_balance))
    return c, violation, min_on, max_off


def bathtub_optimize(nl: Nonlinearity, grid: Grid, init: Family, solver: SolverParams, fate: FateParams,
                     threshold: ThresholdParams, floquet: FloquetParams, optimizer: OptimizerParams,
                     tol_L: float, steady: Optional[Field] = None) -> BathtubResult:
    """
    Search for the cheapest datum (in int j(u0)) that is exactly at threshold.

    The anchor is the cheapest threshold datum found so far, with a ranking g (its level-set
    function) and its own adjoint p(0). A trial ranks points by (1 - s) g + s p(0), builds the
    family {rank > c} (linear j) or clip(j'^{-1}(rank/c), 0, 1) (quadratic j), and bisects c so
    the datum sits at its sharp threshold. A cheaper trial becomes the anchor and s doubles
    (up to 1, the plain fixed-point step); otherwise s halves. The seed's ranking is the seed
    datum smoothed over seed_smoothing.

    The search has converged when a trial moves less than fp_tol (symmetric-difference mass)
    from the anchor and satisfies the level-set sandwich against its own adjoint.

    Args:
        nl (Nonlinearity): Reaction term.
        grid (Grid): Mesh (dirichlet_zero).
        init (Family): Seed family; its threshold datum starts the search.
        solver (SolverParams): Time stepping.
        fate (FateParams): Certificate parameters.
        threshold (ThresholdParams): Bisection limits and tol_W.
        floquet (FloquetParams): Bundle settings.
        optimizer (OptimizerParams): j, kappa, kkt_tol, fp_tol, max_outer, seed_smoothing.
        tol_L (float): Bisection tolerance for the seed and for 1/c.
        steady (Field | None): Steady state; defaults to the discrete ground state.

    Returns:
        BathtubResult: The converged datum.

    Raises:
        NotConverged: After max_outer trials, or when the step falls below MIN_STEP; carries the
            cheapest datum found (converged=False).
        NumericFailure: Propagated from the inner threshold searches.
    """
    steady = default_steady(nl, grid) if steady is None else steady
    fate = resolve_fate(nl, grid, solver, fate)
    eigen = principal_eigenpair(nl, grid, steady)
    result = find_critical_length(init, nl, solver, fate, threshold, tol_L, steady=steady)
    anchor_u = init.datum(result.L_star)
    anchor_rank = seed_ranking(anchor_u, optimizer.seed_smoothing)
    anchor_p = _adjoint_at_start(result, nl, eigen, solver, threshold, floquet)
    anchor_cost = cost(anchor_u, optimizer)
    c, violation, min_on, max_off = _kkt(anchor_u, anchor_p, optimizer)
    best = BathtubResult(anchor_u, c, norms(anchor_u).l1, 0, violation, min_on, max_off, False)
    history: list[float] = []
    step = 1.0
    for it in range(1, optimizer.max_outer + 1):
        blend = (1.0 - step) * anchor_rank.values + step * anchor_p.values
        rank = Field(grid, blend / np.max(blend))
        family = Family.level_set(rank) if optimizer.j == "linear" else Family.graded(rank, optimizer.kappa)
        result = find_critical_length(family, nl, solver, fate, threshold, tol_L, steady=steady)
        u0 = family.datum(result.L_star)
        p_next = _adjoint_at_start(result, nl, eigen, solver, threshold, floquet)
        mass = norms(u0).l1
        history.append(mass)
        moved = float(grid.dx * np.sum(np.abs(u0.values - anchor_u.values)))
        c, violation, min_on, max_off = _kkt(u0, p_next, optimizer)
        current = BathtubResult(u0, c, mass, it, violation, min_on, max_off, False, list(history))
        lab_log("INFO", f"bathtub it={it}: step={step:g} mass={mass:.6f} moved={moved:.3e} kkt={violation:.3e} "
                        f"on>={min_on:.4f} c={c:.4f} off<={max_off:.4f}")
        if moved <= optimizer.fp_tol and violation <= optimizer.kkt_tol and current.sandwich_holds(optimizer.kkt_tol):
            return replace(current, converged=True)
        trial_cost = cost(u0, optimizer)
        if trial_cost < anchor_cost:
            anchor_u, anchor_rank, anchor_p, anchor_cost = u0, rank, p_next, trial_cost
            best = current
            step = min(1.0, 2.0 * step)
        else:
            step *= 0.5
            if step < MIN_STEP:
                break
    raise NotConverged(f"bathtub search stopped after {len(history)} trials without meeting the sandwich "
                       f"(best mass {best.mass:.6g})", best=replace(best, history=list(history)))
