from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from floquet.bundle import (
    FloquetBundle,
    compute_bundle,
    frozen_trajectory,
    pairing,
    propagate_forward,
    solve_adjoint,
)
from forward.solver import evolve
from model.config import FloquetParams, SolverParams
from model.errors import BadArguments, BudgetExhausted, NumericFailure
from model.grid import Field
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity
from model.trajectory import Trajectory
from steady.eigen import principal_eigenpair
from steady.ground_state import GroundState, ground_state, ground_state_newton, pde_residual

DECAY_FACTOR = 0.9
ENVELOPE_SLACK = 1.01
DOUBLING_TOL = 1e-6
DISCRETE_RESIDUAL = 1e-8


def pairing_drift(bundle: FloquetBundle) -> np.ndarray:
    """|int p(t) v(t) dx - 1| at every stored time."""
    return np.array([abs(pairing(bundle.p, bundle.v, k) - 1.0) for k in range(bundle.p.times.size)])


def convergence_to_phi(bundle: FloquetBundle) -> np.ndarray:
    """d(t) = ||p(t)/||p(t)||_sup - phi||_sup at every stored time."""
    phi = bundle.eigen.phi.values
    return np.array([float(np.max(np.abs(bundle.p.normalized(k) - phi))) for k in range(bundle.p.times.size)])


def growth_rate(traj: Trajectory, t_from: Optional[float] = None, t_to: Optional[float] = None) -> float:
    """
    Least-squares slope of ln ||u(t)||_sup over [t_from, t_to].

    Raises:
        NumericFailure: With fewer than two samples in the window.
    """
    t = traj.times
    lo = t[0] if t_from is None else t_from
    hi = t[-1] if t_to is None else t_to
    keep = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if keep.sum() < 2:
        raise NumericFailure(f"Growth-rate window [{lo}, {hi}] holds fewer than two samples")
    slope, _ = np.polyfit(t[keep], traj.log_sup()[keep], 1)
    return float(slope)


def duality_drift(bundle: FloquetBundle, udot: Trajectory) -> float:
    """max_t |int p(t) udot(t) dx - int p(0) udot(0) dx| for a linearized solution udot."""
    if udot.times.shape != bundle.p.times.shape:
        raise BadArguments("udot must be stored on the bundle's time grid")
    base = pairing(bundle.p, udot, 0)
    return float(max(abs(pairing(bundle.p, udot, k) - base) for k in range(udot.times.size)))


@dataclass(frozen=True)
class DecayReport:
    """
    Envelope check p(t, x) <= C exp(-delta |x|) ||p(t)||_sup on the outer half.

    Attributes:
        delta (float): 0.9 * sqrt(|f'(0)|).
        constant (float): Largest envelope constant C over stored times.
        failures_before_splice (int): Times before T_splice where the envelope grows outward.
        failures_after_splice (int): Same, from T_splice on.
        passed (bool): No failure from T_splice on.
    """
    delta: float
    constant: float
    failures_before_splice: int
    failures_after_splice: int
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def spatial_decay_report(bundle: FloquetBundle, nl: Nonlinearity) -> DecayReport:
    """
    Checks that p decays at least like exp(-delta |x|) on the outer half of the domain.

    At each stored time the envelope p(x) exp(delta |x|) must peak at the inner edge of the
    outer half (within 1%). Failures before the splice are counted, not raised.

    Args:
        bundle (FloquetBundle): The bundle.
        nl (Nonlinearity): Reaction term (supplies f'(0)).

    Returns:
        DecayReport: The envelope statistics.
    """
    grid = bundle.p.grid
    delta = DECAY_FACTOR * float(np.sqrt(abs(nl.f0_prime(0.0))))
    dist = np.abs(grid.nodes - 0.5 * (grid.x_min + grid.x_max))
    edge = 0.25 * grid.width
    outer = dist >= edge
    inner_edge = outer & (dist < edge + grid.dx)
    weight = np.exp(delta * dist[outer])
    constant, before, after = 0.0, 0, 0
    for k, t in enumerate(bundle.p.times):
        envelope = bundle.p.normalized(k) * np.exp(delta * dist)
        peak = float(np.max(envelope[outer]))
        constant = max(constant, float(np.max(bundle.p.normalized(k)[outer] * weight)))
        if peak > ENVELOPE_SLACK * float(np.max(envelope[inner_edge])):
            if t < bundle.T_splice:
                before += 1
            else:
                after += 1
    if before:
        lab_log("WARN", f"decay envelope exceeded at {before} stored times before the splice")
    return DecayReport(delta, constant, before, after, after == 0)


@dataclass(frozen=True, eq=False)
class SeparationReport:
    """
    Relative decay of a linearized solution started orthogonally to p(0).

    Attributes:
        gamma_fit (float): Negative slope of ln(||udot||_sup / ||v||_sup); inf when h0 = 0.
        times (np.ndarray): Stored times.
        curve (np.ndarray): ln(||udot(t)||_sup / ||v(t)||_sup) (zeros when h0 = 0).
        projected_pairing (float): int p(0) h0 dx after projection.
        udot (Trajectory | None): The linearized solution.
    """
    gamma_fit: float
    times: np.ndarray = field(repr=False)
    curve: np.ndarray = field(repr=False)
    projected_pairing: float = 0.0
    udot: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def degenerate(self) -> bool:
        return not np.isfinite(self.gamma_fit)


def project_out_bundle(bundle: FloquetBundle, h: Field) -> Field:
    """h0 = h - (int p(0) h dx) v(0), so that int p(0) h0 dx = 0."""
    s = bundle.p0().dot(h)
    return Field(h.grid, h.values - s * bundle.v0().values)


def separation_rate(traj: Trajectory, nl: Nonlinearity, bundle: FloquetBundle, h: Field,
                    solver: SolverParams, fit_drop: float = 20.0) -> SeparationReport:
    """
    Measures the exponential separation rate gamma along traj.

    h is projected so that its pairing with p(0) vanishes, evolved by the linearized
    equation, and ln(||udot||_sup / ||v||_sup) is fitted by least squares after a transient
    of 2/|lambda| until it has dropped by fit_drop.

    Args:
        traj (Trajectory): Spliced trajectory of the bundle.
        nl (Nonlinearity): Reaction term.
        bundle (FloquetBundle): Normalized bundle.
        h (Field): Test direction.
        solver (SolverParams): Same solver settings as the bundle.
        fit_drop (float): Log-decrease covered by the fit window.

    Returns:
        SeparationReport: gamma_fit and the curve.

    Raises:
        NumericFailure: If the fit window holds fewer than three samples.
    """
    h0 = project_out_bundle(bundle, h)
    times = bundle.v.times
    if np.max(np.abs(h0.values)) <= 1e-12 * max(float(np.max(np.abs(h.values))), 1e-300):
        return SeparationReport(float("inf"), times, np.zeros_like(times))
    udot = propagate_forward(traj, nl, h0, solver, bundle.T_end, name="udot", require_positive=False)
    curve = udot.log_sup() - bundle.v.log_sup()
    skip = 2.0 / abs(bundle.eigen.lam)
    start = int(np.searchsorted(times, min(skip, 0.5 * times[-1])))
    below = np.flatnonzero(curve[start:] < curve[start] - fit_drop)
    stop = start + (int(below[0]) if below.size else curve.size - start)
    if stop - start < 3:
        raise NumericFailure("Degenerate separation fit window")
    slope, _ = np.polyfit(times[start:stop], curve[start:stop], 1)
    return SeparationReport(float(-slope), times, curve, bundle.p0().dot(h0), udot)


def adjoint_uniqueness_gap(traj: Trajectory, nl: Nonlinearity, bundle: FloquetBundle,
                           solver: SolverParams, floquet: FloquetParams) -> float:
    """
    Sup distance between normalized p(0) from the terminal data phi and the constant 1.

    Returns:
        float: ||p_phi(0)/sup - p_one(0)/sup||_sup.
    """
    grid = traj.grid
    one = Field.constant(grid, 1.0)
    other = solve_adjoint(traj, nl, bundle.eigen, solver, floquet, terminal=one, T_end=bundle.T_end)
    return float(np.max(np.abs(bundle.p.normalized(0) - other.normalized(0))))


@dataclass(frozen=True)
class DoublingReport:
    """
    Domain-doubling sensitivity of the normalized p(0).

    Attributes:
        distance (float): sup distance on the original window.
        tolerance (float): Pass threshold.
        passed (bool): distance <= tolerance.
        x_max (float): Original half-width.
    """
    distance: float
    tolerance: float
    passed: bool
    x_max: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _extend(field_: Field, grid) -> Field:
    offset = (grid.n - field_.grid.n) // 2
    values = np.zeros(grid.n)
    values[offset:offset + field_.grid.n] = field_.values
    return Field(grid, values)


def _doubled_steady(nl: Nonlinearity, steady: Field, big) -> GroundState:
    """Steady state on the doubled grid, solved the same way as the original one."""
    if nl.homogeneous and pde_residual(nl, steady) > DISCRETE_RESIDUAL:
        return ground_state(nl, big)
    # discrete steady state: keep the discretization of the original splice
    return ground_state_newton(nl, big, seed=_extend(steady, big))


def domain_doubling_check(traj: Trajectory, nl: Nonlinearity, bundle: FloquetBundle, solver: SolverParams,
                          floquet: FloquetParams, tolerance: float = DOUBLING_TOL) -> DoublingReport:
    """
    Recomputes the bundle on a domain twice as wide and compares normalized p(0).

    The trajectory is re-evolved from its initial datum (zero-extended) up to T_splice
    and spliced onto the steady state of the doubled domain, computed by the same
    method (quadrature or discrete Newton) as traj.steady_state.

    Args:
        traj (Trajectory): Spliced trajectory on the original grid.
        nl (Nonlinearity): Reaction term.
        bundle (FloquetBundle): Bundle on the original grid.
        solver (SolverParams): Solver settings.
        floquet (FloquetParams): memory_budget_mb and terminal_efolds.
        tolerance (float): Pass threshold for the sup distance.

    Returns:
        DoublingReport: distance and verdict.

    Raises:
        BadArguments: If the grid has an even node count (windows would not align).
        BudgetExhausted: If the doubled bundle exceeds the memory budget.
    """
    grid = traj.grid
    if grid.n % 2 == 0:
        raise BadArguments("Domain doubling needs an odd node count")
    big = grid.doubled()
    rows = int(bundle.T_end / (solver.dt * solver.store_stride)) + 2
    needed_mb = 8.0 * big.n * (traj.times.size + 2 * rows) / 2 ** 20
    if needed_mb > floquet.memory_budget_mb:
        raise BudgetExhausted(f"Doubled bundle needs {needed_mb:.0f} MB > budget {floquet.memory_budget_mb:g} MB")

    steady = _doubled_steady(nl, traj.steady_state, big)
    if traj.times.size == 1 and traj.splice_time == traj.t0:
        big_traj = frozen_trajectory(steady)
    else:
        u0 = _extend(traj.field(0), big)
        params = solver.model_copy(update={"T_max": traj.splice_time})
        big_traj = evolve(nl, big, u0, params).spliced(traj.splice_time, steady.W)
    eigen = principal_eigenpair(nl, big, steady.W)
    big_bundle = compute_bundle(big_traj, nl, eigen, solver, floquet, T_end=bundle.T_end)
    offset = (big.n - grid.n) // 2
    window = big_bundle.p.values[0][offset:offset + grid.n]
    distance = float(np.max(np.abs(bundle.p.normalized(0) - window / np.max(np.abs(window)))))
    lab_log("VERIFY", f"domain doubling: distance={distance:.3e} (tol {tolerance:g})")
    return DoublingReport(distance, tolerance, distance <= tolerance, grid.x_max)


def bundle_with_diagnostics(traj: Trajectory, nl: Nonlinearity, solver: SolverParams, floquet: FloquetParams,
                            eigen=None, h: Optional[Field] = None) -> tuple[FloquetBundle, dict]:
    """
    Bundle plus the report used by the adjoint subcommand.

    Returns:
        tuple[FloquetBundle, dict]: Bundle (with uniqueness gap and optional gamma) and the report.
    """
    if eigen is None:
        eigen = principal_eigenpair(nl, traj.grid, traj.steady_state)
    bundle = compute_bundle(traj, nl, eigen, solver, floquet)
    gap = adjoint_uniqueness_gap(traj, nl, bundle, solver, floquet)
    gamma = None
    if h is not None:
        gamma = separation_rate(traj, nl, bundle, h, solver).gamma_fit
    bundle = replace(bundle, uniqueness_gap=gap, separation_rate=gamma)
    drift = float(np.max(pairing_drift(bundle)))
    if drift > floquet.tol_pair:
        lab_log("WARN", f"pairing drift {drift:.3e} exceeds tol_pair {floquet.tol_pair:g}")
    report = {
        "lambda": eigen.lam,
        "T_splice": bundle.T_splice,
        "T_end": bundle.T_end,
        "pairing_drift": drift,
        "uniqueness_gap": gap,
        "gamma_fit": gamma,
    }
    return bundle, report
