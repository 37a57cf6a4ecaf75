from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from forward.solver import LinearPropagator, embed, rescale
from model.config import FloquetParams, SolverParams
from model.errors import BadArguments, NumericFailure
from model.grid import Field
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity, eval_fprime
from model.trajectory import Trajectory
from steady.eigen import EigenPair
from steady.ground_state import GroundState


@dataclass(frozen=True, eq=False)
class FloquetBundle:
    """
    Adjoint p and forward bundle v along a trajectory that hands over to W.

    Attributes:
        p (Trajectory): Backward solution, scaled so that the pairing with v is 1.
        v (Trajectory): Forward solution from phi / ||phi||_sup.
        eigen (EigenPair): Principal eigenpair at W.
        T_splice (float): Hand-over time of the trajectory.
        T_end (float): Terminal time of p.
        raw_pairing (float): int p(0) v(0) dx before normalization.
        separation_rate (float | None): gamma_fit once measured.
        uniqueness_gap (float | None): Gap between two terminal data once measured.
    """
    p: Trajectory = field(repr=False)
    v: Trajectory = field(repr=False)
    eigen: EigenPair = field(repr=False)
    T_splice: float
    T_end: float
    raw_pairing: float = 1.0
    separation_rate: Optional[float] = None
    uniqueness_gap: Optional[float] = None

    @property
    def normalization(self) -> dict:
        return {"v0_sup": float(np.max(np.abs(self.v.field(0).values))), "pv_pairing": pairing(self.p, self.v, 0)}

    def p0(self) -> Field:
        return self.p.field(0)

    def v0(self) -> Field:
        return self.v.field(0)

    def to_dict(self) -> dict:
        return {
            "lambda": self.eigen.lam,
            "T_splice": self.T_splice,
            "T_end": self.T_end,
            "raw_pairing": self.raw_pairing,
            "separation_rate": self.separation_rate,
            "uniqueness_gap": self.uniqueness_gap,
        }


def pairing(p: Trajectory, w: Trajectory, k: int) -> float:
    """dx * sum p(t_k) w(t_k), offsets included; both trajectories share the time grid."""
    dot = float(np.dot(p.values[k], w.values[k]))
    return p.grid.dx * dot * float(np.exp(p.offset(k) + w.offset(k)))


def frozen_trajectory(steady: GroundState) -> Trajectory:
    """The autonomous trajectory u = W for all t >= 0 (spliced at t = 0)."""
    W = steady.W
    return Trajectory(W.grid, np.array([0.0]), W.values[None, :], splice_time=0.0, steady_state=W)


def linearized_coefficient(traj: Trajectory, nl: Nonlinearity, t: float) -> Field:
    """
    The field x -> d_u f(x, u(t, x)).

    Between stored samples u is interpolated linearly in time; from the splice on u = W.

    Args:
        traj (Trajectory): Spliced trajectory.
        nl (Nonlinearity): Reaction term.
        t (float): Time in [t0, infinity) when spliced, [t0, t_end] otherwise.

    Returns:
        Field: The coefficient.

    Raises:
        BadArguments: If t is outside the trajectory.
    """
    u = traj.values_at(t)
    return Field(traj.grid, eval_fprime(nl, traj.grid.nodes, u))


def terminal_time(traj: Trajectory, eigen: EigenPair, solver: SolverParams, floquet: FloquetParams) -> float:
    """T_end = T_splice + terminal_efolds / |lambda|, rounded up to the time step."""
    if traj.splice_time is None:
        raise NumericFailure("Trajectory has no splice: extract it with threshold_trajectory first")
    if not eigen.lam < 0.0:
        raise NumericFailure(f"Principal eigenvalue {eigen.lam} is not negative")
    raw = traj.splice_time + floquet.terminal_efolds / abs(eigen.lam)
    return float(np.ceil(raw / solver.dt - 1e-9) * solver.dt)


class _Coefficients:
    """Coefficient on the unknowns at step k, i.e. at time k * dt."""

    def __init__(self, traj: Trajectory, nl: Nonlinearity, dt: float):
        self.traj = traj
        self.nl = nl
        self.dt = dt
        self.inner = traj.grid.interior
        self.x = traj.grid.nodes[self.inner]
        self.splice_step = None if traj.splice_time is None else traj.splice_time / dt
        self._frozen = None

    def __call__(self, k: int) -> np.ndarray:
        if self.splice_step is not None and k >= self.splice_step - 1e-9:
            if self._frozen is None:
                W = self.traj.steady_state.values[self.inner]
                self._frozen = eval_fprime(self.nl, self.x, W)
            return self._frozen
        return eval_fprime(self.nl, self.x, self.traj.values_at(k * self.dt)[self.inner])


def _check_terminal(terminal: Field) -> None:
    if np.any(terminal.values[terminal.grid.interior] <= 0.0):
        raise BadArguments("Terminal datum must be positive at every interior node")


def _check_positive(w: np.ndarray, t: float, name: str) -> None:
    if np.any(w <= 0.0):
        raise NumericFailure(f"{name} lost positivity at t={t:.6g}: refine dt or check the splice")


def propagate_forward(traj: Trajectory, nl: Nonlinearity, w0: Field, solver: SolverParams, T_end: float,
                      name: str = "v", require_positive: bool = True) -> Trajectory:
    """
    Solves w_t = w_xx + d_u f(x, u(t, x)) w on [0, T_end] from w0.

    No renormalization: growth goes into per-row log offsets once the sup leaves
    [1e-250, 1e250].

    Args:
        traj (Trajectory): The spliced nonlinear trajectory.
        nl (Nonlinearity): Reaction term.
        w0 (Field): Initial datum.
        solver (SolverParams): dt, scheme and store_stride.
        T_end (float): Final time (multiple of dt).
        name (str): Label for diagnostics.
        require_positive (bool): Check strict positivity at the interior nodes.

    Returns:
        Trajectory: Stored every store_stride steps, with log offsets.
    """
    grid = traj.grid
    prop = LinearPropagator(grid, solver.dt, solver.scheme)
    coeff = _Coefficients(traj, nl, solver.dt)
    n_steps = int(round(T_end / solver.dt))
    stride = solver.store_stride
    w = np.array(w0.values[grid.interior])
    offset = 0.0
    times, rows, offsets = [0.0], [embed(grid, w)], [0.0]
    c_old = coeff(0)
    for k in range(1, n_steps + 1):
        c_new = coeff(k)
        w = prop.forward(w, c_old, c_new)
        w, offset = rescale(w, offset)
        c_old = c_new
        if k % stride == 0 or k == n_steps:
            t = k * solver.dt
            if require_positive:
                _check_positive(w, t, name)
            times.append(t)
            rows.append(embed(grid, w))
            offsets.append(offset)
    return Trajectory(grid, np.array(times), np.array(rows), log_offsets=np.array(offsets))


def solve_adjoint(traj: Trajectory, nl: Nonlinearity, eigen: EigenPair, solver: SolverParams,
                  floquet: FloquetParams, terminal: Optional[Field] = None,
                  T_end: Optional[float] = None) -> Trajectory:
    """
    Solves -p_t - p_xx = d_u f(x, u(t, x)) p backward from p(T_end) = phi to t = 0.

    Each backward step is the exact transpose of the forward step, so the pairing of p
    with any linearized solution is conserved to rounding error.

    Args:
        traj (Trajectory): Spliced trajectory.
        nl (Nonlinearity): Reaction term.
        eigen (EigenPair): Principal eigenpair at W.
        solver (SolverParams): dt, scheme and store_stride.
        floquet (FloquetParams): terminal_efolds.
        terminal (Field | None): Positive terminal datum; defaults to phi.
        T_end (float | None): Overrides T_splice + terminal_efolds / |lambda|.

    Returns:
        Trajectory: p at the stored times, increasing in t, with log offsets.

    Raises:
        NumericFailure: On positivity loss or a missing splice.
    """
    if traj.splice_time is None:
        raise NumericFailure("Trajectory has no splice: extract it with threshold_trajectory first")
    grid = traj.grid
    T_end = terminal_time(traj, eigen, solver, floquet) if T_end is None else T_end
    prop = LinearPropagator(grid, solver.dt, solver.scheme)
    coeff = _Coefficients(traj, nl, solver.dt)
    n_steps = int(round(T_end / solver.dt))
    stride = solver.store_stride
    if terminal is not None:
        _check_terminal(terminal)
    p = np.array((eigen.phi if terminal is None else terminal).values[grid.interior])
    offset = 0.0
    times, rows, offsets = [T_end], [embed(grid, p)], [0.0]
    c_new = coeff(n_steps)
    for k in range(n_steps, 0, -1):
        c_old = coeff(k - 1)
        p = prop.adjoint(p, c_old, c_new)
        p, offset = rescale(p, offset)
        c_new = c_old
        j = k - 1
        if j % stride == 0 or j == 0:
            t = j * solver.dt
            _check_positive(p, t, "p")
            times.append(t)
            rows.append(embed(grid, p))
            offsets.append(offset)
    return Trajectory(grid, np.array(times[::-1]), np.array(rows[::-1]), log_offsets=np.array(offsets[::-1]))


def solve_forward_bundle(traj: Trajectory, nl: Nonlinearity, eigen: EigenPair, solver: SolverParams,
                         floquet: FloquetParams, T_end: Optional[float] = None) -> Trajectory:
    """
    Solves v_t - v_xx = d_u f(x, u(t, x)) v from v(0) = phi / ||phi||_sup.

    Returns:
        Trajectory: v on the same stored times as solve_adjoint would use.
    """
    T_end = terminal_time(traj, eigen, solver, floquet) if T_end is None else T_end
    phi = eigen.phi
    v0 = Field(phi.grid, phi.values / np.max(np.abs(phi.values)))
    return propagate_forward(traj, nl, v0, solver, T_end, name="v")


def normalize_bundle(p: Trajectory, v: Trajectory, eigen: EigenPair, T_splice: float) -> FloquetBundle:
    """
    Rescales p so that int p(0) v(0) dx = 1; v is already sup-normalized at t = 0.

    Args:
        p (Trajectory): Adjoint solution.
        v (Trajectory): Forward bundle on the same stored times.
        eigen (EigenPair): Principal eigenpair.
        T_splice (float): Splice time of the underlying trajectory.

    Returns:
        FloquetBundle: The normalized bundle.

    Raises:
        NumericFailure: If the time grids differ or the pairing is not positive.
    """
    if p.times.shape != v.times.shape or np.any(np.abs(p.times - v.times) > 1e-9):
        raise NumericFailure("p and v must share their stored times")
    raw = pairing(p, v, 0)
    if not raw > 0.0 or not np.isfinite(raw):
        raise NumericFailure(f"Degenerate pairing int p(0) v(0) = {raw}")
    offsets = (np.zeros_like(p.times) if p.log_offsets is None else p.log_offsets) - np.log(raw)
    p = replace(p, log_offsets=offsets)
    return FloquetBundle(p, v, eigen, float(T_splice), float(p.t_end), raw)


def compute_bundle(traj: Trajectory, nl: Nonlinearity, eigen: EigenPair, solver: SolverParams,
                   floquet: FloquetParams, terminal: Optional[Field] = None,
                   T_end: Optional[float] = None) -> FloquetBundle:
    """
    Adjoint, forward bundle and normalization in one call.

    Returns:
        FloquetBundle: The normalized bundle along traj.
    """
    T_end = terminal_time(traj, eigen, solver, floquet) if T_end is None else T_end
    lab_log("INFO", f"bundle: T_splice={traj.splice_time:g} T_end={T_end:g} lambda={eigen.lam:.6f}")
    p = solve_adjoint(traj, nl, eigen, solver, floquet, terminal=terminal, T_end=T_end)
    v = solve_forward_bundle(traj, nl, eigen, solver, floquet, T_end=T_end)
    return normalize_bundle(p, v, eigen, traj.splice_time)
