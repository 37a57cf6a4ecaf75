from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from model.config import SolverParams
from model.errors import BadArguments, NumericFailure
from model.grid import Field, Grid
from model.nonlinearity import Nonlinearity, eval_f
from model.trajectory import Trajectory

INVARIANT_BAND = 1e-8
STABILITY_MARGIN = 0.5
# Linear solutions are rescaled once their sup leaves [RESCALE_LOW, RESCALE_HIGH].
RESCALE_HIGH = 1e250
RESCALE_LOW = 1e-250

THETA = {"imex_be": 1.0, "imex_cn": 0.5}


class Tridiagonal:
    """
    Tridiagonal operator on the unknowns of a grid, stored by diagonals.

    Row i reads sub[i]*u[i-1] + diag[i]*u[i] + sup[i]*u[i+1]; sub[0] and sup[-1] are unused.
    """

    def __init__(self, sub: np.ndarray, diag: np.ndarray, sup: np.ndarray):
        self.sub = sub
        self.diag = diag
        self.sup = sup

    @classmethod
    def laplacian(cls, grid: Grid) -> "Tridiagonal":
        """
        Three-point Laplacian D2 on the unknowns.

        Dirichlet: interior nodes, boundary values 0. Neumann: all nodes, mirror ghosts
        u[-1] = u[1] and u[n] = u[n-2].
        """
        m = grid.n - 2 if grid.bc == "dirichlet_zero" else grid.n
        inv = 1.0 / grid.dx ** 2
        sub = np.full(m, inv)
        sup = np.full(m, inv)
        diag = np.full(m, -2.0 * inv)
        sub[0] = 0.0
        sup[-1] = 0.0
        if grid.bc == "neumann_zero":
            sup[0] = 2.0 * inv
            sub[-1] = 2.0 * inv
        return cls(sub, diag, sup)

    @property
    def size(self) -> int:
        return self.diag.size

    def scaled(self, alpha: float, shift: np.ndarray | float = 0.0) -> "Tridiagonal":
        """Returns I*shift + alpha*self as a new operator (shift may be a diagonal)."""
        return Tridiagonal(alpha * self.sub, alpha * self.diag + shift, alpha * self.sup)

    def transpose(self) -> "Tridiagonal":
        sub = np.zeros_like(self.sub)
        sup = np.zeros_like(self.sup)
        sub[1:] = self.sup[:-1]
        sup[:-1] = self.sub[1:]
        return Tridiagonal(sub, self.diag.copy(), sup)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[1:] += self.sub[1:] * u[:-1]
        out[:-1] += self.sup[:-1] * u[1:]
        return out

    def banded(self) -> np.ndarray:
        ab = np.zeros((3, self.size))
        ab[0, 1:] = self.sup[:-1]
        ab[1, :] = self.diag
        ab[2, :-1] = self.sub[1:]
        return ab

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """
        Solves self @ x = rhs with scipy's banded LU.

        Raises:
            NumericFailure: If the banded solve fails (singular system).
        """
        try:
            x = solve_banded((1, 1), self.banded(), rhs, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NumericFailure(f"Tridiagonal solve failed: {e}") from e
        if not np.all(np.isfinite(x)):
            raise NumericFailure("Tridiagonal solve returned non-finite values")
        return x


def check_stability(nl: Nonlinearity, dt: float) -> None:
    """
    Enforces the explicit-reaction margin dt * sup|d_u f| < 0.5.

    Raises:
        BadArguments: If the margin is violated.
    """
    k = nl.sup_fprime()
    if dt * k >= STABILITY_MARGIN:
        raise BadArguments(f"dt = {dt} violates dt*K < {STABILITY_MARGIN} with K = {k:.4g}")


def embed(grid: Grid, unknowns: np.ndarray) -> np.ndarray:
    """Full node vector from the unknowns (Dirichlet boundary values are 0)."""
    if grid.bc == "neumann_zero":
        return unknowns.copy()
    full = np.zeros(grid.n)
    full[1:-1] = unknowns
    return full


class ImexStepper:
    """
    One IMEX step for u_t = u_xx + f(x, u): explicit reaction, implicit diffusion.

    imex_be solves (I - dt D2) u1 = u0 + dt f(u0); imex_cn solves
    (I - dt/2 D2) u1 = (I + dt/2 D2) u0 + dt f(u0).
    """

    def __init__(self, nl: Nonlinearity, grid: Grid, dt: float, scheme: str = "imex_be"):
        """
        Initialize the stepper.

        Args:
            nl (Nonlinearity): Reaction term.
            grid (Grid): Mesh.
            dt (float): Time step.
            scheme (str): "imex_be" or "imex_cn".

        Raises:
            BadArguments: On an unknown scheme or a violated stability margin.
        """
        if scheme not in THETA:
            raise BadArguments(f"Unknown scheme: {scheme}")
        check_stability(nl, dt)
        nl.check_on(grid.nodes)
        self.nl = nl
        self.grid = grid
        self.dt = dt
        self.theta = THETA[scheme]
        self.inner = grid.interior
        self.lap = Tridiagonal.laplacian(grid)
        self.lhs = self.lap.scaled(-self.theta * dt, 1.0)
        self.explicit = self.lap.scaled((1.0 - self.theta) * dt, 1.0) if self.theta < 1.0 else None
        self.x = grid.nodes[self.inner]

    def advance(self, u: np.ndarray) -> np.ndarray:
        """
        Advances the full node vector u by one step.

        Raises:
            NumericFailure: If the result leaves [0, 1] by more than the invariant band.
        """
        inner = u[self.inner]
        reaction = eval_f(self.nl, self.x, inner)
        rhs = (self.explicit.matvec(inner) if self.explicit is not None else inner) + self.dt * reaction
        new = embed(self.grid, self.lhs.solve(rhs))
        lo, hi = float(new.min()), float(new.max())
        if lo < -INVARIANT_BAND or hi > 1.0 + INVARIANT_BAND:
            raise NumericFailure(
                f"Invariant region violated: u in [{lo:.3e}, {hi:.9f}]; refine dt or use imex_be"
            )
        return new


def step(nl: Nonlinearity, grid: Grid, u: Field, dt: float, scheme: str = "imex_be") -> Field:
    """
    One IMEX step of u_t - u_xx = f(x, u).

    No clamping is applied: a result outside [0, 1] beyond 1e-8 raises.

    Args:
        nl (Nonlinearity): Reaction term.
        grid (Grid): Mesh.
        u (Field): Current state.
        dt (float): Time step (must satisfy dt*K < 0.5).
        scheme (str): "imex_be" or "imex_cn".

    Returns:
        Field: The state after one step.
    """
    return Field(grid, ImexStepper(nl, grid, dt, scheme).advance(np.array(u.values)))


def evolve(
    nl: Nonlinearity,
    grid: Grid,
    u0: Field,
    params: SolverParams,
    stop_when: Optional[Callable[[float, np.ndarray], bool]] = None,
    store_stride: Optional[int] = None,
) -> Trajectory:
    """
    Integrates the Cauchy problem from t = 0 to T_max.

    Stores t = 0, every store_stride-th step and the final step. When stop_when is
    given it is evaluated at every stored sample and the run ends at the first
    sample where it returns True.

    Args:
        nl (Nonlinearity): Reaction term.
        grid (Grid): Mesh.
        u0 (Field): Initial datum with 0 <= u0 <= 1.
        params (SolverParams): dt, T_max, store_stride, scheme.
        stop_when (Callable | None): Predicate (t, u) -> bool.
        store_stride (int | None): Overrides params.store_stride.

    Returns:
        Trajectory: The stored samples.

    Raises:
        BadArguments: If u0 leaves [0, 1].
        NumericFailure: Propagated from the steps.
    """
    if not u0.is_solution_like(INVARIANT_BAND):
        raise BadArguments("Initial datum must satisfy 0 <= u0 <= 1")
    stride = store_stride or params.store_stride
    stepper = ImexStepper(nl, grid, params.dt, params.scheme)
    n_steps = int(np.ceil(params.T_max / params.dt - 1e-9))
    u = np.array(u0.values)
    if grid.bc == "dirichlet_zero":
        u[0] = u[-1] = 0.0
    times = [0.0]
    rows = [u.copy()]
    if stop_when is not None and stop_when(0.0, u):
        return Trajectory(grid, np.array(times), np.array(rows))
    for k in range(1, n_steps + 1):
        u = stepper.advance(u)
        if k % stride == 0 or k == n_steps:
            t = k * params.dt
            times.append(t)
            rows.append(u.copy())
            if stop_when is not None and stop_when(t, u):
                break
    return Trajectory(grid, np.array(times), np.array(rows))


class LinearPropagator:
    """
    Theta-scheme for the linear equation w_t = w_xx + c(t, x) w and its exact discrete adjoint.

    The coefficient c is known in advance, so it sits in the implicit tridiagonal next to
    the Laplacian:
        forward:  (I - th*dt*(D2 + C1)) w1 = (I + (1-th)*dt*(D2 + C0)) w0
        adjoint:  p0 = (I + (1-th)*dt*(D2 + C0))^T (I - th*dt*(D2 + C1))^-T p1
    so that sum(p0*w0) = sum(p1*w1) exactly. Growth is absorbed into a log offset.
    """

    def __init__(self, grid: Grid, dt: float, scheme: str = "imex_be"):
        if scheme not in THETA:
            raise BadArguments(f"Unknown scheme: {scheme}")
        self.grid = grid
        self.dt = dt
        self.theta = THETA[scheme]
        self.inner = grid.interior
        self.lap = Tridiagonal.laplacian(grid)

    def _implicit(self, c_new: np.ndarray) -> Tridiagonal:
        return self.lap.scaled(-self.theta * self.dt, 1.0 - self.theta * self.dt * c_new)

    def _explicit(self, c_old: np.ndarray) -> Tridiagonal:
        return self.lap.scaled((1.0 - self.theta) * self.dt, 1.0 + (1.0 - self.theta) * self.dt * c_old)

    def forward(self, w: np.ndarray, c_old: np.ndarray, c_new: np.ndarray) -> np.ndarray:
        """
        One forward step on the unknowns.

        Args:
            w (np.ndarray): Unknowns at the old time.
            c_old (np.ndarray): Coefficient on the unknowns at the old time.
            c_new (np.ndarray): Coefficient on the unknowns at the new time.

        Returns:
            np.ndarray: Unknowns at the new time.
        """
        rhs = self._explicit(c_old).matvec(w) if self.theta < 1.0 else w
        return self._implicit(c_new).solve(rhs)

    def adjoint(self, p: np.ndarray, c_old: np.ndarray, c_new: np.ndarray) -> np.ndarray:
        """
        One backward step of the discrete adjoint: from the new time back to the old one.

        Args:
            p (np.ndarray): Adjoint unknowns at the new time.
            c_old (np.ndarray): Coefficient at the old time.
            c_new (np.ndarray): Coefficient at the new time.

        Returns:
            np.ndarray: Adjoint unknowns at the old time.
        """
        q = self._implicit(c_new).transpose().solve(p)
        return self._explicit(c_old).transpose().matvec(q) if self.theta < 1.0 else q


def rescale(w: np.ndarray, log_offset: float) -> tuple[np.ndarray, float]:
    """
    Keeps a linear solution representable: w * exp(log_offset) is invariant.

    Args:
        w (np.ndarray): Mantissa.
        log_offset (float): Current log scale.

    Returns:
        tuple[np.ndarray, float]: Rescaled mantissa and updated log scale.
    """
    peak = float(np.max(np.abs(w)))
    if peak > RESCALE_HIGH or 0.0 < peak < RESCALE_LOW:
        return w / peak, log_offset + np.log(peak)
    return w, log_offset
