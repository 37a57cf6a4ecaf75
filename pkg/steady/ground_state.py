from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from forward.solver import Tridiagonal, embed
from model.errors import BadArguments, NumericFailure
from model.grid import Field, Grid
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity, eval_f, eval_fprime

# Below this value W is continued by its linearized exponential tail.
TAIL_START = 1e-6
GAUSS_POINTS = 8
NEWTON_TOL = 1e-14
NEWTON_MAX = 60

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_POINTS)


@dataclass(frozen=True, eq=False)
class GroundState:
    """
    The threshold steady state W with its reference constants.

    Attributes:
        W (Field): Even profile, W(center) = beta*.
        beta_star (float): Peak height.
        decay_rate (float): sqrt(|f'(0)|), the tail rate of W.
        method (str): "quadrature" (canonical) or "newton".
        residual (float): sup-norm PDE residual of the discrete profile.
    """
    W: Field = field(repr=False)
    beta_star: float
    decay_rate: float
    method: str = "quadrature"
    residual: float = float("nan")

    @property
    def grid(self) -> Grid:
        return self.W.grid

    def to_dict(self) -> dict:
        return {
            "beta_star": self.beta_star,
            "decay_rate": self.decay_rate,
            "method": self.method,
            "residual": self.residual,
            "W0": float(np.max(self.W.values)),
        }


def exact_cubic_profile(a: float, x) -> np.ndarray:
    """
    Closed-form homoclinic of -W'' = W(1-W)(W-a).

    W(x) = 1 / (y0 + R cosh(sqrt(a) x)) with y0 = (1+a)/(3a), R = sqrt(y0^2 - 1/(2a)).

    Args:
        a (float): Cubic parameter in (0, 1/2).
        x: Positions.

    Returns:
        np.ndarray: W at x.
    """
    if not 0.0 < a < 0.5:
        raise BadArguments(f"Cubic parameter a must lie in (0, 1/2), got {a}")
    y0 = (1.0 + a) / (3.0 * a)
    R = np.sqrt(y0 * y0 - 1.0 / (2.0 * a))
    return 1.0 / (y0 + R * np.cosh(np.sqrt(a) * np.asarray(x, dtype=float)))


def _distances(grid: Grid) -> np.ndarray:
    """|x_i - center| computed from the node index, so it is exactly even."""
    return np.abs(np.arange(grid.n) - 0.5 * (grid.n - 1)) * grid.dx


def _symmetrize(grid: Grid, values: np.ndarray) -> np.ndarray:
    half = (grid.n + 1) // 2
    values[:half] = values[::-1][:half].copy()
    return values


class _PhasePlane:
    """
    Inverts x(w) = int_w^beta* ds / sqrt(-2F(s)) through s = beta* - tau^2.

    In tau the integrand g(tau) = 2 tau / sqrt(2 (F(beta*) - F(beta* - tau^2))) is finite at
    tau = 0, so each increment is integrated by fixed Gauss-Legendre quadrature.
    """

    def __init__(self, nl: Nonlinearity):
        self.nl = nl
        self.beta = nl.beta_star
        self.f_beta = float(nl.primitive(self.beta))
        self.tau_max = np.sqrt(self.beta)
        # g(0) limit: F(beta*) - F(beta* - tau^2) ~ f(beta*) tau^2.
        self.g0 = 2.0 / np.sqrt(2.0 * float(nl.f0(self.beta)))

    def g(self, tau):
        tau = np.asarray(tau, dtype=float)
        drop = self.f_beta - self.nl.primitive(self.beta - tau * tau)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 2.0 * tau / np.sqrt(2.0 * drop)
        return np.where(tau < 1e-7, self.g0, out)

    def increment(self, lo: float, hi: float) -> float:
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return float(half * np.dot(_GL_WEIGHTS, self.g(mid + half * _GL_NODES)))

    def advance(self, tau: float, dx: float) -> float:
        """Finds tau' > tau with int_tau^tau' g = dx (Newton, brentq fallback)."""
        guess = tau + dx / float(self.g(tau))
        hi_cap = self.tau_max * (1.0 - 1e-15)
        t = min(guess, 0.5 * (tau + hi_cap))
        for _ in range(NEWTON_MAX):
            miss = self.increment(tau, t) - dx
            slope = float(self.g(t))
            nxt = t - miss / slope
            if not tau < nxt < hi_cap:
                break
            if abs(nxt - t) <= NEWTON_TOL * max(1.0, t):
                return nxt
            t = nxt
        try:
            return float(brentq(lambda s: self.increment(tau, s) - dx, tau, hi_cap, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        except ValueError as e:
            raise NumericFailure(f"Ground-state quadrature did not converge after tau={tau:.6g}") from e


def ground_state(nl: Nonlinearity, grid: Grid) -> GroundState:
    """
    W by phase-plane quadrature of the zero-energy orbit 0.5 (W')^2 + F(W) = 0.

    Distances |x - center| are visited in increasing order and tau(x) is found by chaining
    increments; below W = 1e-6 the profile continues as W_p exp(-k (x - x_p)) with
    k = sqrt(-2F(W_p)) / W_p, which matches value and slope.

    Args:
        nl (Nonlinearity): Homogeneous bistable reaction term.
        grid (Grid): Mesh, centered at the peak.

    Returns:
        GroundState: Even, strictly decreasing profile with W(center) = beta*.

    Raises:
        BadArguments: If nl is heterogeneous or has no beta*.
        NumericFailure: If the quadrature does not converge.
    """
    if not nl.homogeneous:
        raise BadArguments("ground_state needs a homogeneous nonlinearity; use ground_state_newton")
    if not 0.0 < nl.beta_star < 1.0:
        raise BadArguments("Nonlinearity has no beta* in (0, 1)")
    plane = _PhasePlane(nl)
    dist = _distances(grid)
    half = (grid.n + 1) // 2
    right = np.arange(grid.n - half, grid.n)
    order = right[np.argsort(dist[right], kind="stable")]
    values = np.zeros(grid.n)
    tau, x_prev = 0.0, 0.0
    tail: Optional[tuple[float, float, float]] = None
    for i in order:
        d = dist[i]
        if tail is None:
            if d > x_prev:
                tau = plane.advance(tau, d - x_prev)
                x_prev = d
            w = plane.beta - tau * tau
            values[i] = w
            if w < TAIL_START:
                tail = (d, w, np.sqrt(-2.0 * float(nl.primitive(w))) / w)
        else:
            x_p, w_p, k = tail
            values[i] = w_p * np.exp(-k * (d - x_p))
    values = _symmetrize(grid, values)
    W = Field(grid, values)
    state = GroundState(W, nl.beta_star, float(np.sqrt(abs(nl.f0_prime(0.0)))), "quadrature", pde_residual(nl, W))
    lab_log("INFO", f"ground state: beta*={state.beta_star:.8f} residual={state.residual:.3e}")
    return state


def pde_residual(nl: Nonlinearity, W: Field) -> float:
    """
    sup-norm of -D2 W - f(x, W) on the unknowns.

    On Dirichlet grids the stencil reads the stored boundary values of W, so a
    whole-line profile is not charged for the truncation.

    Args:
        nl (Nonlinearity): Reaction term.
        W (Field): Candidate steady state.

    Returns:
        float: The residual.
    """
    grid = W.grid
    v = W.values
    if grid.bc == "dirichlet_zero":
        lap = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / grid.dx ** 2
        res = -lap - eval_f(nl, grid.nodes[1:-1], v[1:-1])
    else:
        res = -Tridiagonal.laplacian(grid).matvec(v) - eval_f(nl, grid.nodes, v)
    return float(np.max(np.abs(res)))


def ground_state_newton(nl: Nonlinearity, grid: Grid, seed: Optional[Field] = None,
                        tol: float = 1e-11, max_iter: int = 50) -> GroundState:
    """
    Damped Newton on the discrete problem -D2 W = f(x, W).

    The seed defaults to the quadrature profile of the homogeneous part of nl. With a
    heterogeneous nl the result is whichever steady state the seed converges to.

    Args:
        nl (Nonlinearity): Reaction term (heterogeneity allowed).
        grid (Grid): Mesh.
        seed (Field | None): Initial guess.
        tol (float): Target sup-norm residual.
        max_iter (int): Newton iteration cap.

    Returns:
        GroundState: The discrete steady state (method "newton").

    Raises:
        NumericFailure: If Newton stalls or the result is not positive.
    """
    if seed is None:
        base = Nonlinearity(nl.kind, a=nl.a, table=nl.table)
        seed = ground_state(base, grid).W
    nl.check_on(grid.nodes)
    inner = grid.interior
    x = grid.nodes[inner]
    lap = Tridiagonal.laplacian(grid)
    u = np.array(seed.values[inner])

    def residual(v):
        return -lap.matvec(v) - eval_f(nl, x, v)

    r = residual(u)
    for it in range(max_iter):
        norm = float(np.max(np.abs(r)))
        if norm <= tol:
            break
        jac = lap.scaled(-1.0, -eval_fprime(nl, x, u))
        delta = jac.solve(-r)
        damping = 1.0
        while damping > 1e-4:
            trial = u + damping * delta
            if trial.min() > -0.1 and trial.max() < 1.1:
                r_trial = residual(trial)
                if np.max(np.abs(r_trial)) < (1.0 - 1e-4 * damping) * norm:
                    break
            damping *= 0.5
        else:
            raise NumericFailure(f"Newton line search failed at iteration {it} (residual {norm:.3e})")
        u, r = trial, r_trial
    else:
        raise NumericFailure(f"Newton did not reach residual {tol:g} in {max_iter} iterations")
    if np.any(u <= 0.0):
        raise NumericFailure("Newton converged to a profile that is not positive")
    W = Field(grid, embed(grid, u))
    return GroundState(W, float(np.max(u)), float(np.sqrt(abs(nl.f0_prime(0.0)))), "newton", pde_residual(nl, W))
