from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from forward.solver import Tridiagonal, embed
from model.errors import BadArguments, NumericFailure
from model.grid import Field, Grid
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity, eval_fprime

MAX_ITER = 200
RESHIFT_AFTER = 5
RESHIFT_GAP = 1e-3
RESIDUAL_TOL = 1e-12
POLISH_STEPS = 3


@dataclass(frozen=True, eq=False)
class EigenPair:
    """
    An eigenpair of A = -D2 - diag(d_u f(x, W)) on the Dirichlet interior.

    Attributes:
        lam (float): Eigenvalue.
        phi (Field): Eigenvector, sup-normalized; positive for the principal pair.
        residual (float): ||A phi - lam phi||_sup at exit.
        iterations (int): Inverse iterations used.
    """
    lam: float
    phi: Field = field(repr=False)
    residual: float = 0.0
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "residual": self.residual, "iterations": self.iterations}


def schrodinger_operator(nl: Nonlinearity, W: Field) -> Tridiagonal:
    """
    A = -D2 - diag(d_u f(x, W)) on the interior unknowns.

    Raises:
        BadArguments: For grids without Dirichlet boundary nodes.
    """
    grid = W.grid
    if grid.bc != "dirichlet_zero":
        raise BadArguments("Eigenpairs are computed with dirichlet_zero boundary conditions")
    inner = grid.interior
    potential = -eval_fprime(nl, grid.nodes[inner], W.values[inner])
    return Tridiagonal.laplacian(grid).scaled(-1.0, potential)


def _inverse_iteration(A: Tridiagonal, start: np.ndarray, shift: float, dx: float,
                       deflate: Optional[np.ndarray] = None) -> tuple[float, np.ndarray, float, int]:
    """
    Shifted inverse iteration, re-shifted once to (Rayleigh quotient - 1e-3).

    Returns:
        tuple: (eigenvalue, unit 2-norm vector, sup residual, iterations).

    Raises:
        NumericFailure: If the scaled residual stays above 1e-12 after MAX_ITER iterations.
    """

    def project(v):
        if deflate is not None:
            v = v - np.dot(deflate, v) * deflate
        return v / np.linalg.norm(v)

    v = project(start.astype(float))
    shifted = A.scaled(1.0, -shift)
    mu, res = float("nan"), float("inf")
    best, converged_at = None, None
    for it in range(1, MAX_ITER + 1):
        v = project(shifted.solve(v))
        Av = A.matvec(v)
        mu = float(np.dot(v, Av))
        res = float(np.max(np.abs(Av - mu * v)))
        if converged_at is not None:
            # polishing down to the rounding floor
            if res >= best[2]:
                return best
            best = (mu, v, res, it)
            if it >= converged_at + POLISH_STEPS:
                return best
        elif res <= RESIDUAL_TOL * (abs(mu) + 4.0 / dx ** 2):
            best, converged_at = (mu, v, res, it), it
        if it == RESHIFT_AFTER:
            shifted = A.scaled(1.0, -(mu - RESHIFT_GAP))
    if best is not None:
        return best
    raise NumericFailure(f"Inverse iteration stagnated: residual {res:.3e} after {MAX_ITER} iterations")


def principal_eigenpair(nl: Nonlinearity, grid: Grid, W: Field) -> EigenPair:
    """
    Smallest eigenvalue of A = -D2 - diag(d_u f(x, W)) by shifted inverse iteration.

    The first shift min(-d_u f(x, W)) - 0.5 lies below the spectrum.

    Args:
        nl (Nonlinearity): Reaction term.
        grid (Grid): Mesh (dirichlet_zero).
        W (Field): The steady state.

    Returns:
        EigenPair: lam < 0 and phi > 0 at interior nodes with ||phi||_sup = 1.

    Raises:
        NumericFailure: On stagnation or a sign-changing principal vector.
    """
    A = schrodinger_operator(nl, W)
    shift = float(np.min(A.diag - np.abs(A.sub) - np.abs(A.sup))) - 0.5
    start = np.maximum(W.values[grid.interior], 1e-3)
    lam, v, res, its = _inverse_iteration(A, start, shift, grid.dx)
    v = v if v.sum() > 0 else -v
    # A - shift is an M-matrix: one more solve with it keeps the far tails positive.
    v = A.scaled(1.0, -shift).solve(v)
    v /= np.linalg.norm(v)
    Av = A.matvec(v)
    lam = float(np.dot(v, Av))
    res = float(np.max(np.abs(Av - lam * v)))
    if np.any(v <= 0.0):
        raise NumericFailure("Principal eigenvector is not positive at every interior node")
    scale = float(np.max(v))
    pair = EigenPair(lam, Field(grid, embed(grid, v / scale)), res / scale, its)
    lab_log("INFO", f"principal eigenpair: lambda={lam:.10f} after {its} iterations")
    return pair


def second_eigenpair(nl: Nonlinearity, grid: Grid, W: Field, principal: EigenPair) -> EigenPair:
    """
    Second eigenpair of A by inverse iteration deflated against phi.

    For an even W the second eigenvector is odd and close to W'.

    Args:
        nl (Nonlinearity): Reaction term.
        grid (Grid): Mesh (dirichlet_zero).
        W (Field): The steady state.
        principal (EigenPair): From principal_eigenpair.

    Returns:
        EigenPair: Sup-normalized, positive on the right half.
    """
    A = schrodinger_operator(nl, W)
    inner = grid.interior
    phi = principal.phi.values[inner]
    phi = phi / np.linalg.norm(phi)
    shift = float(np.min(A.diag - np.abs(A.sub) - np.abs(A.sup))) - 0.5
    center = 0.5 * (grid.x_min + grid.x_max)
    start = (grid.nodes[inner] - center) * np.maximum(W.values[inner], 1e-3)
    lam, v, res, its = _inverse_iteration(A, start, shift, grid.dx, deflate=phi)
    right = grid.nodes[inner] > center
    v = v if v[right].sum() > 0 else -v
    scale = float(np.max(np.abs(v)))
    return EigenPair(lam, Field(grid, embed(grid, v / scale)), res / scale, its)


def rayleigh_quotient(nl: Nonlinearity, W: Field, psi: Field) -> float:
    """
    (int psi'^2 - int d_u f(x, W) psi^2) / int psi^2 with forward differences.

    With psi = 0 at the Dirichlet boundary nodes the quotient equals
    psi^T A psi / psi^T psi exactly.

    Args:
        nl (Nonlinearity): Reaction term.
        W (Field): Steady state.
        psi (Field): Test function.

    Returns:
        float: The quotient.

    Raises:
        BadArguments: If psi vanishes identically.
    """
    v = psi.values
    mass = float(np.dot(v, v))
    if mass == 0.0:
        raise BadArguments("Rayleigh quotient of the zero field")
    dx = psi.grid.dx
    kinetic = float(np.sum(np.diff(v) ** 2)) / dx ** 2
    potential = float(np.dot(eval_fprime(nl, psi.grid.nodes, W.values), v * v))
    return (kinetic - potential) / mass


def centered_derivative(W: Field) -> Field:
    """Centered differences of W (zero at the boundary nodes)."""
    v = W.values
    d = np.zeros_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2.0 * W.grid.dx)
    return Field(W.grid, d)


def near_null_ratio(nl: Nonlinearity, W: Field) -> float:
    """||A W'||_2 / ||W'||_2 for the centered derivative W'."""
    A = schrodinger_operator(nl, W)
    inner = W.grid.interior
    w = centered_derivative(W).values[inner]
    return float(np.linalg.norm(A.matvec(w)) / np.linalg.norm(w))
