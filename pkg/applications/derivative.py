from typing import Optional

import numpy as np
from pydantic import BaseModel

from floquet.bundle import compute_bundle
from model.config import FateParams, FloquetParams, SolverParams, ThresholdParams
from model.errors import BadArguments
from model.grid import Field, Grid
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity
from steady.eigen import principal_eigenpair
from threshold.bisection import default_steady, find_critical_length, threshold_trajectory
from threshold.families import Family


class DerivativeReport(BaseModel):
    """
    The adjoint formula for dL*/dr against a finite difference.

    formula_value = p(0, r) / p(0, L* + r) - 1, with p read by linear interpolation.
    At r = 0 the finite difference is one-sided and sign_check reports
    sign(p(0, 0) - p(0, L*)).
    """
    r: float
    L_star: float
    p_at_r: float
    p_at_Lr: float
    formula_value: float
    fd_value: float
    rel_gap: float
    fd_step: float
    sign_check: Optional[int] = None


class _ThresholdOracle:
    """L*(r) for the two-bump family with cached results."""

    def __init__(self, nl: Nonlinearity, grid: Grid, solver: SolverParams, fate: FateParams,
                 threshold: ThresholdParams, tol_L: float, steady: Field):
        self.args = (nl, solver, fate, threshold)
        self.grid = grid
        self.tol_L = tol_L
        self.steady = steady
        self.cache = {}

    def __call__(self, r: float):
        key = round(r, 12)
        if key not in self.cache:
            nl, solver, fate, threshold = self.args
            self.cache[key] = find_critical_length(Family.two_bump(self.grid, r), nl, solver, fate, threshold,
                                                   self.tol_L, steady=self.steady)
        return self.cache[key]


def lstar_derivative(nl: Nonlinearity, grid: Grid, r: float, fd_step: float, solver: SolverParams,
                     fate: FateParams, threshold: ThresholdParams, floquet: FloquetParams, tol_L: float,
                     steady: Optional[Field] = None) -> DerivativeReport:
    """
    Evaluates the adjoint formula for the derivative of r -> L*(r) and checks it by finite differences.

    Args:
        nl (Nonlinearity): Reaction term.
        grid (Grid): Mesh.
        r (float): Half-gap, r >= 0.
        fd_step (float): Finite-difference step.
        solver (SolverParams): Time stepping.
        fate (FateParams): Certificate parameters.
        threshold (ThresholdParams): Bisection limits and tol_W.
        floquet (FloquetParams): splice_tol and terminal_efolds.
        tol_L (float): Bisection tolerance (should be well below fd_step).
        steady (Field | None): Steady state; defaults to the discrete ground state.

    Returns:
        DerivativeReport: Formula, finite difference and their relative gap.
    """
    if r < 0.0 or fd_step <= 0.0:
        raise BadArguments(f"lstar_derivative needs r >= 0 and fd_step > 0, got r={r}, fd_step={fd_step}")
    steady = default_steady(nl, grid) if steady is None else steady
    oracle = _ThresholdOracle(nl, grid, solver, fate, threshold, tol_L, steady)
    center = oracle(r)
    traj = threshold_trajectory(center, floquet.splice_tol, threshold.tol_W)
    eigen = principal_eigenpair(nl, grid, steady)
    p0 = compute_bundle(traj, nl, eigen, solver, floquet).p0()
    p_r, p_Lr = p0.at(r), p0.at(center.L_star + r)
    formula = p_r / p_Lr - 1.0
    if r - fd_step >= 0.0:
        fd = (oracle(r + fd_step).L_star - oracle(r - fd_step).L_star) / (2.0 * fd_step)
    else:
        fd = (oracle(r + fd_step).L_star - center.L_star) / fd_step
    scale = max(abs(fd), abs(formula), 1e-12)
    report = DerivativeReport(
        r=r,
        L_star=center.L_star,
        p_at_r=p_r,
        p_at_Lr=p_Lr,
        formula_value=formula,
        fd_value=fd,
        rel_gap=abs(formula - fd) / scale,
        fd_step=fd_step,
        sign_check=int(np.sign(p0.at(0.0) - p0.at(center.L_star))) if r == 0.0 else None,
    )
    lab_log("INFO", f"dL*/dr at r={r:g}: formula={formula:.6f} fd={fd:.6f} gap={report.rel_gap:.3e}")
    return report
