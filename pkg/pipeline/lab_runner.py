from dataclasses import dataclass
from functools import cached_property, partial
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from applications.bathtub import BathtubResult, bathtub_optimize, ground_state_not_minimizer, mass_of_ground_state
from applications.derivative import lstar_derivative
from applications.orthogonality import orthogonality_residual
from applications.perturbation import (
    DEFAULT_EPS,
    fate_prediction_harness,
    perturbation_fate,
    random_direction,
)
from floquet.bundle import FloquetBundle
from floquet.diagnostics import (
    bundle_with_diagnostics,
    convergence_to_phi,
    domain_doubling_check,
    pairing_drift,
    project_out_bundle,
    separation_rate,
    spatial_decay_report,
)
from forward.fate import run_fate, resolve_fate, truncation_check
from model.config import FateParams, LabConfig
from model.errors import BadArguments, NotConverged, NumericFailure
from model.grid import Field, Grid
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity, make_cubic
from model.trajectory import Trajectory
from steady.eigen import EigenPair, near_null_ratio, principal_eigenpair, rayleigh_quotient, second_eigenpair
from steady.ground_state import GroundState, ground_state
from storage.run_log import (
    read_profile,
    read_trajectory,
    write_profile,
    write_report,
    write_trajectory,
)
from threshold.bisection import (
    ThresholdResult,
    default_steady,
    find_critical_length,
    hover_time,
    threshold_trajectory,
)
from threshold.families import Family
from pipeline.sweep import run_sweep

FAMILIES = ("two_bump", "single_block", "constant")

# File names shared by the adjoint, perturb and orthogonality subcommands.
THRESHOLD_TRAJ = "threshold_traj.csv"
STEADY_PROFILE = "W_discrete.csv"
ADJOINT_TRAJ = "p.csv"
BUNDLE_TRAJ = "v.csv"


def make_family(kind: str, grid: Grid, r: float = 0.0) -> Family:
    """
    Builds a data family from its command-line name.

    Raises:
        BadArguments: On an unknown family.
    """
    if kind == "two_bump":
        return Family.two_bump(grid, r)
    if kind == "single_block":
        return Family.single_block(grid)
    if kind == "constant":
        return Family.constant(grid)
    raise BadArguments(f"Unknown family '{kind}', expected one of {', '.join(FAMILIES)}")


def parse_floats(text: Optional[str]) -> list[float]:
    """Parses '0.25,0.5,1' into floats."""
    if not text:
        return []
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise BadArguments(f"Not a comma separated list of numbers: {text!r}") from e


@dataclass(frozen=True)
class SweepContext:
    """Read-only inputs shipped to sweep workers."""
    cfg: LabConfig
    fate: FateParams
    steady: Field

    def nl(self) -> Nonlinearity:
        return make_cubic(self.cfg.nonlinearity.a)

    def grid(self) -> Grid:
        g = self.cfg.grid
        return Grid.symmetric(g.x_max, g.n, g.bc)


def threshold_job(ctx: SweepContext, kind: str, tol_L: float, r: float) -> tuple[ThresholdResult, Optional[float]]:
    """
    One threshold computation: certified bracket plus the splice time of the mid trajectory.

    Returns:
        tuple[ThresholdResult, float | None]: The result and T_c (None when no splice was found).
    """
    cfg = ctx.cfg
    family = make_family(kind, ctx.grid(), r)
    result = find_critical_length(family, ctx.nl(), cfg.solver, ctx.fate, cfg.threshold, tol_L, steady=ctx.steady)
    try:
        T_c = threshold_trajectory(result, cfg.floquet.splice_tol, cfg.threshold.tol_W).splice_time
    except NumericFailure as e:
        lab_log("WARN", f"{family.label}: {e}")
        T_c = None
    return result, T_c


def derivative_job(ctx: SweepContext, fd_step: float, tol_L: float, r: float) -> dict:
    cfg = ctx.cfg
    report = lstar_derivative(ctx.nl(), ctx.grid(), r, fd_step, cfg.solver, ctx.fate, cfg.threshold, cfg.floquet,
                              tol_L, steady=ctx.steady)
    return report.model_dump()


def threshold_row(result: ThresholdResult, T_c: Optional[float], nl: Nonlinearity) -> dict:
    return {
        "family": result.family.kind,
        "r": result.family.r,
        "L_lo": result.L_lo,
        "L_hi": result.L_hi,
        "L_star": result.L_star,
        "dist_to_W": result.dist_to_W,
        "T_c": T_c,
        "hover_time": hover_time(result.mid_traj, result.steady),
        "truncation_ok": truncation_check(result.mid_traj, nl).passed,
        "trials": result.trials,
        "escalation": result.escalation,
    }


class LabRunner:
    """
    Executes the subcommands against one resolved configuration.

    Every subcommand writes its files into the output directory and returns the
    one-line summary; files written and read are collected for the run manifest.
    """

    def __init__(self, cfg: LabConfig, out_dir: Optional[str | Path] = None):
        self.cfg = cfg
        self.out = Path(out_dir or cfg.run.out)
        self.nl = make_cubic(cfg.nonlinearity.a)
        self.grid = Grid.symmetric(cfg.grid.x_max, cfg.grid.n, cfg.grid.bc)
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []

    # --- shared state ------------------------------------------------------

    @cached_property
    def steady(self) -> GroundState:
        return ground_state(self.nl, self.grid)

    @cached_property
    def discrete_steady(self) -> Field:
        """Steady state of the discrete scheme, the reference of threshold comparisons."""
        return default_steady(self.nl, self.grid)

    @cached_property
    def eigen(self) -> EigenPair:
        return principal_eigenpair(self.nl, self.grid, self.steady.W)

    @property
    def echo(self) -> list[str]:
        return self.cfg.echo()

    @cached_property
    def fate(self) -> FateParams:
        """Invasion box, calibrated once and cached in the configuration (and so in every later header)."""
        fate = resolve_fate(self.nl, self.grid, self.cfg.solver, self.cfg.fate)
        self.cfg = self.cfg.with_overrides({"fate.alpha_inv": fate.alpha_inv, "fate.R_inv": fate.R_inv})
        return fate

    def context(self) -> SweepContext:
        return SweepContext(self.cfg, self.fate, self.discrete_steady)

    def _save(self, path: Path) -> Path:
        self.outputs.append(path)
        return path

    def save_profile(self, name: str, fld: Field, extra: Optional[dict] = None) -> Path:
        return self._save(write_profile(self.out / name, fld, self.echo, extra))

    def save_trajectory(self, name: str, traj: Trajectory, extra: Optional[dict] = None) -> Path:
        return self._save(write_trajectory(self.out / name, traj, self.echo, extra))

    def save_report(self, name: str, rows: list[dict], extra: Optional[dict] = None) -> Path:
        return self._save(write_report(self.out / name, rows, self.echo, extra))

    def _input(self, path: str | Path) -> Path:
        path = Path(path)
        self.inputs.append(path)
        return path

    # --- steady / eigen ----------------------------------------------------

    def steady_cmd(self) -> str:
        steady, eigen = self.steady, self.eigen
        self.save_profile("W.csv", steady.W, {"beta_star": steady.beta_star})
        self.save_profile("phi.csv", eigen.phi, {"lambda": eigen.lam})
        report = {
            **steady.to_dict(),
            "lambda": eigen.lam,
            "eigen_residual": eigen.residual,
            "near_null_ratio": near_null_ratio(self.nl, steady.W),
            "mass_W": mass_of_ground_state(steady),
        }
        self.save_report("steady_report.csv", [report])
        if eigen.lam >= 0.0:
            raise NumericFailure(f"Principal eigenvalue {eigen.lam:.6g} is not negative")
        return f"{{beta_star: {steady.beta_star:.10g}, lambda: {eigen.lam:.10g}, residual: {steady.residual:.3e}}}"

    def eigen_cmd(self) -> str:
        eigen = self.eigen
        second = second_eigenpair(self.nl, self.grid, self.steady.W, eigen)
        self.save_profile("phi.csv", eigen.phi, {"lambda": eigen.lam})
        self.save_profile("phi2.csv", second.phi, {"lambda": second.lam})
        report = {
            "lambda": eigen.lam,
            "rayleigh": rayleigh_quotient(self.nl, self.steady.W, eigen.phi),
            "residual": eigen.residual,
            "iterations": eigen.iterations,
            "lambda2": second.lam,
            "spectral_gap": second.lam - eigen.lam,
            "near_null_ratio": near_null_ratio(self.nl, self.steady.W),
        }
        self.save_report("eigen_report.csv", [report])
        return f"lambda={eigen.lam:.10g} lambda2={second.lam:.10g} gap={second.lam - eigen.lam:.6g}"

    # --- forward -----------------------------------------------------------

    def initial_datum(self, u0: str, L: float = 1.0, r: float = 0.0) -> Field:
        """
        Resolves --u0: zero, W, block, two_bump, constant or a profile CSV path.
        """
        if u0 == "zero":
            return Field.zeros(self.grid)
        if u0 == "W":
            return self.steady.W
        if u0 == "block":
            return Family.single_block(self.grid).datum(L)
        if u0 in ("two_bump", "constant"):
            return make_family(u0, self.grid, r).datum(L)
        profile = read_profile(self._input(u0))
        if profile.grid != self.grid:
            raise BadArguments(f"{u0} was written on {profile.grid}, the run uses {self.grid}")
        return profile

    def simulate_cmd(self, u0: str = "zero", L: float = 1.0, r: float = 0.0) -> str:
        datum = self.initial_datum(u0, L, r)
        fate, traj = run_fate(self.nl, self.grid, datum, self.cfg.solver, self.fate,
                                store_stride=self.cfg.solver.store_stride)
        truncation = truncation_check(traj, self.nl)
        self.save_trajectory("trajectory.csv", traj)
        self.save_report("simulate_report.csv", [{**fate.to_dict(), "truncation_ok": truncation.passed,
                                              "truncation": truncation.message}])
        return f"{fate.kind.capitalize()} at t={fate.time:.6g} (sup u={fate.sup_u:.6g})"

    # --- threshold ---------------------------------------------------------

    def threshold_cmd(self, family: str = "two_bump", r_values: Sequence[float] = (0.0,),
                      tol: Optional[float] = None, save_trajectory: bool = False) -> str:
        kind_values = list(r_values) if family == "two_bump" else [0.0]
        job = partial(threshold_job, self.context(), family, tol or self.cfg.tol_L())
        runs = run_sweep(job, kind_values, self.cfg.run.workers, self.cfg.run.progress, desc="threshold")
        rows = [threshold_row(result, T_c, self.nl) for result, T_c in runs]
        self.save_report("threshold.csv", rows)
        if save_trajectory:
            for result, _ in runs:
                self.save_trajectory(f"mid_traj_r{result.family.r:g}.csv", result.mid_traj,
                                 {"L_star": result.L_star})
        return "; ".join(f"{row['family']} r={row['r']:g}: L*={row['L_star']:.10g} "
                         f"[{row['L_lo']:.10g}, {row['L_hi']:.10g}] dist={row['dist_to_W']:.2e}" for row in rows)

    def critical_trajectory(self, family: str, r: float, tol: Optional[float]) -> tuple[ThresholdResult, Trajectory]:
        result, _ = threshold_job(self.context(), family, tol or self.cfg.tol_L(), r)
        fl = self.cfg.floquet
        return result, threshold_trajectory(result, fl.splice_tol, self.cfg.threshold.tol_W)

    # --- adjoint -----------------------------------------------------------

    def projected_direction(self, bundle: FloquetBundle, u0: Field, seed: int) -> Field:
        spread = 3.0 / np.sqrt(abs(float(self.nl.f0_prime(0.0))))
        h = random_direction(u0, np.random.default_rng(seed), spread)
        return project_out_bundle(bundle, h)

    def adjoint_cmd(self, traj_path: Optional[str] = None, family: str = "single_block", r: float = 0.0,
                    tol: Optional[float] = None, doubling: bool = False) -> str:
        if traj_path:
            traj = read_trajectory(self._input(traj_path), steady_state=self.discrete_steady)
            if traj.splice_time is None:
                raise BadArguments(f"{traj_path} carries no splice_time; pass a threshold trajectory")
        else:
            _, traj = self.critical_trajectory(family, r, tol)
        bundle, report = bundle_with_diagnostics(traj, self.nl, self.cfg.solver, self.cfg.floquet)
        try:
            h = self.projected_direction(bundle, traj.field(0), self.cfg.run.seed)
            report["gamma_fit"] = separation_rate(traj, self.nl, bundle, h, self.cfg.solver).gamma_fit
        except NumericFailure as e:
            lab_log("WARN", f"separation fit skipped: {e}")
        gamma = report["gamma_fit"]
        decay = spatial_decay_report(bundle, self.nl)
        report.update({"decay_ok": decay.passed, "decay_failures_after_splice": decay.failures_after_splice})
        if doubling:
            check = domain_doubling_check(traj, self.nl, bundle, self.cfg.solver, self.cfg.floquet)
            report.update({"doubling_distance": check.distance, "doubling_ok": check.passed})
        series = [{"t": t, "pairing_drift": drift, "d_to_phi": d}
                  for t, drift, d in zip(bundle.p.times, pairing_drift(bundle), convergence_to_phi(bundle))]
        self.save_trajectory(THRESHOLD_TRAJ, traj)
        self.save_profile(STEADY_PROFILE, traj.steady_state)
        self.save_trajectory(ADJOINT_TRAJ, bundle.p, {"T_end": bundle.T_end})
        self.save_trajectory(BUNDLE_TRAJ, bundle.v, {"T_end": bundle.T_end})
        self.save_profile("p0.csv", bundle.p0())
        self.save_profile("v0.csv", bundle.v0())
        self.save_report("adjoint_series.csv", series)
        self.save_report("adjoint_report.csv", [report])
        gamma_text = "n/a" if gamma is None else f"{gamma:.6g}"
        return (f"lambda={report['lambda']:.8g} T_splice={report['T_splice']:.6g} T_end={report['T_end']:.6g} "
                f"pairing_drift={report['pairing_drift']:.2e} uniqueness_gap={report['uniqueness_gap']:.2e} "
                f"gamma_fit={gamma_text}")

    def load_bundle(self, run_dir: str | Path) -> tuple[Trajectory, FloquetBundle]:
        """
        Rebuilds the threshold trajectory and bundle written by an earlier adjoint run.

        Raises:
            BadArguments: If any of the files is missing.
        """
        run_dir = Path(run_dir)
        W = read_profile(self._input(run_dir / STEADY_PROFILE))
        traj = read_trajectory(self._input(run_dir / THRESHOLD_TRAJ), steady_state=W)
        if traj.splice_time is None:
            raise BadArguments(f"{run_dir / THRESHOLD_TRAJ} carries no splice_time")
        p = read_trajectory(self._input(run_dir / ADJOINT_TRAJ))
        v = read_trajectory(self._input(run_dir / BUNDLE_TRAJ))
        eigen = principal_eigenpair(self.nl, W.grid, W)
        return traj, FloquetBundle(p, v, eigen, traj.splice_time, p.t_end)

    # --- applications ------------------------------------------------------

    def perturb_cmd(self, run_dir: Optional[str] = None, h_path: Optional[str] = None,
                    eps: Sequence[float] = DEFAULT_EPS, directions: int = 20, q: str = "1") -> str:
        traj, bundle = self.load_bundle(run_dir or self.out)
        if h_path:
            h = read_profile(self._input(h_path))
            rows = perturbation_fate(traj, self.nl, bundle, h, eps, self.cfg.solver, self.fate, self.cfg.threshold)
            self.save_report("perturb.csv", [row.to_dict() for row in rows])
            agree = sum(row.agrees for row in rows)
            return f"predicted {rows[0].predicted}; {agree}/{len(rows)} eps values agree"
        report = fate_prediction_harness(traj, self.nl, bundle, self.cfg.solver, self.fate, self.cfg.threshold,
                                         n_directions=directions, eps_list=eps, q=q, seed=self.cfg.run.seed,
                                         progress=self.cfg.run.progress)
        self.save_report("perturb_harness.csv", report.rows(), {"q": q, "draws": report.draws})
        return f"{report.agreement}/{len(report.outcomes)} directions agree (q={q}, {report.draws} draws)"

    def orthogonality_cmd(self, run_dir: Optional[str] = None) -> str:
        traj, bundle = self.load_bundle(run_dir or self.out)
        report = orthogonality_residual(traj, bundle)
        self.save_report("orthogonality.csv", [{"t": t, "rho": rho} for t, rho in zip(report.times, report.rho)],
                     report.to_dict())
        return f"rho median={report.median:.3e} max={report.max:.3e} over {report.rho.size} samples"

    def dldr_cmd(self, r_grid: Sequence[float] = (0.25, 0.5, 1.0), fd_step: float = 0.05,
                 tol: Optional[float] = None) -> str:
        job = partial(derivative_job, self.context(), fd_step, tol or self.cfg.tol_L())
        rows = run_sweep(job, list(r_grid), self.cfg.run.workers, self.cfg.run.progress, desc="dldr")
        self.save_report("dldr.csv", rows)
        return "; ".join(f"r={row['r']:g}: formula={row['formula_value']:.6g} fd={row['fd_value']:.6g} "
                         f"gap={row['rel_gap']:.2%}" for row in rows)

    def seed_family(self, seed: str) -> Family:
        """
        Resolves --seed: single_block, two_bump:<r> or a profile CSV path.
        """
        if seed == "single_block":
            return Family.single_block(self.grid)
        if seed.startswith("two_bump:"):
            return Family.two_bump(self.grid, parse_floats(seed.split(":", 1)[1])[0])
        return Family.scaled_profile(read_profile(self._input(seed)))

    def optimize_cmd(self, seed: str = "single_block") -> str:
        cfg = self.cfg
        try:
            result = bathtub_optimize(self.nl, self.grid, self.seed_family(seed), cfg.solver, self.fate,
                                      cfg.threshold, cfg.floquet, cfg.optimizer, cfg.tol_L(),
                                      steady=self.discrete_steady)
        except NotConverged as err:
            if err.best is not None:
                self.save_optimum(err.best, seed)
            raise
        mass_W = self.save_optimum(result, seed)
        return (f"mass={result.mass:.8g} (mass_W={mass_W:.8g}) kkt_violation={result.kkt_violation:.2e} "
                f"converged={result.converged}")

    def save_optimum(self, result: BathtubResult, seed: str) -> float:
        """Writes u0_opt.csv and the optimizer reports; returns the ground-state mass."""
        cfg = self.cfg
        certificate = ground_state_not_minimizer(self.steady, self.eigen)
        self.save_profile("u0_opt.csv", result.u0_opt, {"mass": result.mass})
        self.save_report("optimize_history.csv", [{"iteration": k, "mass": m} for k, m in enumerate(result.history, 1)])
        self.save_report("optimize_report.csv", [{
            **result.to_dict(),
            "j": cfg.optimizer.j,
            "seed": seed,
            "sandwich_holds": result.sandwich_holds(cfg.optimizer.kkt_tol),
            "mass_W": certificate.mass_W,
            "phi_spread": certificate.spread,
        }])
        return certificate.mass_W
