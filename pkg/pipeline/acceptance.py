import time
from dataclasses import dataclass
from functools import partial
from typing import Callable, Iterable, Optional

import numpy as np

from applications.bathtub import bathtub_optimize, mass_of_ground_state
from applications.orthogonality import orthogonality_residual
from applications.perturbation import fate_prediction_harness
from floquet.bundle import FloquetBundle, compute_bundle, frozen_trajectory
from floquet.diagnostics import bundle_with_diagnostics, domain_doubling_check, project_out_bundle, separation_rate
from forward.fate import truncation_check
from model.config import LabConfig, SolverParams
from model.errors import BadArguments, LabError, NumericFailure
from model.grid import Grid
from model.lablog import lab_log
from model.trajectory import Trajectory
from pipeline.lab_runner import LabRunner, derivative_job, threshold_job
from pipeline.sweep import run_sweep
from steady.eigen import near_null_ratio, rayleigh_quotient, second_eigenpair
from steady.ground_state import ground_state, pde_residual
from threshold.bisection import ThresholdResult, threshold_trajectory

Check = Callable[[], tuple[bool, str]]

TWO_BUMP_R = (0.5, 1.0, 2.0)
DERIVATIVE_R = (0.25, 0.5, 1.0)
BRACKET_WIDTH = 1e-5
FD_STEP = 0.05


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    message: str
    seconds: float

    def to_dict(self) -> dict:
        return {"criterion": self.name, "passed": self.passed, "message": self.message, "seconds": self.seconds}


class AcceptanceSuite:
    """
    The verify subcommand: one registered check per acceptance criterion.

    Checks share the runner's cached ground state, eigenpair and invasion box, and
    reuse threshold computations between criteria.
    """

    def __init__(self, runner: LabRunner):
        self.runner = runner
        self.cfg: LabConfig = runner.cfg
        self._thresholds: dict[tuple, tuple[ThresholdResult, Optional[float]]] = {}
        self._bundles: dict[float, tuple[Trajectory, FloquetBundle]] = {}

        self.rules: list[tuple[str, Check]] = [
            ("ground_state", self._check_ground_state),
            ("spectrum", self._check_spectrum),
            ("autonomous_floquet", self._check_autonomous_floquet),
            ("adjoint_uniqueness", self._check_uniqueness),
            ("exponential_separation", self._check_separation),
            ("sharp_threshold", self._check_threshold),
            ("fate_prediction", self._check_fate_prediction),
            ("orthogonality", self._check_orthogonality),
            ("derivative_formula", self._check_derivative),
            ("bathtub", self._check_bathtub),
            ("truncation", self._check_truncation),
        ]

    # --- shared computations -------------------------------------------------

    def thresholds(self, kind: str, r_values: Iterable[float], tol_L: float) -> list[tuple[ThresholdResult, Optional[float]]]:
        """Threshold runs for every r, computed once per (kind, r, tol_L)."""
        r_values = list(r_values)
        missing = [r for r in r_values if (kind, r, tol_L) not in self._thresholds]
        if missing:
            job = partial(threshold_job, self.runner.context(), kind, tol_L)
            for r, run in zip(missing, run_sweep(job, missing, self.cfg.run.workers, self.cfg.run.progress,
                                                 desc=f"{kind} thresholds")):
                self._thresholds[(kind, r, tol_L)] = run
        return [self._thresholds[(kind, r, tol_L)] for r in r_values]

    def critical(self, tol_L: float) -> tuple[Trajectory, FloquetBundle]:
        """Spliced single_block threshold trajectory and its bundle at bisection tolerance tol_L."""
        if tol_L not in self._bundles:
            (result, _), = self.thresholds("single_block", [0.0], tol_L)
            traj = threshold_trajectory(result, self.cfg.floquet.splice_tol, self.cfg.threshold.tol_W)
            bundle, _ = bundle_with_diagnostics(traj, self.runner.nl, self.cfg.solver, self.cfg.floquet)
            self._bundles[tol_L] = (traj, bundle)
        return self._bundles[tol_L]

    def _frozen_bundle(self, T_end: float) -> FloquetBundle:
        """Bundle along u = W, where p and v are phi e^{+-lambda t} up to the CN time error."""
        return compute_bundle(frozen_trajectory(self.runner.steady), self.runner.nl, self.runner.eigen,
                              self._crank_nicolson(), self.cfg.floquet, T_end=T_end)

    def _crank_nicolson(self) -> SolverParams:
        return self.cfg.solver.model_copy(update={"scheme": "imex_cn"})

    # --- criteria ------------------------------------------------------------

    def _check_ground_state(self) -> tuple[bool, str]:
        nl, grid = self.runner.nl, self.runner.grid
        steady = self.runner.steady
        fine = ground_state(nl, Grid.symmetric(grid.x_max, 2 * grid.n - 1, grid.bc))
        coarse_res, fine_res = pde_residual(nl, steady.W), pde_residual(nl, fine.W)
        ratio = coarse_res / fine_res if fine_res > 0.0 else float("inf")
        peak_err = abs(float(np.max(steady.W.values)) - nl.beta_star)
        ok = coarse_res <= 1e-3 and 3.0 <= ratio <= 5.0 and peak_err <= 1e-6
        return ok, f"residual={coarse_res:.3e} halving ratio={ratio:.2f} |W(0)-beta*|={peak_err:.2e}"

    def _check_spectrum(self) -> tuple[bool, str]:
        nl, W, eigen = self.runner.nl, self.runner.steady.W, self.runner.eigen
        rq = rayleigh_quotient(nl, W, eigen.phi)
        null = near_null_ratio(nl, W)
        bound = 5.0 * W.grid.dx ** 2
        ok = eigen.lam < 0.0 and abs(rq - eigen.lam) <= 1e-8 and null <= bound
        return ok, f"lambda={eigen.lam:.10g} |rq-lambda|={abs(rq - eigen.lam):.2e} near_null={null:.2e} (<= {bound:.2e})"

    def _check_autonomous_floquet(self) -> tuple[bool, str]:
        bundle = self._frozen_bundle(20.0)
        lam = self.runner.eigen.lam
        phi = self.runner.eigen.phi.values
        p0 = bundle.p0().values
        worst = 0.0
        for k, t in enumerate(bundle.p.times):
            v_exact = phi * np.exp(-lam * t)
            p_exact = p0 * np.exp(lam * t)
            worst = max(worst,
                        np.max(np.abs(bundle.v.field(k).values - v_exact)) / np.max(v_exact),
                        np.max(np.abs(bundle.p.field(k).values - p_exact)) / np.max(p_exact))
        return worst <= 1e-4, f"sup-relative error {worst:.2e} over 20 time units"

    def _check_uniqueness(self) -> tuple[bool, str]:
        _, bundle = self.critical(self.cfg.tol_L())
        gap = bundle.uniqueness_gap
        return gap <= self.cfg.floquet.tol_unique, f"uniqueness gap {gap:.2e} at T_end={bundle.T_end:.6g}"

    def _check_separation(self) -> tuple[bool, str]:
        runner = self.runner
        traj, bundle = self.critical(self.cfg.tol_L())
        rates = []
        for k in range(10):
            h = runner.projected_direction(bundle, traj.field(0), self.cfg.run.seed + k)
            rates.append(separation_rate(traj, runner.nl, bundle, h, self.cfg.solver).gamma_fit)
        second = second_eigenpair(runner.nl, runner.grid, runner.steady.W, runner.eigen)
        frozen = self._frozen_bundle(40.0)
        h = project_out_bundle(frozen, second.phi)
        gamma = separation_rate(frozen_trajectory(runner.steady), runner.nl, frozen, h,
                                self._crank_nicolson()).gamma_fit
        gap = second.lam - runner.eigen.lam
        ok = min(rates) > 0.0 and abs(gamma - gap) <= 0.05 * gap
        return ok, f"min gamma_fit={min(rates):.4g} over 10 directions; autonomous {gamma:.6g} vs gap {gap:.6g}"

    def _check_threshold(self) -> tuple[bool, str]:
        tol = min(self.cfg.tol_L(), BRACKET_WIDTH)
        runs = self.thresholds("single_block", [0.0], tol) + self.thresholds("two_bump", TWO_BUMP_R, tol)
        widths = [res.L_hi - res.L_lo for res, _ in runs]
        dists = [res.dist_to_W for res, _ in runs]
        ok = max(widths) <= BRACKET_WIDTH and max(dists) <= self.cfg.threshold.tol_W
        return ok, f"max width {max(widths):.2e}, max dist_to_W {max(dists):.2e} over {len(runs)} families"

    def _check_fate_prediction(self) -> tuple[bool, str]:
        traj, bundle = self.critical(self.cfg.tol_L())
        report = fate_prediction_harness(traj, self.runner.nl, bundle, self.cfg.solver, self.runner.fate,
                                         self.cfg.threshold, n_directions=20, seed=self.cfg.run.seed,
                                         progress=self.cfg.run.progress)
        n = len(report.outcomes)
        return report.agreement == n, f"{report.agreement}/{n} directions agree ({report.draws} draws)"

    def _check_orthogonality(self) -> tuple[bool, str]:
        medians = {}
        for tol in (1e-4, 1e-6, 1e-7):
            traj, bundle = self.critical(tol)
            medians[tol] = orthogonality_residual(traj, bundle).median
        ok = medians[1e-6] <= 0.05 and medians[1e-7] < medians[1e-4]
        return ok, ", ".join(f"median rho(tol_L={tol:g})={m:.3e}" for tol, m in medians.items())

    def _derivative_gaps(self, runner: LabRunner) -> list[float]:
        job = partial(derivative_job, runner.context(), FD_STEP, self.cfg.tol_L())
        rows = run_sweep(job, list(DERIVATIVE_R), self.cfg.run.workers, self.cfg.run.progress, desc="dldr")
        return [row["rel_gap"] for row in rows]

    def _check_derivative(self) -> tuple[bool, str]:
        gaps = self._derivative_gaps(self.runner)
        grid = self.cfg.grid
        fine_cfg = self.cfg.with_overrides({"grid.n": 2 * grid.n - 1, "solver.dt": self.cfg.solver.dt / 2})
        fine_gaps = self._derivative_gaps(LabRunner(fine_cfg, self.runner.out))
        ok = max(gaps) <= 0.05 and float(np.mean(fine_gaps)) < float(np.mean(gaps))
        return ok, (f"rel_gap {', '.join(f'{g:.2%}' for g in gaps)}; doubled resolution "
                    f"{', '.join(f'{g:.2%}' for g in fine_gaps)}")

    def _check_bathtub(self) -> tuple[bool, str]:
        runner, cfg = self.runner, self.cfg
        optimizer = cfg.optimizer.model_copy(update={"j": "linear"})
        results = [bathtub_optimize(runner.nl, runner.grid, runner.seed_family(seed), cfg.solver, runner.fate,
                                    cfg.threshold, cfg.floquet, optimizer, cfg.tol_L(), steady=runner.discrete_steady)
                   for seed in ("single_block", "two_bump:1")]
        mass_W = mass_of_ground_state(runner.steady)
        sandwich = all(res.kkt_violation <= optimizer.kkt_tol and res.sandwich_holds(optimizer.kkt_tol)
                       for res in results)
        spread = abs(results[0].mass - results[1].mass)
        ok = sandwich and max(res.mass for res in results) < mass_W and spread <= 2.0 * optimizer.fp_tol
        return ok, (f"masses {results[0].mass:.6g}, {results[1].mass:.6g} (mass_W={mass_W:.6g}); "
                    f"sandwich={'ok' if sandwich else 'violated'}")

    def _check_truncation(self) -> tuple[bool, str]:
        traj, bundle = self.critical(self.cfg.tol_L())
        doubling = domain_doubling_check(traj, self.runner.nl, bundle, self.cfg.solver, self.cfg.floquet)
        runs = list(self._thresholds.values()) or self.thresholds("single_block", [0.0], self.cfg.tol_L())
        failed = [res.family.label for res, _ in runs if not truncation_check(res.mid_traj, self.runner.nl).passed]
        ok = doubling.passed and not failed
        return ok, (f"doubling distance {doubling.distance:.2e}; truncation failures: "
                    f"{', '.join(failed) if failed else 'none'} of {len(runs)} threshold runs")

    # --- driver ----------------------------------------------------------------

    def run(self, only: Optional[Iterable[str]] = None) -> list[Verdict]:
        """
        Runs the selected criteria (all by default) and logs PASS/FAIL for each.

        A criterion that raises counts as failed with the error as its message.

        Raises:
            BadArguments: On an unknown criterion name.
        """
        names = [name for name, _ in self.rules]
        selected = list(only) if only else names
        unknown = [name for name in selected if name not in names]
        if unknown:
            raise BadArguments(f"Unknown criteria {unknown}; choose from {', '.join(names)}")
        verdicts = []
        for name, check in self.rules:
            if name not in selected:
                continue
            start = time.perf_counter()
            try:
                passed, message = check()
            except LabError as e:
                passed, message = False, f"{type(e).__name__}: {e}"
            verdict = Verdict(name, bool(passed), message, time.perf_counter() - start)
            lab_log("VERIFY", f"{'PASS' if verdict.passed else 'FAIL'} {name}: {message} ({verdict.seconds:.1f}s)")
            verdicts.append(verdict)
        return verdicts


def verify(runner: LabRunner, only: Optional[Iterable[str]] = None) -> str:
    """
    Runs the acceptance suite, writes verify.csv and returns the PASS/FAIL summary.

    Raises:
        NumericFailure: If any criterion failed (after the report is written).
    """
    verdicts = AcceptanceSuite(runner).run(only)
    runner.save_report("verify.csv", [v.to_dict() for v in verdicts])
    lines = [f"{'PASS' if v.passed else 'FAIL'} {v.name}: {v.message}" for v in verdicts]
    failed = [v.name for v in verdicts if not v.passed]
    if failed:
        raise NumericFailure("\n".join(lines) + f"\n{len(failed)}/{len(verdicts)} criteria failed")
    return "\n".join(lines)
