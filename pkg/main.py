import argparse
import sys
import time
from typing import Optional, Sequence

from model.config import load_config
from model.errors import BudgetExhausted, LabError
from model.lablog import lab_log, summary
from pipeline.acceptance import verify
from pipeline.lab_runner import FAMILIES, LabRunner, parse_floats
from storage.run_log import RunManifest, write_manifest

# Flags that map onto configuration keys; the flag wins over the config file.
CONFIG_FLAGS = {
    "a": "nonlinearity.a",
    "x_max": "grid.x_max",
    "n": "grid.n",
    "bc": "grid.bc",
    "dt": "solver.dt",
    "T_max": "solver.T_max",
    "scheme": "solver.scheme",
    "out": "run.out",
    "workers": "run.workers",
    "rng_seed": "run.seed",
    "j": "optimizer.j",
    "kappa": "optimizer.kappa",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker processes for sweeps")
    common.add_argument("--a", type=float, help="cubic parameter in (0, 1/2)")
    common.add_argument("--x-max", dest="x_max", type=float, help="domain half-width")
    common.add_argument("--n", type=int, help="grid nodes")
    common.add_argument("--bc", choices=["dirichlet_zero", "neumann_zero"])
    common.add_argument("--dt", type=float)
    common.add_argument("--T-max", dest="T_max", type=float)
    common.add_argument("--scheme", choices=["imex_be", "imex_cn"])
    common.add_argument("--rng-seed", dest="rng_seed", type=int, help="random seed for perturbation directions")
    common.add_argument("--no-progress", action="store_true", help="hide progress bars")

    parser = argparse.ArgumentParser(prog="threshold-lab",
                                     description="Sharp thresholds, adjoints and optimal data for bistable equations.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    sub.add_parser("steady", parents=[common], help="ground state W and principal eigenpair")
    sub.add_parser("eigen", parents=[common], help="principal and second eigenpairs at W")

    p = sub.add_parser("simulate", parents=[common], help="evolve one initial datum to its fate")
    p.add_argument("--u0", default="zero", help="zero, W, block, two_bump, constant or a profile CSV")
    p.add_argument("--L", type=float, default=1.0, help="family parameter of the datum")
    p.add_argument("--r", type=float, default=0.0, help="two_bump gap")

    p = sub.add_parser("threshold", parents=[common], help="certified sharp threshold of a family")
    p.add_argument("--family", choices=FAMILIES, default="two_bump")
    p.add_argument("--r", default="0", help="gap, or a comma separated list swept in parallel")
    p.add_argument("--tol", type=float, help="bracket width (default threshold.tol_L)")
    p.add_argument("--save-trajectory", action="store_true", help="write the mid trajectory")

    p = sub.add_parser("adjoint", parents=[common], help="adjoint p and bundle v along a threshold trajectory")
    p.add_argument("--traj", help="spliced threshold trajectory CSV (computed when omitted)")
    p.add_argument("--family", choices=FAMILIES, default="single_block")
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--tol", type=float)
    p.add_argument("--doubling", action="store_true", help="also run the domain-doubling check")

    p = sub.add_parser("perturb", parents=[common], help="fate of u0 + eps h against the sign of <p(0), h>")
    p.add_argument("--from", dest="run_dir", help="directory of an adjoint run (default --out)")
    p.add_argument("--h", help="perturbation profile CSV; random directions when omitted")
    p.add_argument("--eps", default="0.05,0.02,0.01,0.005", help="comma separated eps values")
    p.add_argument("--directions", type=int, default=20)
    p.add_argument("--q", choices=["1", "inf"], default="1", help="margin exponent")

    p = sub.add_parser("orthogonality", parents=[common], help="residual of <p, u_t> along the threshold trajectory")
    p.add_argument("--from", dest="run_dir", help="directory of an adjoint run (default --out)")

    p = sub.add_parser("dldr", parents=[common], help="L*'(r) formula against finite differences")
    p.add_argument("--r-grid", default="0.25,0.5,1.0", help="comma separated r values")
    p.add_argument("--fd-step", type=float, default=0.05)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("optimize", parents=[common], help="bathtub optimizer for the cheapest invading datum")
    p.add_argument("--j", choices=["linear", "quadratic"])
    p.add_argument("--kappa", type=float)
    p.add_argument("--seed", dest="seed_datum", default="single_block",
                   help="single_block, two_bump:<r> or a profile CSV")

    p = sub.add_parser("verify", parents=[common], help="run the acceptance criteria")
    p.add_argument("--only", help="comma separated criterion names")
    return parser


def overrides_from(args: argparse.Namespace) -> dict:
    values = {key: getattr(args, flag, None) for flag, key in CONFIG_FLAGS.items()}
    if args.no_progress:
        values["run.progress"] = False
    return values


def dispatch(runner: LabRunner, args: argparse.Namespace) -> str:
    command = args.command
    if command == "steady":
        return runner.steady_cmd()
    if command == "eigen":
        return runner.eigen_cmd()
    if command == "simulate":
        return runner.simulate_cmd(args.u0, args.L, args.r)
    if command == "threshold":
        return runner.threshold_cmd(args.family, parse_floats(args.r), args.tol, args.save_trajectory)
    if command == "adjoint":
        return runner.adjoint_cmd(args.traj, args.family, args.r, args.tol, args.doubling)
    if command == "perturb":
        return runner.perturb_cmd(args.run_dir, args.h, parse_floats(args.eps), args.directions, args.q)
    if command == "orthogonality":
        return runner.orthogonality_cmd(args.run_dir)
    if command == "dldr":
        return runner.dldr_cmd(parse_floats(args.r_grid), args.fd_step, args.tol)
    if command == "optimize":
        return runner.optimize_cmd(args.seed_datum)
    only = [name.strip() for name in args.only.split(",")] if args.only else None
    return verify(runner, only)


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point: parses arguments, runs one subcommand and writes the run manifest.

    Returns:
        int: 0 on success, otherwise the exit code of the LabError raised.
    """
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    runner: Optional[LabRunner] = None
    exit_code = 0
    try:
        cfg = load_config(args.config, overrides_from(args))
        runner = LabRunner(cfg)
        summary(dispatch(runner, args))
    except BudgetExhausted as e:
        lab_log("ERROR", str(e))
        if e.bracket is not None:
            lab_log("ERROR", f"best certified bracket: [{e.bracket[0]:.10g}, {e.bracket[1]:.10g}]")
        exit_code = e.exit_code
    except LabError as e:
        lab_log("ERROR", str(e))
        exit_code = e.exit_code
    if runner is not None:
        manifest = RunManifest(command=args.command, config=runner.echo,
                               wall_clock_s=time.perf_counter() - start, exit_code=exit_code)
        write_manifest(runner.out, manifest, inputs=[p for p in runner.inputs if p.exists()],
                       outputs=runner.outputs)
    return exit_code


if __name__ == "__main__":
    sys.exit(cli())
