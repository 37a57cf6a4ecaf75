from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from tqdm import tqdm

from floquet.bundle import FloquetBundle
from forward.fate import resolve_fate
from model.config import FateParams, SolverParams, ThresholdParams
from model.errors import BadArguments, BudgetExhausted
from model.grid import Field, norms
from model.lablog import lab_log
from model.nonlinearity import Nonlinearity
from model.trajectory import Trajectory
from threshold.bisection import settle_fate

Exponent = Literal["1", "inf"]

DEFAULT_EPS = (0.05, 0.02, 0.01, 0.005)


@dataclass(frozen=True)
class PerturbationRow:
    """
    One perturbed run u0 + eps h.

    Attributes:
        eps (float): Perturbation size.
        pairing (float): S = int p(0) h dx.
        predicted (str): "invasion" when S > 0, "extinction" when S < 0.
        observed (str): Certified fate of u0 + eps h.
    """
    eps: float
    pairing: float
    predicted: str
    observed: str

    @property
    def agrees(self) -> bool:
        return self.predicted == self.observed

    def to_dict(self) -> dict:
        return {**self.__dict__, "agrees": self.agrees}


def predicted_fate(pairing: float) -> str:
    if pairing > 0.0:
        return "invasion"
    if pairing < 0.0:
        return "extinction"
    return "undecided"


def check_admissible(u0: Field, h: Field, eps: float) -> None:
    """Raises BadArguments unless 0 <= u0 + eps h <= 1 (1e-12 slack)."""
    u = u0.values + eps * h.values
    if u.min() < -1e-12 or u.max() > 1.0 + 1e-12:
        raise BadArguments(f"Perturbation eps={eps:g} leaves [0, 1]: range [{u.min():.3g}, {u.max():.3g}]")


def perturbation_fate(traj: Trajectory, nl: Nonlinearity, bundle: FloquetBundle, h: Field,
                      eps_list: Sequence[float], solver: SolverParams, fate: FateParams,
                      threshold: ThresholdParams) -> list[PerturbationRow]:
    """
    Evolves u0 + eps h for each eps and compares the fate with the sign of int p(0) h.

    u0 is the initial datum of the threshold trajectory.

    Args:
        traj (Trajectory): Threshold trajectory.
        nl (Nonlinearity): Reaction term.
        bundle (FloquetBundle): Normalized bundle along traj.
        h (Field): Perturbation direction.
        eps_list (Sequence[float]): Perturbation sizes.
        solver (SolverParams): Time stepping of the trials.
        fate (FateParams): Certificate parameters.
        threshold (ThresholdParams): max_escalation for undecided trials.

    Returns:
        list[PerturbationRow]: One row per eps, in the given order.

    Raises:
        BadArguments: If some u0 + eps h leaves [0, 1].
    """
    u0 = traj.field(0)
    for eps in eps_list:
        check_admissible(u0, h, eps)
    fate = resolve_fate(nl, u0.grid, solver, fate)
    S = bundle.p0().dot(h)
    rows = []
    for eps in eps_list:
        try:
            observed = settle_fate(nl, u0.grid, Field(u0.grid, u0.values + eps * h.values), solver, fate,
                                   threshold.max_escalation, threshold.trial_stride)[0].kind
        except BudgetExhausted:
            observed = "undecided"
        rows.append(PerturbationRow(float(eps), S, predicted_fate(S), observed))
        lab_log("FATE", f"eps={eps:g} S={S:.4e} predicted={rows[-1].predicted} observed={observed}")
    return rows


def random_direction(u0: Field, rng: np.random.Generator, spread: float, bumps: int = 3) -> Field:
    """
    Random smooth sign-changing direction with u0 + eps h in [0, 1] for all eps in [0, 1].

    h = a (1 - u0) - b u0 where a and b are sums of Gaussian bumps with peaks in [0, 1]
    centered within spread of the origin.
    """
    x = u0.grid.nodes

    def bump_sum():
        centers = rng.uniform(-spread, spread, bumps)
        widths = rng.uniform(0.3, 1.5, bumps)
        heights = rng.uniform(0.0, 1.0, bumps)
        g = np.sum(heights[:, None] * np.exp(-((x[None, :] - centers[:, None]) / widths[:, None]) ** 2), axis=0)
        return np.minimum(g, 1.0)

    values = bump_sum() * (1.0 - u0.values) - bump_sum() * u0.values
    if u0.grid.bc == "dirichlet_zero":
        values[0] = values[-1] = 0.0
    return Field(u0.grid, values)


def pairing_margin(bundle: FloquetBundle, h: Field, q: Exponent) -> float:
    """
    |int p(0) h| relative to its Hoelder bound for the L^q norm of h.

    q = "1": divided by ||h||_1 ||p(0)||_sup; q = "inf": by ||h||_sup ||p(0)||_1.
    """
    p0 = bundle.p0()
    hn, pn = norms(h), norms(p0)
    bound = hn.l1 * pn.sup if q == "1" else hn.sup * pn.l1
    return abs(p0.dot(h)) / bound if bound > 0.0 else 0.0


@dataclass(frozen=True, eq=False)
class DirectionOutcome:
    """
    Fate prediction for one random direction.

    Attributes:
        index (int): Draw number.
        pairing (float): int p(0) h dx.
        margin (float): pairing_margin of h.
        predicted (str): Fate predicted by the sign of the pairing.
        stabilized (str): Fate at the smallest eps.
        eps_stable (float): Largest eps from which every smaller eps gives the same fate.
        fates (list[str]): Observed fates in eps order.
    """
    index: int
    pairing: float
    margin: float
    predicted: str
    stabilized: str
    eps_stable: float
    fates: list[str] = field(repr=False)

    @property
    def agrees(self) -> bool:
        return self.predicted == self.stabilized

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "pairing": self.pairing,
            "margin": self.margin,
            "predicted": self.predicted,
            "stabilized": self.stabilized,
            "eps_stable": self.eps_stable,
            "agrees": self.agrees,
        }


@dataclass(frozen=True, eq=False)
class HarnessReport:
    outcomes: list[DirectionOutcome]
    draws: int
    q: Exponent

    @property
    def agreement(self) -> int:
        return sum(o.agrees for o in self.outcomes)

    def rows(self) -> list[dict]:
        return [o.to_dict() for o in self.outcomes]


def fate_prediction_harness(traj: Trajectory, nl: Nonlinearity, bundle: FloquetBundle, solver: SolverParams,
                            fate: FateParams, threshold: ThresholdParams, n_directions: int = 20,
                            eps_list: Sequence[float] = DEFAULT_EPS, q: Exponent = "1", seed: int = 12345,
                            margin: float = 0.1, spread: Optional[float] = None, max_draws: int = 400,
                            progress: bool = False) -> HarnessReport:
    """
    Monte-Carlo check that the sign of int p(0) h decides the fate of u0 + eps h.

    Random admissible directions are drawn until n_directions pass the margin filter;
    each is run for every eps in decreasing order and the fate at the smallest eps is
    compared with the prediction.

    Args:
        traj (Trajectory): Threshold trajectory (its first row is u0).
        nl (Nonlinearity): Reaction term.
        bundle (FloquetBundle): Bundle along traj.
        solver (SolverParams): Time stepping of the trials.
        fate (FateParams): Certificate parameters.
        threshold (ThresholdParams): max_escalation for undecided trials.
        n_directions (int): Directions to test.
        eps_list (Sequence[float]): Perturbation sizes.
        q (str): "1" or "inf", the norm of the margin filter.
        seed (int): Random seed.
        margin (float): Required pairing_margin.
        spread (float | None): Bump centers lie in [-spread, spread]; defaults to 3/sqrt(|f'(0)|).
        max_draws (int): Draw cap.
        progress (bool): Show a tqdm bar.

    Returns:
        HarnessReport: One outcome per accepted direction.

    Raises:
        BudgetExhausted: If fewer than n_directions pass the filter within max_draws.
    """
    if q not in ("1", "inf"):
        raise BadArguments(f"q must be '1' or 'inf', got {q!r}")
    u0 = traj.field(0)
    grid = u0.grid
    fate = resolve_fate(nl, grid, solver, fate)
    eps_sorted = sorted((float(e) for e in eps_list), reverse=True)
    if spread is None:
        spread = 3.0 / np.sqrt(abs(nl.f0_prime(0.0)))
    rng = np.random.default_rng(seed)
    outcomes, draws = [], 0
    with tqdm(total=n_directions, desc="directions", disable=not progress, leave=False) as bar:
        while len(outcomes) < n_directions:
            if draws >= max_draws:
                raise BudgetExhausted(f"Only {len(outcomes)} of {n_directions} directions passed the margin "
                                      f"filter in {max_draws} draws")
            draws += 1
            h = random_direction(u0, rng, spread)
            m = pairing_margin(bundle, h, q)
            if m < margin:
                continue
            S = bundle.p0().dot(h)
            fates = []
            for eps in eps_sorted:
                try:
                    kind = settle_fate(nl, grid, Field(grid, u0.values + eps * h.values), solver, fate,
                                       threshold.max_escalation, threshold.trial_stride)[0].kind
                except BudgetExhausted:
                    kind = "undecided"
                fates.append(kind)
            stable = len(fates) - 1
            while stable > 0 and fates[stable - 1] == fates[-1]:
                stable -= 1
            outcome = DirectionOutcome(len(outcomes), S, m, predicted_fate(S), fates[-1], eps_sorted[stable], fates)
            if not outcome.agrees:
                lab_log("WARN", f"direction {outcome.index}: predicted {outcome.predicted}, "
                                f"observed {outcome.stabilized}")
            outcomes.append(outcome)
            bar.update(1)
    report = HarnessReport(outcomes, draws, q)
    lab_log("FATE", f"fate prediction: {report.agreement}/{len(outcomes)} agree ({draws} draws)")
    return report
