import numpy as np
import pytest

from floquet.bundle import compute_bundle, frozen_trajectory, propagate_forward
from floquet.diagnostics import (
    adjoint_uniqueness_gap,
    convergence_to_phi,
    domain_doubling_check,
    duality_drift,
    growth_rate,
    pairing_drift,
    project_out_bundle,
    separation_rate,
    spatial_decay_report,
)
from model.config import FloquetParams, SolverParams
from model.errors import BadArguments, BudgetExhausted
from model.grid import Field, Grid
from model.nonlinearity import make_cubic
from steady.eigen import principal_eigenpair, second_eigenpair
from steady.ground_state import ground_state, ground_state_newton

NL = make_cubic(0.3)
GRID = Grid.symmetric(30.0, 601)
CN = SolverParams(dt=0.01, T_max=20.0, store_stride=10, scheme="imex_cn")
FLOQUET = FloquetParams()


@pytest.fixture(scope="module")
def steady():
    return ground_state(NL, GRID)


@pytest.fixture(scope="module")
def eigen(steady):
    return principal_eigenpair(NL, GRID, steady.W)


@pytest.fixture(scope="module")
def frozen(steady):
    return frozen_trajectory(steady)


@pytest.fixture(scope="module")
def bundle(frozen, eigen):
    return compute_bundle(frozen, NL, eigen, CN, FLOQUET, T_end=20.0)


def test_adjoint_stays_on_phi_along_the_steady_state(bundle):
    assert np.max(convergence_to_phi(bundle)) <= 1e-8


def test_pairing_drift_is_within_tolerance(bundle):
    assert np.max(pairing_drift(bundle)) <= FLOQUET.tol_pair


def test_forward_growth_rate_is_minus_lambda(bundle, eigen):
    assert growth_rate(bundle.v) == pytest.approx(-eigen.lam, rel=1e-3)


def test_duality_is_conserved_for_any_direction(frozen, bundle):
    rng = np.random.default_rng(3)
    h = rng.normal(size=GRID.n)
    h[0] = h[-1] = 0.0
    udot = propagate_forward(frozen, NL, Field(GRID, h), CN, bundle.T_end, require_positive=False)
    assert duality_drift(bundle, udot) <= 1e-8 * max(1.0, abs(bundle.p0().dot(Field(GRID, h))))


def test_projection_removes_the_pairing(bundle):
    h = Field(GRID, np.exp(-(GRID.nodes - 2.0) ** 2))
    assert bundle.p0().dot(project_out_bundle(bundle, h)) == pytest.approx(0.0, abs=1e-12)


def test_separation_rate_matches_the_spectral_gap(frozen, steady, eigen, bundle):
    second = second_eigenpair(NL, GRID, steady.W, eigen)
    report = separation_rate(frozen, NL, bundle, second.phi, CN)
    assert report.gamma_fit == pytest.approx(second.lam - eigen.lam, rel=0.05)
    assert not report.degenerate


def test_separation_along_the_bundle_is_degenerate(frozen, bundle):
    report = separation_rate(frozen, NL, bundle, bundle.v0(), CN)
    assert report.degenerate
    assert report.gamma_fit == float("inf")


def test_adjoint_forgets_its_terminal_datum(frozen, eigen):
    long = compute_bundle(frozen, NL, eigen, CN, FLOQUET, T_end=60.0)
    assert adjoint_uniqueness_gap(frozen, NL, long, CN, FLOQUET) <= FLOQUET.tol_unique


def test_adjoint_decays_at_least_exponentially(bundle):
    report = spatial_decay_report(bundle, NL)
    assert report.passed
    assert report.delta == pytest.approx(0.9 * np.sqrt(0.3))


def test_domain_doubling_leaves_p0_unchanged(frozen, bundle):
    report = domain_doubling_check(frozen, NL, bundle, CN, FLOQUET)
    assert report.passed
    assert report.distance <= 1e-6


def test_domain_doubling_detects_a_short_domain():
    grid = Grid.symmetric(8.0, 161)
    steady = ground_state(NL, grid)
    eigen = principal_eigenpair(NL, grid, steady.W)
    frozen = frozen_trajectory(steady)
    bundle = compute_bundle(frozen, NL, eigen, CN, FLOQUET, T_end=2.0)
    report = domain_doubling_check(frozen, NL, bundle, CN, FLOQUET)
    assert not report.passed


def test_domain_doubling_respects_memory_budget(frozen, bundle):
    tiny = FloquetParams(memory_budget_mb=1e-3)
    with pytest.raises(BudgetExhausted):
        domain_doubling_check(frozen, NL, bundle, CN, tiny)


def test_domain_doubling_needs_odd_node_count():
    grid = Grid.symmetric(8.0, 160)
    steady = ground_state(NL, grid)
    eigen = principal_eigenpair(NL, grid, steady.W)
    frozen = frozen_trajectory(steady)
    bundle = compute_bundle(frozen, NL, eigen, CN, FLOQUET, T_end=1.0)
    with pytest.raises(BadArguments):
        domain_doubling_check(frozen, NL, bundle, CN, FLOQUET)


def test_domain_doubling_keeps_the_discrete_steady_state():
    be = SolverParams(dt=0.01, T_max=20.0, store_stride=10, scheme="imex_be")
    newton = ground_state_newton(NL, GRID)
    frozen = frozen_trajectory(newton)
    eigen = principal_eigenpair(NL, GRID, newton.W)
    bundle = compute_bundle(frozen, NL, eigen, be, FLOQUET, T_end=20.0)
    report = domain_doubling_check(frozen, NL, bundle, be, FLOQUET)
    assert report.distance <= 1e-6
    assert report.passed
