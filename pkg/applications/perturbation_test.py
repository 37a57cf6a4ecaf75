import numpy as np
import pytest

from applications.conftest import GRID, NL, SOLVER, THRESHOLD
from applications.perturbation import (
    check_admissible,
    fate_prediction_harness,
    pairing_margin,
    perturbation_fate,
    random_direction,
)
from model.errors import BadArguments
from model.grid import Field


def test_positive_perturbation_invades(critical, bundle, box):
    u0 = critical.field(0)
    h = Field(GRID, np.exp(-(GRID.nodes - 1.0) ** 2) * (1.0 - u0.values))
    rows = perturbation_fate(critical, NL, bundle, h, [0.05], SOLVER, box, THRESHOLD)
    assert rows[0].pairing > 0.0
    assert rows[0].observed == "invasion"
    assert rows[0].agrees


def test_negative_perturbation_goes_extinct(critical, bundle, box):
    u0 = critical.field(0)
    h = Field(GRID, -np.exp(-GRID.nodes ** 2) * u0.values)
    rows = perturbation_fate(critical, NL, bundle, h, [0.05, 0.02], SOLVER, box, THRESHOLD)
    assert all(row.pairing < 0.0 for row in rows)
    assert [row.observed for row in rows] == ["extinction", "extinction"]


def test_inadmissible_perturbation_is_rejected(critical, bundle, box):
    with pytest.raises(BadArguments):
        perturbation_fate(critical, NL, bundle, Field.constant(GRID, 1.0), [0.5], SOLVER, box, THRESHOLD)


def test_random_directions_are_admissible(critical):
    u0 = critical.field(0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        h = random_direction(u0, rng, spread=5.0)
        check_admissible(u0, h, 1.0)


def test_margin_is_bounded_by_hoelder(critical, bundle):
    rng = np.random.default_rng(1)
    h = random_direction(critical.field(0), rng, spread=5.0)
    assert 0.0 <= pairing_margin(bundle, h, "1") <= 1.0 + 1e-12
    assert 0.0 <= pairing_margin(bundle, h, "inf") <= 1.0 + 1e-12


@pytest.mark.parametrize("q", ["1", "inf"])
def test_sign_of_pairing_predicts_fate(critical, bundle, box, q):
    report = fate_prediction_harness(critical, NL, bundle, SOLVER, box, THRESHOLD, n_directions=3,
                                     eps_list=(0.05, 0.02), q=q, seed=7)
    assert len(report.outcomes) == 3
    assert report.agreement == 3
    assert all(o.margin >= 0.1 for o in report.outcomes)


def test_unknown_exponent_is_rejected(critical, bundle, box):
    with pytest.raises(BadArguments):
        fate_prediction_harness(critical, NL, bundle, SOLVER, box, THRESHOLD, q="2")
