import pytest

from applications.conftest import FLOQUET, GRID, NL, SOLVER, THRESHOLD
from applications.derivative import lstar_derivative
from model.errors import BadArguments


@pytest.fixture(scope="module")
def report(box, steady):
    return lstar_derivative(NL, GRID, 0.5, 0.1, SOLVER, box, THRESHOLD, FLOQUET, tol_L=1e-6, steady=steady)


def test_formula_matches_finite_difference(report):
    assert report.formula_value == pytest.approx(report.p_at_r / report.p_at_Lr - 1.0)
    assert report.rel_gap <= 0.1
    assert report.sign_check is None


def test_sign_check_at_zero_gap(box, steady):
    at_zero = lstar_derivative(NL, GRID, 0.0, 0.1, SOLVER, box, THRESHOLD, FLOQUET, tol_L=1e-5, steady=steady)
    # p > 0, so the check carries the sign of the formula
    assert at_zero.sign_check == (at_zero.formula_value > 0) - (at_zero.formula_value < 0)
    assert at_zero.fd_step == 0.1


def test_negative_gap_is_rejected(box):
    with pytest.raises(BadArguments):
        lstar_derivative(NL, GRID, -0.5, 0.1, SOLVER, box, THRESHOLD, FLOQUET, tol_L=1e-5)
