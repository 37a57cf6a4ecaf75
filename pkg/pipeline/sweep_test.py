from functools import partial

from pipeline.sweep import run_sweep


def _power(exponent: int, x: int) -> int:
    return x ** exponent


def test_in_process_sweep_keeps_order():
    assert run_sweep(partial(_power, 2), [3, 1, 2]) == [9, 1, 4]


def test_process_pool_sweep_keeps_order():
    assert run_sweep(partial(_power, 3), range(6), workers=2) == [0, 1, 8, 27, 64, 125]


def test_empty_sweep():
    assert run_sweep(partial(_power, 2), []) == []
