"""Exactness of integer-exponent size arithmetic."""
from __future__ import annotations

import math

import pytest

from pesin_coder.lattice import EpsilonConfig, LatticeSize, i_eps_floor, i_eps_floor_log

EPS = 0.01
CFG = EpsilonConfig(EPS)


def test_floor_at_one():
    assert i_eps_floor(1.0, CFG).expo == 0
    assert i_eps_floor(5.0, CFG).expo == 0


def test_floor_just_below_first_step():
    # a value a hair above e^(-eps/3) floors to exponent 1
    v = math.exp(-EPS / 3.0) * 1.0000001
    assert i_eps_floor(v, CFG).expo == 1
    # a hair below e^(-eps/3) floors to exponent 2
    w = math.exp(-EPS / 3.0) * 0.9999999
    assert i_eps_floor(w, CFG).expo == 2


def test_floor_exact_lattice_points():
    # floor is idempotent on lattice values: e^(-eps*n/3) -> exponent n
    for n in (0, 1, 2, 3, 17, 300, 9999):
        size = CFG.size(n)
        assert i_eps_floor_log(size.log_value, CFG).expo == n


def test_floor_log_handles_underflow():
    # value e^-5000 underflows float64 but the log-space floor is exact
    got = i_eps_floor_log(-5000.0, CFG)
    assert got.expo == math.ceil(3 * 5000.0 / EPS)
    assert got.value == 0.0  # underflow is fine; log_value carries the size
    assert got.log_value == -EPS * got.expo / 3.0


def test_floor_rejects_nonpositive():
    with pytest.raises(ValueError):
        i_eps_floor(0.0, CFG)
    with pytest.raises(ValueError):
        i_eps_floor(-1.0, CFG)


def test_delta_is_largest_power_below_eps():
    d = CFG.delta
    n = CFG.delta_double_exponent
    assert d < EPS <= math.exp(-EPS * (n - 1))
    assert CFG.delta_exponent == 3 * n


def test_product_adds_exponents():
    a, b = CFG.size(7), CFG.size(10)
    assert (a * b).expo == 17
    assert math.isclose((a * b).log_value, a.log_value + b.log_value)


def test_min_max_and_ordering():
    small, big = CFG.size(50), CFG.size(3)
    assert small < big and big > small
    assert small.min_with(big).expo == 50
    assert small.max_with(big).expo == 3
    assert small <= CFG.size(50) and small >= CFG.size(50)


def test_e_eps_steps_are_exact():
    s = CFG.size(30)
    assert s.times_e_eps().expo == 27
    assert s.times_e_eps_pow(4).expo == 18
    # clamped at 1 (exponent 0)
    assert CFG.size(2).times_e_eps().expo == 0
    assert s.step(5).expo == 35


def test_ratio_predicates():
    s = CFG.size(30)
    assert s.ratio_within_e_eps(CFG.size(33))
    assert s.ratio_within_e_eps(CFG.size(27))
    assert not s.ratio_within_e_eps(CFG.size(34))
    assert s.ratio_within_e_eps(CFG.size(36), steps=2)
    assert s.ratio_within_e_eps_third(CFG.size(31))
    assert not s.ratio_within_e_eps_third(CFG.size(32))


def test_mixed_eps_rejected():
    with pytest.raises(ValueError):
        CFG.size(1) * LatticeSize(1, 0.02)


def test_negative_exponent_rejected():
    with pytest.raises(ValueError):
        LatticeSize(-1, EPS)


def test_floor_monotone_near_boundaries():
    # monotonicity: floor exponent is nonincreasing in value, across many
    # lattice boundaries with deliberately perturbed inputs
    prev_expo = None
    for n in range(200, 0, -1):
        for bump in (-1e-12, 0.0, 1e-12):
            v = -EPS * n / 3.0 + bump
            e = i_eps_floor_log(v, CFG).expo
            assert math.exp(-EPS * e / 3.0) <= math.exp(v) * (1 + 1e-15)
            if prev_expo is not None:
                assert e <= prev_expo
            prev_expo = e
