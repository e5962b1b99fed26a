import itertools
import math

import pytest

from streamqoe.analytic import DomainError
from streamqoe.bounds import (
    BoundQuery,
    UndefinedRatioError,
    bound_report,
    d_star_lower,
    d_star_upper,
    rate_window,
    tightness_ratio,
)

EPS = [1e-1, 1e-2, 1e-3]
RATES = [1, 1.05, 1.2, 2, 5]
SIZES = [1e2, 1e3, 1e4]
LOG100 = math.log(100)


def test_query_validation():
    for args in [(0, 10, 1), (1, 10, 1), (0.1, 0, 1), (0.1, 10, 0)]:
        with pytest.raises(DomainError):
            BoundQuery(*args)


def test_upper_examples():
    up = d_star_upper(BoundQuery(0.01, 500, 1.2))
    assert up.regime == "achievability-a"
    assert up.value == pytest.approx(12.23346, abs=1e-4)
    up = d_star_upper(BoundQuery(0.01, 10000, 1))
    assert up.regime == "achievability-b"
    assert up.value == pytest.approx(math.sqrt(2e4 * LOG100), rel=1e-12)
    assert up.value == pytest.approx(303.5, abs=0.1)
    assert d_star_upper(BoundQuery(1 - 1e-12, 500, 1.5)).value < 1e-9


def test_upper_uses_min_inside_rate_window():
    q = BoundQuery(0.01, 1000, 1.02)
    assert q.R <= rate_window(q)
    up = d_star_upper(q)
    assert up.regime == "min-of-both"
    a = LOG100 / 0.0394  # rough, just to make sure the minimum is not larger
    assert up.value <= a


def test_upper_clamped_to_T():
    up = d_star_upper(BoundQuery(0.001, 10, 0.1))
    assert up.value == 10 and up.raw > 10
    assert any("clamped" in n for n in up.notes)


def test_lower_examples():
    lo = d_star_lower(BoundQuery(0.01, 500, 1.2))
    assert lo.regime == "converse-a" and lo.valid
    assert lo.value == pytest.approx(4.0702, abs=1e-3)
    lo = d_star_lower(BoundQuery(0.01, 10000, 1.2))
    assert lo.value == pytest.approx(LOG100 / 0.3764379972, rel=1e-9)
    lo = d_star_lower(BoundQuery(0.01, 10000, 1), alpha0=1 / 16)
    assert lo.regime == "converse-b"
    assert lo.value == pytest.approx(0.5 * math.sqrt(2e4 * LOG100), rel=1e-12)
    assert not lo.valid
    assert any("not certified" in n for n in lo.notes)


def test_lower_valid_when_T_large_enough():
    t_min = 16 * 256 * LOG100
    assert d_star_lower(BoundQuery(0.01, math.ceil(t_min), 1)).valid
    assert not d_star_lower(BoundQuery(0.01, math.floor(t_min), 1)).valid


def test_lower_inapplicable_for_large_eps():
    lo = d_star_lower(BoundQuery(0.1, 1e6, 0.9))
    assert lo.regime == "inapplicable" and not lo.valid


def test_lower_clamped_at_zero_for_eps_near_one():
    lo = d_star_lower(BoundQuery(0.9, 10, 1.1))
    assert lo.value == 0 and lo.raw <= 0


def test_alpha0_range():
    with pytest.raises(DomainError):
        d_star_lower(BoundQuery(0.01, 100, 1), alpha0=0.1)


@pytest.mark.parametrize("eps,R,T", list(itertools.product(EPS, RATES, SIZES)))
def test_sandwich(eps, R, T):
    rep = bound_report(BoundQuery(eps, T, R))
    if rep.lower_valid:
        assert rep.lower <= rep.upper + 1e-12


@pytest.mark.parametrize("T", SIZES)
def test_upper_monotone(T):
    for R in RATES:
        vals = [d_star_upper(BoundQuery(e, T, R)).value for e in EPS]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
    for e in EPS:
        vals = [d_star_upper(BoundQuery(e, T, R)).value for R in RATES]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("R", [1.2, 2, 5])
def test_upper_constant_in_T_outside_rate_window(R):
    for e in EPS:
        vals = {d_star_upper(BoundQuery(e, T, R)).value for T in SIZES if R > rate_window(BoundQuery(e, T, R))}
        assert len(vals) == 1


@pytest.mark.parametrize("eps", EPS)
def test_unit_rate_sqrt_scaling(eps):
    target = math.sqrt(2 * math.log(1 / eps))
    for T in [1e3, 1e4, 1e5]:
        assert d_star_upper(BoundQuery(eps, T, 1)).value / math.sqrt(T) == pytest.approx(target, rel=1e-12)


def test_tightness_examples():
    assert tightness_ratio(BoundQuery(0.01, 500, 1.2)) == pytest.approx(2.006, abs=1e-3)
    assert tightness_ratio(BoundQuery(0.01, 10000, 1.2)) < 1e-3
    big = 16 * 256 * LOG100 * 100
    assert tightness_ratio(BoundQuery(0.01, big, 1)) == pytest.approx(1.0, abs=1e-12)


def test_tightness_decreasing_in_T():
    vals = [tightness_ratio(BoundQuery(0.01, T, 1.2)) for T in [1e3, 1e4, 1e5]]
    assert vals[0] > vals[1] >= vals[2] >= 0


def test_tightness_undefined():
    with pytest.raises(UndefinedRatioError):
        tightness_ratio(BoundQuery(0.01, 1000, 1))
    with pytest.raises(UndefinedRatioError):
        tightness_ratio(BoundQuery(0.9, 10, 1.1))


def test_report_integers_follow_rounding_convention():
    rep = bound_report(BoundQuery(0.01, 500, 1.2))
    assert (rep.lower_int, rep.upper_int) == (4, 13)
    d = rep.as_dict()
    assert d["lower_floor"] == 4 and d["upper_ceil"] == 13
    assert d["lower_regime"] == "converse-a"
