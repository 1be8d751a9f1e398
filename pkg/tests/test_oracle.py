from fractions import Fraction

import mpmath
import pytest

from cflab.core import DomainError, MU_A, cylinder_measure
from cflab.oracle import (
    LOG43_HI, LOG43_LO, MeasureInterval, ResourceError, check_guard, compare_en_e1, default_cutoffs, en_exact,
    en_partial_sum, en_refined, golden_en, oracle_estimate, read_golden, write_golden,
)
from cflab.transfer import correlation_via_operator, lemma_bound


def test_log43_bounds():
    with mpmath.workdps(200):
        v = mpmath.log(mpmath.mpf(4) / 3)
        assert LOG43_LO < LOG43_HI
        assert mpmath.mpf(LOG43_LO.numerator) / LOG43_LO.denominator <= v
        assert mpmath.mpf(LOG43_HI.numerator) / LOG43_HI.denominator >= v


def test_n1_is_exact():
    iv = en_exact(1, 5)
    assert iv.lower.ratio == iv.upper.ratio == Fraction(10, 9)


def test_n2_d1_partial_sum():
    assert en_partial_sum(2, 1).ratio == cylinder_measure((1, 1, 1)).ratio
    iv = en_exact(2, 1)
    assert iv.lower >= en_partial_sum(2, 1)


def test_partial_sum_matches_enumeration():
    # lower end = enumerated cylinders + a nonnegative remainder bound
    for n, D in ((2, 30), (3, 6)):
        part = en_partial_sum(n, D)
        iv = en_exact(n, D)
        assert part <= iv.lower <= iv.upper


def brute_en(n, D):
    """Independent mpmath sum over the same cylinders (no rationals)."""
    import itertools
    tot = mpmath.mpf(0)
    for tail in itertools.product(range(1, D + 1), repeat=n - 1):
        tot += cylinder_measure((1,) + tail + (1,)).mpf(30)
    return tot


def test_partial_sum_against_float_oracle():
    with mpmath.workdps(30):
        assert abs(en_partial_sum(3, 5).mpf(30) - brute_en(3, 5)) < mpmath.mpf(10) ** -25


@pytest.mark.parametrize("n, Ds", [(2, (4, 16, 64, 256)), (3, (4, 8, 16, 32)), (4, (3, 6, 12))])
def test_nested_intervals(n, Ds):
    ivs = [en_exact(n, D) for D in Ds]
    for coarse, fine in zip(ivs, ivs[1:]):
        assert coarse.contains(fine)
        assert fine.width < coarse.width


def test_guard():
    with pytest.raises(ResourceError) as err:
        en_exact(5, 2**11)
    assert "(n-1)*log2(D)" in str(err.value)
    en_exact(2, 2)                      # well inside
    with pytest.raises(DomainError):
        en_exact(2, 0)
    with pytest.raises(DomainError):
        en_exact(0, 3)


def test_thread_count_does_not_change_result():
    a = en_exact(3, 12, threads=1)
    b = en_exact(3, 12, threads=3)
    assert a.lower.ratio == b.lower.ratio and a.upper.ratio == b.upper.ratio


def test_golden_file():
    g = read_golden()
    assert g[1].lower.ratio == Fraction(10, 9)
    iv = g[2]
    assert iv.D == 10**5 and iv.width < 1e-8
    # recomputing at the recorded cutoff reproduces the stored ratios exactly
    fresh = en_exact(2, iv.D)
    assert fresh.lower.ratio == iv.lower.ratio and fresh.upper.ratio == iv.upper.ratio


def test_golden_round_trip(tmp_path):
    ivs = [en_exact(2, 40), en_exact(3, 5)]
    back = read_golden(write_golden(tmp_path / "g.json", ivs))
    assert back[3].upper.ratio == ivs[1].upper.ratio


def test_refined_agrees_with_certificates():
    for n, D in ((2, 2000), (3, 200), (4, 30)):
        ref = en_refined(n)
        cert = en_exact(n, D)
        assert cert.contains(ref), n
    assert golden_en(2).contains_value(en_refined(2).midpoint)


def test_refined_n1_closed_form():
    assert abs(en_refined(1).midpoint - float(cylinder_measure((1, 1)))) < 1e-13


@pytest.mark.parametrize("n", range(2, 7))
def test_cross_validation_with_operator(n):
    iv = oracle_estimate(n)
    est = correlation_via_operator(n)
    assert iv.width < 1e-8
    assert iv.contains_value(est.value, est.error)


@pytest.mark.parametrize("n", range(2, 7))
def test_interval_inside_band(n):
    iv = oracle_estimate(n)
    mu = float(MU_A)
    half = mu * lemma_bound(n)
    assert mu * mu - half <= iv.lo <= iv.hi <= mu * mu + half


@pytest.mark.parametrize("n", [2, 3, 4])
def test_direction_is_greater(n):
    cmp = compare_en_e1(n)
    assert cmp.decided and cmp.ordering == "greater"
    assert cmp.interval.lower > cylinder_measure((1, 1))
    assert not cmp.agrees_with_printed_inequality


def test_compare_degenerate_and_undecided():
    assert compare_en_e1(1).ordering == "equal"
    # with a single tiny cutoff the interval straddles mu(E_1)
    cmp = compare_en_e1(4, cutoffs=[1])
    assert cmp.ordering == "undecided" and not cmp.decided


def test_default_cutoffs_respect_guard():
    for n in range(2, 8):
        cutoffs = default_cutoffs(n)
        assert cutoffs == sorted(cutoffs)
        for D in cutoffs:
            check_guard(n, D)


def test_interval_rejects_inverted_ends():
    with pytest.raises(ValueError):
        MeasureInterval(2, cylinder_measure((1,)), cylinder_measure((1, 1)), "x")
