import math

import numpy as np
import pytest
from scipy.integrate import quad

from cflab.transfer import (
    INDICATOR_A, LEMMA_THRESHOLD, LOG43, MU_A, MU_E1, DensityProfile, Indicator, OperatorConfig,
    apply_transfer, apply_wirsing_U, b_profile, correlation_via_operator, density_pipeline,
    derivative_decay, f1_values, lemma_bound, refinement_study, verify_lemma_bound,
    wirsing_contraction_check,
)

SMALL = OperatorConfig(K=2000, N=256)


def brute_transfer(f, x, K=10**6):
    """Direct sum of 10^6 terms plus the telescoped tail f(0) (1+x)/(K+1+x).

    Without the tail term the truncation error is about f(0)/K, i.e. 1.7e-6
    for f_1; with it the remainder is below sup|f'|/K^2.
    """
    k = np.arange(K, 0, -1, dtype=np.float64)
    a = k + x
    head = float(np.sum((1 + x) / (a * (a + 1)) * f(1 / a)))
    return head + float(f(np.array([0.0]))[0]) * (1 + x) / (K + 1 + x)


def mu_integral(vals, x):
    # Simpson on the full grid against dx/(1+x)
    y = vals / (1 + x)
    h = x[1] - x[0]
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def test_config_validation():
    with pytest.raises(ValueError):
        OperatorConfig(K=8)
    with pytest.raises(ValueError):
        OperatorConfig(N=32)
    with pytest.raises(ValueError):
        OperatorConfig(N=258)
    with pytest.raises(ValueError):
        OperatorConfig(quadrature="gauss")


def test_profile_validation():
    with pytest.raises(ValueError):
        DensityProfile(np.ones(10))
    with pytest.raises(ValueError):
        DensityProfile(np.full(65, np.nan))


def test_constant_is_fixed():
    cfg = OperatorConfig()
    one = apply_transfer(lambda y: np.ones_like(y), cfg)
    assert np.max(np.abs(one.values - 1)) <= 1e-10 + np.max(one.meta["tail_bound"])
    prof = apply_transfer(DensityProfile(np.ones(cfg.N + 1)), cfg)
    assert np.max(np.abs(prof.values - 1)) <= 1e-10 + prof.error


def test_indicator_of_A():
    cfg = OperatorConfig()
    g = apply_transfer(INDICATOR_A, cfg)
    assert np.max(np.abs(g.values - 1 / (2 + cfg.nodes))) <= 1e-8 + np.max(g.meta["tail_bound"])


def test_indicator_one_sided_limits():
    ind = Indicator(0.5, 1.0)
    assert ind(np.array([0.5, 1.0])).tolist() == [1.0, 0.0]
    assert ind.limit(np.array([0.5, 1.0]), -1).tolist() == [0.0, 1.0]
    assert ind.limit(np.array([0.5, 1.0]), +1).tolist() == [1.0, 0.0]


def test_integral_preserved_for_identity_function():
    cfg = OperatorConfig()
    x = cfg.nodes
    g = apply_transfer(DensityProfile(x.copy()), cfg)
    lhs = mu_integral(g.values, x) / math.log(2)
    rhs = (1 - math.log(2)) / math.log(2)
    assert abs(lhs - rhs) < 1e-8


@pytest.mark.parametrize("f", [lambda x: np.exp(-3 * x), lambda x: 1 / (1 + x) ** 3, lambda x: np.cos(5 * x)])
def test_mass_conservation(f):
    x = SMALL.nodes
    prof = DensityProfile(f(x))
    g = apply_transfer(prof, SMALL)
    assert abs(mu_integral(g.values, x) - mu_integral(prof.values, x)) < 1e-6


def test_f1_and_pipeline_normalisation():
    cfg = OperatorConfig()
    assert abs(density_pipeline(1, cfg).values[0] - 1 / (2 * LOG43)) < 1e-15
    import mpmath
    assert abs(1 / (2 * LOG43) - float(1 / (2 * mpmath.log(mpmath.mpf(4) / 3)))) < 1e-15
    for n in range(1, 9):
        fn = density_pipeline(n, cfg)
        assert abs(mu_integral(fn.values, cfg.nodes) - 1) < 1e-6


def test_f2_against_brute_force_summation():
    cfg = OperatorConfig()
    f2 = density_pipeline(2, cfg)
    for j in (0, 300, 1024, 1500, 2048):
        x = cfg.nodes[j]
        ref = brute_transfer(lambda y: f1_values(y), x)
        assert abs(f2.values[j] - ref) < 1e-8


def test_reported_error_covers_brute_force_difference():
    cfg = OperatorConfig(K=500, N=128)
    f2 = density_pipeline(2, cfg)
    x = cfg.nodes[[0, 40, 128]]
    for j, xv in zip((0, 40, 128), x):
        assert abs(f2.values[j] - brute_transfer(f1_values, xv)) <= f2.error


def test_correlation_known_values():
    cfg = OperatorConfig()
    e1 = correlation_via_operator(1, cfg)
    assert abs(e1.value - MU_E1) < 1e-8
    e20 = correlation_via_operator(20, cfg)
    assert abs(e20.value - MU_A ** 2) < 1e-3
    assert abs(MU_A ** 2 - 0.1722561) < 1e-7


@pytest.mark.parametrize("n", range(1, 9))
def test_correlation_inside_band(n):
    est = correlation_via_operator(n)
    half = MU_A * lemma_bound(n)
    assert MU_A * MU_A - half - est.error < est.value < MU_A * MU_A + half + est.error


def test_lemma_constants():
    assert abs(lemma_bound(2) - 0.025341) < 1e-6
    assert abs(LEMMA_THRESHOLD - 0.048798) < 1e-6
    rep = verify_lemma_bound(1, cross_check=False)
    assert abs(rep.r_n_half - LEMMA_THRESHOLD) < 1e-8
    assert abs(rep.bound - 0.050683) < 1e-6 and rep.passed


def test_lemma_cross_checked_against_oracle():
    for n in (2, 3):
        rep = verify_lemma_bound(n)
        assert rep.passed and rep.oracle_agrees


def test_wirsing_known_answers():
    cfg = OperatorConfig()
    con = wirsing_contraction_check(cfg)
    assert con.max_ub_error < 1e-6
    assert con.ua_le_half_a
    zero = apply_wirsing_U(DensityProfile(np.zeros(cfg.N + 1)), cfg)
    assert np.all(zero.values == 0)


def test_wirsing_matches_derivative_identity():
    # U(f') = -(P f)' for smooth f
    cfg = SMALL
    x = cfg.nodes
    f = DensityProfile(np.exp(-x) / (1 + x))
    lhs = apply_wirsing_U(f.derivative(), cfg).values
    rhs = -apply_transfer(f, cfg).derivative().values
    assert np.max(np.abs(lhs - rhs)) < 1e-6


def test_wirsing_positivity(rng):
    x = SMALL.nodes
    g = DensityProfile(np.sin(4 * x))
    h = DensityProfile(g.values + 0.1 + 0.05 * np.cos(7 * x))
    ug, uh = apply_wirsing_U(g, SMALL), apply_wirsing_U(h, SMALL)
    assert np.all(ug.values <= uh.values + ug.error + uh.error)


def test_geometric_decay_of_derivatives():
    d = derivative_decay(10)
    assert np.all(d <= d[0] * 0.5 ** np.arange(10) * (1 + 1e-9))
    # the ratio settles near the second eigenvalue magnitude
    assert abs(d[-1] / d[-2] - 0.3036630) < 1e-3


def test_refinement_study():
    vals, digits = refinement_study(4)
    assert digits >= 2
    assert len(vals) == 3


def test_ub_profile_shape():
    assert b_profile(64).N == 64
