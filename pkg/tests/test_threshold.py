import numpy as np
import pytest

from hardylab.assembly import assemble_forms
from hardylab.eigensolve import solve_mu
from hardylab.errors import NoBracket, ValidationError
from hardylab.geometry import GeometryConfig, build_grid
from hardylab.threshold import (Verdict, attainment_diagnostic,
                                extrapolated_mu_levels, find_lambda_star)
from hardylab.weights import (EtaKind, WeightFamily, WeightSpec,
                              validate_and_normalize)


@pytest.fixture(scope="module")
def flat_tube():
    # b = q == 1, eta = rho^2 on the free tube: the compact-model setup
    cfg = GeometryConfig(N=5, k=1, R=0.5, grading_gamma=2.0, n_r=16, n_z=4)
    g = build_grid(cfg)
    spec = validate_and_normalize(
        WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                   eta_kind=EtaKind.RHO_SQUARED), g)
    return cfg, spec


def test_requires_positive_constant(flat_tube):
    _, spec = flat_tube
    cfg2 = GeometryConfig(N=4, k=2, R=0.25, n_r=8, n_z=4)   # N-k = 2
    with pytest.raises(ValidationError):
        find_lambda_star(cfg2, spec)


def test_threshold_bracket(flat_tube):
    cfg, spec = flat_tube
    res = find_lambda_star(cfg, spec, tol_lambda=0.1)
    lo, hi = res.bracket
    assert hi - lo <= 0.1
    assert lo < res.lambda_star < hi
    # the pencil analysis for this geometry puts the true threshold near
    # -10.35; the gap-detected bracket sits somewhat above it
    assert -12.0 < res.lambda_star < -6.0
    assert res.gap_tolerance > 0.0
    # predicate values at the ends, from the recorded extrapolations
    table = dict(res.extrapolated_mu)
    C = res.hardy_constant
    assert table[lo] >= C - res.gap_tolerance
    assert table[hi] < C - res.gap_tolerance


def test_monotone_consistency(flat_tube):
    cfg, spec = flat_tube
    res = find_lambda_star(cfg, spec, tol_lambda=0.2)
    tab = sorted(res.extrapolated_mu)
    for (l1, m1), (l2, m2) in zip(tab, tab[1:]):
        assert m2 <= m1 + 1e-6


def test_dichotomy_shape(flat_tube):
    # below the bracket the extrapolated values hug the constant within the
    # gap; above it they decrease strictly
    cfg, spec = flat_tube
    res = find_lambda_star(cfg, spec, tol_lambda=0.1)
    lo, hi = res.bracket
    C, gap = res.hardy_constant, res.gap_tolerance
    below = [(l, m) for l, m in res.extrapolated_mu if l <= lo]
    above = sorted((l, m) for l, m in res.extrapolated_mu if l >= hi)
    assert below and above
    assert all(abs(m - C) <= gap + 1e-9 for _, m in below)
    for (_, m1), (_, m2) in zip(above, above[1:]):
        assert m2 < m1


def test_eta_scaling_identity(flat_tube):
    # mu(lambda, 2 eta) = mu(2 lambda, eta) exactly on a fixed grid
    cfg, spec = flat_tube
    g = build_grid(cfg)
    spec2 = validate_and_normalize(
        WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                   eta_kind=EtaKind.RHO_PROFILE, eta_profile="2*r"), g)
    f1 = assemble_forms(g, spec)
    f2 = assemble_forms(g, spec2)
    for lam in (-3.0, -7.0):
        m2 = solve_mu(f2, lam, tol=1e-10).mu
        m1 = solve_mu(f1, 2.0 * lam, tol=1e-10).mu
        assert m2 == pytest.approx(m1, rel=1e-9)


def test_lambda_star_scaling(flat_tube):
    cfg, spec = flat_tube
    g = build_grid(cfg)
    spec2 = validate_and_normalize(
        WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                   eta_kind=EtaKind.RHO_PROFILE, eta_profile="2*r"), g)
    gap = 0.12
    r1 = find_lambda_star(cfg, spec, tol_lambda=0.05, gap_tolerance=gap)
    r2 = find_lambda_star(cfg, spec2, tol_lambda=0.05, gap_tolerance=gap)
    assert r2.lambda_star == pytest.approx(r1.lambda_star / 2.0, abs=0.06)


def test_no_bracket_for_degenerate_eta():
    cfg = GeometryConfig(N=5, k=1, R=0.25, n_r=8, n_z=4)
    g = build_grid(cfg)
    spec = validate_and_normalize(
        WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                   eta_kind=EtaKind.RHO_PROFILE, eta_profile="0"), g)
    with pytest.raises(NoBracket):
        find_lambda_star(cfg, spec, multipliers=(1, 2, 4))


def test_extrapolated_mu_levels(flat_tube):
    cfg, spec = flat_tube
    mu = extrapolated_mu_levels(cfg, spec, -2.0, multipliers=(1, 2, 4))
    assert 0.0 < mu < cfg.hardy_constant()


def test_diagnostic_verdicts(flat_tube):
    _, spec = flat_tube
    dcfg = GeometryConfig(N=5, k=1, R=0.5, grading_gamma=1.0, n_r=12, n_z=4)
    sup = attainment_diagnostic(dcfg, spec, -6.0)      # well above threshold
    assert sup.verdict is Verdict.BOUNDED_MINIMIZER
    sub = attainment_diagnostic(dcfg, spec, -14.0)     # below threshold
    assert sub.verdict is not Verdict.BOUNDED_MINIMIZER
    assert len(sub.rho_inv_norm_series) == 3


def test_diagnostic_eta_zero_independent_of_lambda():
    cfg = GeometryConfig(N=5, k=1, R=0.25, grading_gamma=1.0, n_r=8, n_z=4)
    g = build_grid(cfg)
    spec = validate_and_normalize(
        WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                   eta_kind=EtaKind.RHO_PROFILE, eta_profile="0"), g)
    d1 = attainment_diagnostic(cfg, spec, -5.0)
    d2 = attainment_diagnostic(cfg, spec, 5.0)
    assert d1.verdict is d2.verdict
    assert d1.rho_inv_norm_series == pytest.approx(d2.rho_inv_norm_series,
                                                   rel=1e-8)


def test_diagnostic_needs_three_levels(flat_tube):
    cfg, spec = flat_tube
    with pytest.raises(ValidationError):
        attainment_diagnostic(cfg, spec, -1.0, multipliers=(1, 2))
