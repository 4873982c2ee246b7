import numpy as np
import pytest

from hardylab.criterion import (CriterionVerdict, VerdictBasis,
                                classify_criterion, estimate_exponents,
                                find_maximizers)
from hardylab.errors import NonIsolatedMaximizers
from hardylab.weights import (WeightFamily, WeightSpec, make_sin_family,
                              validate_and_normalize)

TWO_BUMP = ("1 - 0.5*((abs(sin(pi*(z-0.2))) + abs(sin(pi*(z-0.7)))"
            " - abs(abs(sin(pi*(z-0.2))) - abs(sin(pi*(z-0.7)))))/2)**3")


def _norm(spec, grid_small):
    return validate_and_normalize(spec, grid_small)


def test_find_maximizer_single(grid_small):
    spec = _norm(make_sin_family(0.5, 1.5, 0.3), grid_small)
    maxima, continuum = find_maximizers(spec)
    assert not continuum
    assert len(maxima) == 1
    assert maxima[0][0] == pytest.approx(0.3, abs=1e-4)


def test_find_maximizer_continuum(grid_small, spec_const):
    maxima, continuum = find_maximizers(spec_const)
    assert continuum and maxima == []


def test_find_maximizer_two_bumps(grid_small):
    spec = _norm(WeightSpec(family=WeightFamily.CUSTOM, k=1,
                            custom_q=TWO_BUMP), grid_small)
    maxima, continuum = find_maximizers(spec)
    zs = sorted(m[0] for m in maxima)
    assert zs == pytest.approx([0.2, 0.7], abs=1e-4)


def test_non_isolated(grid_small):
    # two bumps 4e-4 apart: closer than 10x the localization radius
    expr = ("1 - 0.5*((abs(sin(pi*(z-0.2))) + abs(sin(pi*(z-0.2004)))"
            " - abs(abs(sin(pi*(z-0.2))) - abs(sin(pi*(z-0.2004)))))/2)**3")
    spec = _norm(WeightSpec(family=WeightFamily.CUSTOM, k=1, custom_q=expr),
                 grid_small)
    with pytest.raises(NonIsolatedMaximizers):
        find_maximizers(spec)
    rep = classify_criterion(spec)
    assert rep.verdict is CriterionVerdict.INCONCLUSIVE


@pytest.mark.parametrize("beta,expected", [(0.5, 0.5), (1.5, 1.5)])
def test_exponent_estimates(grid_small, beta, expected):
    spec = _norm(make_sin_family(0.5, beta, 0.3), grid_small)
    maxima, _ = find_maximizers(spec)
    est = estimate_exponents(spec, maxima)
    assert est[0].beta == pytest.approx(expected, abs=0.01)
    assert est[0].fit_residual <= 0.1


def test_quartic_contact_divergent(grid_small):
    # 1 - q ~ d^4 at the contact: beta = 2 >= k, divergent input
    spec = _norm(make_sin_family(0.5, 2.0, 0.25), grid_small)
    maxima, _ = find_maximizers(spec)
    est = estimate_exponents(spec, maxima)
    assert est[0].beta >= 1.05
    rep = classify_criterion(spec)
    assert rep.verdict is CriterionVerdict.DIVERGENT


def test_classify_p_test(grid_small):
    conv = classify_criterion(_norm(make_sin_family(0.5, 0.5, 0.0),
                                    grid_small))
    assert conv.verdict is CriterionVerdict.CONVERGENT
    div = classify_criterion(_norm(make_sin_family(0.5, 1.5, 0.0),
                                   grid_small))
    assert div.verdict is CriterionVerdict.DIVERGENT


def test_borderline_log_divergence(grid_small):
    # beta = k: the exponent margin abstains and the growth test catches
    # the logarithmic divergence
    rep = classify_criterion(_norm(make_sin_family(0.5, 1.0, 0.0),
                                   grid_small))
    assert rep.verdict is CriterionVerdict.DIVERGENT
    assert rep.verdict_basis is VerdictBasis.GROWTH


def test_convergent_estimates_cauchy(grid_small):
    rep = classify_criterion(_norm(make_sin_family(0.5, 0.5, 0.0),
                                   grid_small))
    tail = rep.integral_estimates[-2:]
    assert abs(tail[1] - tail[0]) <= 0.05 * abs(tail[1])


def test_soundness_sweep(grid_small, rng):
    agree = 0
    cases = 0
    for A in (0.25, 0.5, 0.9):
        for beta in (0.3, 0.6, 0.9, 1.1, 1.4, 2.0):
            z0 = float(rng.uniform())
            rep = classify_criterion(_norm(make_sin_family(A, beta, z0),
                                           grid_small))
            want = (CriterionVerdict.CONVERGENT if beta < 1
                    else CriterionVerdict.DIVERGENT)
            agree += rep.verdict is want
            cases += 1
    assert agree == cases


def test_b_generality(grid_small):
    # replacing (b, q) by (c b, c q) leaves the report unchanged
    base = _norm(make_sin_family(0.5, 1.5, 0.3), grid_small)
    scaled = _norm(WeightSpec(
        family=WeightFamily.CUSTOM, k=1,
        custom_q="3*(1 - 0.5*abs(sin(pi*(z-0.3)))**3)",
        custom_b="3"), grid_small)
    r1 = classify_criterion(base)
    r2 = classify_criterion(scaled)
    assert r1.verdict is r2.verdict
    assert r1.beta_estimates[0].beta == pytest.approx(
        r2.beta_estimates[0].beta, abs=1e-6)
    # refined maximizer locations differ at the value-flat scale between
    # the two expressions, shifting the near-singular quadrature slightly
    assert r1.integral_estimates[-1] == pytest.approx(
        r2.integral_estimates[-1], rel=1e-4)


def test_report_determinism(grid_small):
    spec = _norm(make_sin_family(0.5, 1.25, 0.4), grid_small)
    r1 = classify_criterion(spec)
    r2 = classify_criterion(spec)
    assert r1 == r2


def test_continuum_abstains(grid_small, spec_const):
    rep = classify_criterion(spec_const)
    assert rep.continuum_maximizers
    assert rep.verdict is CriterionVerdict.INCONCLUSIVE
