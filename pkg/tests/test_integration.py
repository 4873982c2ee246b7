"""Cross-module smoke tests for configurations off the main k = 1 path."""

import numpy as np
import pytest

from hardylab.assembly import assemble_forms
from hardylab.criterion import (CriterionVerdict, classify_criterion,
                                estimate_exponents, find_maximizers)
from hardylab.eigensolve import solve_mu
from hardylab.geometry import GeometryConfig, Model, build_grid
from hardylab.weights import make_sin_family, validate_and_normalize


def test_k2_reduced_pipeline():
    cfg = GeometryConfig(N=6, k=2, R=0.25, grading_gamma=2.0, n_r=10, n_z=6)
    g = build_grid(cfg)
    spec = validate_and_normalize(
        make_sin_family(0.5, 1.5, (0.3, 0.6), k=2), g)
    forms = assemble_forms(g, spec)
    res = solve_mu(forms, -1.0, tol=1e-8)
    assert res.converged and np.isfinite(res.mu)

    maxima, continuum = find_maximizers(spec)
    assert not continuum
    assert maxima[0] == pytest.approx((0.3, 0.6), abs=1e-4)
    est = estimate_exponents(spec, maxima)
    # exponents along all four coordinate rays
    assert len(est[0].per_ray) == 4
    assert est[0].beta == pytest.approx(1.5, abs=0.01)

    # beta = 1.5 < k = 2: the criterion integral converges in 2 tangential
    # dimensions even though it diverges for k = 1
    rep = classify_criterion(spec)
    assert rep.verdict is CriterionVerdict.CONVERGENT


def test_codimension_two_degenerate_constant():
    # N - k = 2: the sharp constant is zero; forms still assemble and the
    # quotient minimum at lambda = 0 is zero through constants
    cfg = GeometryConfig(N=4, k=2, R=0.25, n_r=8, n_z=6)
    assert cfg.hardy_constant() == 0.0
    g = build_grid(cfg)
    spec = validate_and_normalize(
        make_sin_family(0.5, 1.5, (0.3, 0.6), k=2), g)
    forms = assemble_forms(g, spec)
    res = solve_mu(forms, 0.0, tol=1e-8)
    assert abs(res.mu) <= 1e-9


def test_full_torus_small_n3():
    # N=3, k=1: two normal axes; rho is the folded planar distance
    cfg = GeometryConfig(N=3, k=1, model=Model.FULL_TORUS, R=0.3,
                         n_r=10, n_z=10)
    g = build_grid(cfg)
    spec = validate_and_normalize(make_sin_family(0.5, 1.5, 0.0), g)
    forms = assemble_forms(g, spec)
    res = solve_mu(forms, 0.0, tol=1e-8)
    assert abs(res.mu) <= 1e-9
    assert g.total_measure() == pytest.approx(1.0, rel=1e-12)
