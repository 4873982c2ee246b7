import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab.errors import (BadParams, EtaNotLipschitz, NonPositiveWeight,
                             NotNormalized, ValidationError)
from hardylab.geometry import FermiPoint
from hardylab.weights import (EtaKind, WeightFamily, WeightSpec, eval_weights,
                              find_sigma_max, make_sin_family,
                              validate_and_normalize)


def test_sin_power_pointwise():
    # A = 1 is rejected by the constructor, but the formula itself is easy
    # to pin down with it: q = 1 - sin^2(pi/4) = 1/2
    spec = WeightSpec(family=WeightFamily.SIN_POWER, amplitude=1.0,
                      contact_beta=1.0, z0=(0.0,), normalized=True)
    b, q, eta = eval_weights(spec, FermiPoint(0.1, (0.25,)))
    assert q == pytest.approx(0.5)
    assert b == 1.0


def test_eta_vanishes_on_sigma(spec_sin):
    for r in (1e-3, 1e-8, 1e-14):
        _, _, eta = eval_weights(spec_sin, FermiPoint(r, (0.3,)))
        assert 0.0 <= eta <= r * r + 1e-30


def test_constant_family_values(spec_const):
    b, q, eta = eval_weights(spec_const, FermiPoint(0.2, (0.1,)))
    assert (b, q) == (1.0, 1.0)
    assert eta == pytest.approx(0.04)


def test_eval_requires_normalization():
    raw = make_sin_family(0.5, 1.5, 0.0)
    with pytest.raises(NotNormalized):
        eval_weights(raw, FermiPoint(0.1, (0.2,)))


def test_normalization_scale(grid_small):
    # q raw = 2 (1 - 0.5 sin^2(pi z)): max on Sigma is 2 -> scale 1/2
    raw = WeightSpec(family=WeightFamily.CUSTOM, k=1,
                     custom_q="2*(1 - 0.5*sin(pi*z)**2)")
    spec = validate_and_normalize(raw, grid_small)
    assert spec.q_scale == pytest.approx(0.5, rel=1e-9)
    zmax = spec.sigma_maximizers[0][0]
    assert min(zmax, 1 - zmax) < 1e-5           # maximizer at z = 0
    assert spec.q_at(0.0, np.array([[0.0]])).item() == pytest.approx(1.0)


def test_normalization_continuum(grid_small, spec_const):
    assert spec_const.continuum_maximizers
    assert spec_const.q_scale == pytest.approx(1.0)
    assert any("Continuum" in w for w in spec_const.warnings)


def test_eta_not_lipschitz(grid_small):
    raw = WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                     eta_kind=EtaKind.RHO_PROFILE, eta_profile="1/sqrt(r)")
    with pytest.raises(EtaNotLipschitz):
        validate_and_normalize(raw, grid_small)


def test_eta_negative(grid_small):
    from hardylab.errors import EtaNegative
    raw = WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                     eta_kind=EtaKind.RHO_PROFILE, eta_profile="-1")
    with pytest.raises(EtaNegative):
        validate_and_normalize(raw, grid_small)


def test_eta_profile_vanishing_off_sigma_warns(grid_small):
    # h vanishing somewhere off Sigma is flagged, not rejected: the
    # existence machinery needs only eta >= 0 and eta <= C rho
    raw = WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                     eta_kind=EtaKind.RHO_PROFILE,
                     eta_profile="sin(pi*z)**2")
    spec = validate_and_normalize(raw, grid_small)
    assert spec.normalized


def test_nonpositive_weight(grid_small):
    raw = WeightSpec(family=WeightFamily.CUSTOM, k=1,
                     custom_q="sin(pi*z)**2")   # vanishes at z = 0
    with pytest.raises(NonPositiveWeight):
        validate_and_normalize(raw, grid_small)


@given(st.floats(min_value=0.05, max_value=0.95),
       st.floats(min_value=0.3, max_value=2.5))
@settings(max_examples=10, deadline=None)
def test_normalization_idempotent(grid_small, A, beta):
    spec1 = validate_and_normalize(make_sin_family(A, beta, 0.25), grid_small)
    spec2 = validate_and_normalize(spec1, grid_small)
    assert spec1.q_scale == pytest.approx(spec2.q_scale, rel=1e-12)
    for m1, m2 in zip(spec1.sigma_maximizers, spec2.sigma_maximizers):
        assert m1 == pytest.approx(m2, abs=1e-5)


@given(st.floats(min_value=0.1, max_value=50.0))
@settings(max_examples=10, deadline=None)
def test_scaling_covariance(grid_small, c):
    # multiplying raw q by c > 0 yields the same normalized weights
    raw1 = WeightSpec(family=WeightFamily.CUSTOM, k=1,
                      custom_q="1 - 0.5*abs(sin(pi*(z-0.25)))**3")
    raw2 = WeightSpec(family=WeightFamily.CUSTOM, k=1,
                      custom_q=f"{c!r}*(1 - 0.5*abs(sin(pi*(z-0.25)))**3)")
    g = validate_and_normalize(raw1, grid_small)
    h = validate_and_normalize(raw2, grid_small)
    z = np.linspace(0, 1, 41)[:, None]
    assert g.q_at(np.zeros(41), z) == pytest.approx(h.q_at(np.zeros(41), z),
                                                    rel=1e-9)


def test_sin_family_extremes(grid_small):
    spec = validate_and_normalize(make_sin_family(0.7, 1.2, 0.3), grid_small)
    z = np.linspace(0, 1, 20001)[:, None]
    q = spec.q_at(np.zeros(len(z)), z)
    assert q.min() == pytest.approx(1 - 0.7, abs=1e-6)
    assert q.max() == pytest.approx(1.0, abs=1e-9)
    assert spec.sigma_maximizers[0][0] == pytest.approx(0.3, abs=1e-4)


def test_make_sin_family_bad_params():
    with pytest.raises(BadParams):
        make_sin_family(1.0, 1.0, 0.0)     # q would vanish
    with pytest.raises(BadParams):
        make_sin_family(1.5, 1.0, 0.0)
    with pytest.raises(BadParams):
        make_sin_family(0.5, 0.0, 0.0)
    with pytest.raises(BadParams):
        make_sin_family(0.5, -1.0, 0.0)


def test_tensor_product_k2():
    spec = make_sin_family(0.5, 1.0, (0.2, 0.7), k=2)
    z = np.array([[0.2, 0.7], [0.7, 0.7], [0.2, 0.2]])
    q = spec.q_raw(np.zeros(3), z)
    assert q[0] == pytest.approx(1.0)
    assert q[1] == pytest.approx(0.5)       # one factor at its min
    assert q[2] == pytest.approx(1 - 0.5 * math.sin(math.pi * 0.5) ** 2)


def test_find_sigma_max_two_bumps(grid_small):
    expr = ("1 - 0.5*((abs(sin(pi*(z-0.2))) + abs(sin(pi*(z-0.7)))"
            " - abs(abs(sin(pi*(z-0.2))) - abs(sin(pi*(z-0.7)))))/2)**3")
    spec = WeightSpec(family=WeightFamily.CUSTOM, k=1, custom_q=expr)
    vmax, maxima, continuum = find_sigma_max(spec)
    assert not continuum
    assert vmax == pytest.approx(1.0, abs=1e-10)
    zs = sorted(m[0] for m in maxima)
    assert zs == pytest.approx([0.2, 0.7], abs=1e-4)


def test_expression_rejects_junk():
    with pytest.raises(ValidationError):
        WeightSpec(family=WeightFamily.CUSTOM, k=1,
                   custom_q="__import__('os')").q_at(0.0, np.array([[0.1]]))
    with pytest.raises(ValidationError):
        WeightSpec(family=WeightFamily.CUSTOM, k=1,
                   custom_q="w + 1").q_at(0.0, np.array([[0.1]]))
