import numpy as np
import pytest
import scipy.sparse as sp

from hardylab.assembly import QuadraticForms, assemble_forms
from hardylab.eigensolve import (extrapolate, local_hardy_remainder, solve_mu,
                                 spectral_lower_bound, sweep)
from hardylab.errors import ValidationError
from hardylab.geometry import Boundary, GeometryConfig, build_grid
from hardylab.weights import (EtaKind, WeightFamily, WeightSpec,
                              make_sin_family, validate_and_normalize)


def _toy_forms(A, Mq, Me):
    eye = sp.csr_matrix(np.eye(len(A)))
    return QuadraticForms(
        A_b=sp.csr_matrix(np.asarray(A, dtype=float)),
        M_q=sp.csr_matrix(np.asarray(Mq, dtype=float)),
        M_eta=sp.csr_matrix(np.asarray(Me, dtype=float)),
        M_0=eye, M_log=eye, dof_count=len(A), config_hash="toy",
        cfg=None, spec=None, boundary_active=np.array([], dtype=np.int64),
        node_r=np.zeros(len(A)), node_z=np.zeros((len(A), 1)),
        max_eta_over_q=1.0, min_eta_over_q=0.0, max_q_logsq=1.0)


def test_single_cell_sanity():
    forms = _toy_forms([[2.0]], [[1.0]], [[1.0]])
    res = solve_mu(forms, 1.0, tol=1e-10)
    assert res.mu == pytest.approx(1.0, abs=1e-12)
    assert res.converged


def test_two_by_two_pencil():
    forms = _toy_forms([[2.0, -1.0], [-1.0, 2.0]],
                       [[1.0, 0.0], [0.0, 1.0]],
                       [[0.0, 0.0], [0.0, 0.0]])
    res = solve_mu(forms, 5.0, tol=1e-10)
    assert res.mu == pytest.approx(1.0, abs=1e-12)   # eigenvalues 1 and 3


def test_tol_range():
    forms = _toy_forms([[2.0]], [[1.0]], [[1.0]])
    with pytest.raises(ValidationError):
        solve_mu(forms, 0.0, tol=1.0)


@pytest.fixture(scope="module")
def sin_forms():
    cfg = GeometryConfig(N=5, k=1, R=0.25, grading_gamma=2.0, n_r=24, n_z=8)
    g = build_grid(cfg)
    spec = validate_and_normalize(
        make_sin_family(0.5, 1.5, 0.0, eta_kind=EtaKind.RHO_SQUARED), g)
    return assemble_forms(g, spec)


def test_residual_and_normalization(sin_forms):
    res = solve_mu(sin_forms, -2.0, tol=1e-10)
    assert res.converged
    assert res.residual <= 1e-10 * max(1.0, abs(res.mu))
    assert res.vector @ (sin_forms.M_q @ res.vector) == pytest.approx(
        1.0, abs=1e-10)


def test_ground_vector_positive(sin_forms):
    res = solve_mu(sin_forms, -2.0, tol=1e-10)
    assert res.vector.min() >= -1e-8 * res.vector.max()


def test_matches_dense(sin_forms):
    import scipy.linalg
    lam = -3.0
    res = solve_mu(sin_forms, lam, tol=1e-11)
    K = (sin_forms.A_b - lam * sin_forms.M_eta).toarray()
    M = sin_forms.M_q.toarray()
    w = scipy.linalg.eigh(K, M, eigvals_only=True, subset_by_index=[0, 0])[0]
    assert res.mu == pytest.approx(w, rel=1e-11, abs=1e-12)


def test_lower_bound_certified(sin_forms):
    for lam in (-10.0, 0.0, 3.0, 50.0):
        lb = spectral_lower_bound(sin_forms, lam)
        res = solve_mu(sin_forms, lam, tol=1e-9)
        assert res.mu >= lb - 1e-9 * max(1.0, abs(lb))


def test_sweep_monotone_concave_warm(sin_forms):
    lambdas = np.linspace(-4.0, 4.0, 9)
    results = sweep(sin_forms, lambdas, tol=1e-11)
    mus = [r.mu for r in results]
    for a, b in zip(mus, mus[1:]):
        assert b <= a + 1e-10
    for i in range(1, len(mus) - 1):
        assert mus[i - 1] + mus[i + 1] <= 2 * mus[i] + 1e-9 * max(
            1.0, abs(mus[i]))
    # warm-started results match cold solves
    cold = solve_mu(sin_forms, lambdas[4], tol=1e-11)
    assert results[4].mu == pytest.approx(cold.mu, abs=1e-10)


def test_sweep_requires_ascending(sin_forms):
    with pytest.raises(ValidationError):
        sweep(sin_forms, [0.0, -1.0])


def test_eta_zero_constant_in_lambda():
    cfg = GeometryConfig(N=5, k=1, R=0.25, n_r=16, n_z=8)
    g = build_grid(cfg)
    spec = validate_and_normalize(
        WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                   eta_kind=EtaKind.RHO_PROFILE, eta_profile="0"), g)
    f = assemble_forms(g, spec)
    r1 = solve_mu(f, -5.0, tol=1e-10)
    r2 = solve_mu(f, 5.0, tol=1e-10)
    assert r1.mu == pytest.approx(r2.mu, abs=1e-11)


def test_plateau_constant_very_negative_lambda():
    # extrapolated mu at very negative lambda within 2% of the constant
    const = WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                       eta_kind=EtaKind.RHO_SQUARED)
    mus = []
    for n_r in (64, 128, 256):
        cfg = GeometryConfig(N=5, k=1, R=0.25, grading_gamma=4.0, n_r=n_r,
                             n_z=4)
        g = build_grid(cfg)
        spec = validate_and_normalize(const, g)
        mus.append(solve_mu(assemble_forms(g, spec), -200.0, tol=1e-9).mu)
    lim, order = extrapolate(mus)
    assert lim == pytest.approx(1.0, abs=0.02)


def test_local_hardy_requires_small_tube(sin_forms):
    with pytest.raises(ValidationError):
        local_hardy_remainder(sin_forms)    # R = 0.25 > 0.2


def test_local_hardy_positive_and_r_monotone(spec_const):
    vals = {}
    for R in (0.1, 0.05):
        cfg = GeometryConfig(N=5, k=1, R=R, grading_gamma=2.0, n_r=48, n_z=4)
        g = build_grid(cfg)
        spec = validate_and_normalize(
            WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0), g)
        vals[R] = local_hardy_remainder(assemble_forms(g, spec))
        assert vals[R] > 0.0
    # smaller tube admits fewer competitors (zero-extension embeds them)
    assert vals[0.05] >= vals[0.1] - 1e-9


def test_extrapolate_helper():
    # exact geometric error sequence recovers the limit and the order
    seq = [1.0 + 0.4, 1.0 + 0.2, 1.0 + 0.1]
    lim, order = extrapolate(seq)
    assert lim == pytest.approx(1.0, abs=1e-12)
    assert order == pytest.approx(1.0, abs=1e-12)
    # inconsistent differences: fall back to the last value
    lim2, order2 = extrapolate([1.0, 3.0, 2.0])
    assert lim2 == 2.0 and order2 is None
    lim3, _ = extrapolate([2.0, 2.0, 2.0])
    assert lim3 == 2.0
