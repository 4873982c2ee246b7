"""Minimal eigenvalue of the pencil (A_b - lam M_eta, M_q) and relatives.

The left side can be indefinite, so the solver first shifts it positive
definite using a certified lower bound on the spectrum: eta and q share
quadrature points, hence u'M_eta u <= max(eta/q) u'M_q u exactly and

    mu_min >= -max(lam, 0) * max(eta/q).

Shift-and-invert Lanczos (ARPACK through scipy) then finds the smallest
eigenvalue, with at most a few adaptive re-shifts toward the Rayleigh
quotient; small systems go through a dense solve.  Everything is
deterministic: the start vector is the all-ones vector M_q-normalized and
re-shift decisions depend only on computed values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InnerSolveBreakdown, NotConverged, ValidationError
from .assembly import QuadraticForms

DENSE_CUTOFF = 400


@dataclass(frozen=True)
class EigenResult:
    lam: float
    mu: float
    vector: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    converged: bool


def _mnorm(M, x):
    return float(np.sqrt(max(x @ (M @ x), 0.0)))


def _residual_norm(K, M, Msolve, mu, x):
    r = K @ x - mu * (M @ x)
    return float(np.sqrt(max(r @ Msolve(r), 0.0)))


def _finish(K, M, Msolve, lam, mu, x, iters, converged, unscale=None):
    x = x / _mnorm(M, x)
    res = _residual_norm(K, M, Msolve, mu, x)
    if unscale is not None:
        x = unscale * x           # back to nodal values; M_q-norm preserved
    imax = int(np.argmax(np.abs(x)))
    if x[imax] < 0:
        x = -x
    return EigenResult(lam=lam, mu=float(mu), vector=x, residual=res,
                       iterations=iters, converged=converged)


def spectral_lower_bound(forms: QuadraticForms, lam: float) -> float:
    """Certified lower bound on min eig of (A_b - lam M_eta, M_q)."""
    if lam > 0.0:
        return -lam * forms.max_eta_over_q
    return 0.0


def solve_mu(forms: QuadraticForms, lam: float, tol: float = 1e-10,
             v0: np.ndarray | None = None, max_rounds: int = 6) -> EigenResult:
    """Smallest eigenvalue mu_lam of (A_b - lam M_eta) u = mu M_q u.

    Converged means the M_q^(-1)-norm residual is below tol * max(1, |mu|)
    and the eigenvalue moved by less than tol/10 * max(1, |mu|) in the last
    round.  Raises NotConverged (with the best iterate attached) after
    ``max_rounds`` shift refinements.
    """
    if not (1e-13 < tol < 1e-1):
        raise ValidationError(f"tol={tol} outside supported range")
    K = (forms.A_b - lam * forms.M_eta).tocsc()
    M = forms.M_q.tocsc()
    n = forms.dof_count
    return _solve_pencil(K, M, lam, tol, v0, max_rounds,
                         lb=spectral_lower_bound(forms, lam),
                         scale0=max(1.0, forms.cfg.hardy_constant()
                                    if forms.cfg else 1.0))


def _shifted_solver(A):
    """Inner solver for (K - sigma M) x = b on the scaled system.

    Low-connectivity operators (tensor grids in 1+1 dimensions) factorize
    cheaply with sparse LU; high-dimensional stencils would fill in badly,
    so they use conjugate gradients with an algebraic-multigrid
    preconditioner instead.
    """
    if A.nnz / A.shape[0] <= 30:
        try:
            return spla.splu(A).solve
        except RuntimeError as exc:
            raise InnerSolveBreakdown(f"LU of shifted operator: {exc}") from exc
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(A.tocsr(), max_coarse=200)
    prec = ml.aspreconditioner(cycle="V")

    def solve(b):
        x, info = spla.cg(A, b, rtol=1e-12, atol=0.0, M=prec, maxiter=400)
        if info != 0:
            raise InnerSolveBreakdown(f"inner CG failed (info={info})")
        return x

    return solve


def _solve_pencil(K, M, lam, tol, v0, max_rounds, lb, scale0):
    """Solve in diagonally scaled variables.

    With D = diag(M) the congruence (D^-1/2 K D^-1/2, D^-1/2 M D^-1/2) has
    the same eigenvalues, a mass matrix spectrally close to the identity,
    and the same M^-1-norm residual; graded meshes make this rescaling
    essential (the raw diagonal of M_q spans many orders of magnitude).
    """
    n = K.shape[0]
    dM = M.diagonal()
    if np.any(dM <= 0.0):
        raise InnerSolveBreakdown("mass diagonal not positive")
    s = 1.0 / np.sqrt(dM)
    S = sp.diags(s).tocsc()
    Kt = (S @ K @ S).tocsc()
    Mt = (S @ M @ S).tocsc()

    def Msolve(b):
        # the scaled mass matrix is spectrally close to the identity
        x, info = spla.cg(Mt, b, rtol=1e-12, atol=0.0, maxiter=500)
        if info != 0:
            raise InnerSolveBreakdown(f"mass solve failed (info={info})")
        return x

    def finish(mu, xt, iters, converged):
        return _finish(Kt, Mt, Msolve, lam, mu, xt, iters, converged,
                       unscale=s)

    if n <= DENSE_CUTOFF:
        from scipy.linalg import eigh
        w, V = eigh(Kt.toarray(), Mt.toarray(), subset_by_index=[0, 0])
        return finish(w[0], V[:, 0], 1, True)

    if v0 is None:
        xt = np.sqrt(dM)          # the all-ones vector, scaled
    else:
        xt = np.asarray(v0, dtype=float) / s
    xt = xt / _mnorm(Mt, xt)
    mu = float(xt @ (Kt @ xt))
    sigma = lb - 0.01 * max(scale0, 0.02 * abs(lb))
    mu_prev = np.inf
    for rounds in range(1, max_rounds + 1):
        try:
            shifted = (Kt - sigma * Mt).tocsc()
            opinv = spla.LinearOperator(Kt.shape, matvec=_shifted_solver(shifted))
            w, V = spla.eigsh(Kt, k=1, M=Mt, sigma=sigma, which="LM",
                              OPinv=opinv, v0=xt, maxiter=2000,
                              tol=min(tol * 1e-3, 1e-10))
            mu, xt = float(w[0]), V[:, 0]
        except spla.ArpackNoConvergence as exc:
            if len(exc.eigenvalues):
                mu, xt = float(exc.eigenvalues[0]), exc.eigenvectors[:, 0]
            # else keep previous iterate
        except RuntimeError as exc:
            raise InnerSolveBreakdown(f"shifted factorization failed: {exc}") from exc
        xt = xt / _mnorm(Mt, xt)
        res = _residual_norm(Kt, Mt, Msolve, mu, xt)
        scale = max(1.0, abs(mu))
        if res <= tol * scale and abs(mu - mu_prev) <= 0.1 * tol * scale:
            return finish(mu, xt, rounds, True)
        mu_prev = mu
        # walk the shift toward (but certifiably below) the ground state
        sigma = mu - max(3.0 * res, 1e-8 * scale)
    best = finish(mu, xt, max_rounds, False)
    raise NotConverged(f"residual {best.residual:.3e} after {max_rounds} "
                       f"shift rounds (tol {tol})", result=best)


def sweep(forms: QuadraticForms, lambdas, tol: float = 1e-10):
    """Solve along an ascending lambda list, warm-starting each solve."""
    lambdas = list(lambdas)
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValidationError("lambda list must be strictly ascending")
    out = []
    v0 = None
    for lam in lambdas:
        r = solve_mu(forms, lam, tol=tol, v0=v0)
        out.append(r)
        v0 = r.vector
    return out


def _restrict(mat, keep):
    return mat[keep][:, keep].tocsc()


def local_hardy_remainder(forms: QuadraticForms, tol: float = 1e-8,
                          return_result: bool = False):
    """Discrete remainder constant of the local Hardy inequality.

    c_h = min over u of (A_b[u] - C M_q[u]) / M_log[u], with outer-radius
    nodes removed: the inequality is applied to functions supported inside
    the tube (that is how it is used on a closed manifold, via cutoffs),
    and with the outer boundary free the form is negative on constants.
    Requires R <= 0.2 so log(rho) is bounded away from zero.
    """
    cfg = forms.cfg
    if cfg is None or cfg.R > 0.2:
        raise ValidationError("local Hardy remainder requires a tube R <= 0.2")
    C = cfg.hardy_constant()
    K = (forms.A_b - C * forms.M_q).tocsc()
    Mlog = forms.M_log.tocsc()
    if len(forms.boundary_active):
        keep = np.setdiff1d(np.arange(forms.dof_count), forms.boundary_active)
        K = _restrict(K, keep)
        Mlog = _restrict(Mlog, keep)
    lb = -C * forms.max_q_logsq
    result = _solve_pencil(K, Mlog, 0.0, tol, None, 6, lb=lb,
                           scale0=max(1.0, abs(lb)))
    return result if return_result else result.mu


def extrapolate(values):
    """Aitken extrapolation of a refinement sequence with a fitted order.

    Returns (limit, order); order is None when the differences do not form
    a consistent geometric decay, in which case the last value is returned.
    """
    v = [float(x) for x in values]
    if len(v) < 3:
        return v[-1], None
    d1 = v[-2] - v[-3]
    d2 = v[-1] - v[-2]
    if d1 == 0.0 or d2 == 0.0 or d1 * d2 <= 0.0 or abs(d2) >= abs(d1):
        return v[-1], None
    theta = d2 / d1
    limit = v[-1] + d2 * theta / (1.0 - theta)
    order = -np.log2(theta)
    return float(limit), float(order)
