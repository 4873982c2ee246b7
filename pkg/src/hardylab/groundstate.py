"""Virtual ground states, the singular operator, and expansion/barrier checks.

The ground-state family is v_{a,q}(p) = (-log rho)^a * rho^alpha with

    alpha = ((2+k-N)/2) * (1 - sqrt(1 - q(sigma(p)) + rho(p))),

the exponent that formally saturates the sharp constant C = ((N-k-2)/2)^2.
The operator under study is

    L_lam = -Lap - C q rho^(-2) + lam eta rho^(-2),

with the analyst's sign convention (-Lap has nonnegative spectrum).  All of
this module fixes b == 1; general b is handled upstream by replacing q with
q/b.

Exact expansion.  For y-radial evaluation (q constant, or q(z) frozen at a
tangential sample) one derives, with l = -log rho and nu = N - k:

    Lap v = -C q rho^-2 v + a(a-1) rho^-2 l^-2 v
            + a (nu - 2) sqrt(1 - q(sigma) + eps) rho^-2 (log rho)^-1 v
            + O(rho^-3/2 |log rho|) v.

The (log)^-1 coefficient a*(nu-2+2*alpha0) = a*(nu-2)*sqrt(1-q(sigma)) is
what the algebra gives (it vanishes for a = 0, and for q(sigma) = 1);
residual checks use it, and ExpansionCheck additionally reports which
coefficient reading the data matches empirically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .errors import (FDUnstable, NegativeRadicand, NoValidRadius, OutOfDomain,
                     StepTooLarge, ValidationError)
from .geometry import FermiPoint, GeometryConfig, Grid
from .weights import WeightFamily, WeightSpec

ORACLE_DPS = 200     # working precision of the radial scalar oracle

# order-6 centered stencils (unit step)
_D1 = np.array([-1.0 / 60, 3.0 / 20, -3.0 / 4, 0.0, 3.0 / 4, -3.0 / 20, 1.0 / 60])
_D2 = np.array([1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90])
_OFFS = np.arange(-3, 4)


@dataclass(frozen=True)
class GroundStateParams:
    """Log-power exponent a and weight shift eps selecting v_{a, q-eps}.

    H^1 membership of the tube truncation holds for a < -1/2 or eps > 0;
    the ``h1_member`` property records that claim.
    """

    a: float
    epsilon: float = 0.0
    spec: WeightSpec = None

    def __post_init__(self):
        if not (0.0 <= self.epsilon < 1.0):
            raise ValidationError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.spec is None:
            raise ValidationError("params need a WeightSpec")
        if self.spec.custom_b is not None:
            raise ValidationError("ground-state checks fix b == 1; "
                                  "fold b into q upstream (q -> q/b)")

    @property
    def h1_member(self) -> bool:
        return self.a < -0.5 or self.epsilon > 0.0


def _leading_coeff(cfg: GeometryConfig):
    nu = cfg.normal_dim
    A = (2.0 - nu) / 2.0          # (2+k-N)/2
    C = ((nu - 2.0) / 2.0) ** 2
    return nu, A, C


def alpha(spec: WeightSpec, p: FermiPoint, cfg: GeometryConfig,
          epsilon: float = 0.0) -> float:
    """Decay exponent alpha at a point, radicand 1 - (q-eps)(sigma) + rho."""
    nu, A, _ = _leading_coeff(cfg)
    qs = float(spec.q_at(0.0, np.asarray(p.z, dtype=float))) - epsilon
    rad = 1.0 - qs + p.r
    if rad < 0.0:
        raise NegativeRadicand(f"1 - q + rho = {rad} < 0; spec not normalized?")
    return A * (1.0 - math.sqrt(rad))


def _alpha_arr(spec, cfg, rho_a, z_a, epsilon=0.0):
    nu, A, _ = _leading_coeff(cfg)
    qs = spec.q_at(np.zeros_like(rho_a), z_a) - epsilon
    rad = 1.0 - qs + rho_a
    if np.any(rad < 0.0):
        raise NegativeRadicand("1 - q + rho < 0 at a sample; spec not normalized?")
    return A * (1.0 - np.sqrt(rad))


def v_from_alpha(a: float, alpha_val, rho):
    """v = (-log rho)^a * rho^alpha for given exponent values."""
    rho = np.asarray(rho, dtype=float)
    ell = -np.log(rho)
    return ell**a * rho**alpha_val


def eval_v(params: GroundStateParams, p: FermiPoint, cfg: GeometryConfig) -> float:
    """Evaluate v_{a, q-eps} at a point; requires rho in (0, 1)."""
    if not (0.0 < p.r < 1.0):
        raise OutOfDomain(f"rho={p.r} outside (0, 1)")
    al = alpha(params.spec, p, cfg, params.epsilon)
    return float(v_from_alpha(params.a, al, p.r))


def make_v_callable(params: GroundStateParams, cfg: GeometryConfig):
    """Vectorized (r, z) -> v_{a, q-eps} for quadrature and stencils."""
    a, eps, spec = params.a, params.epsilon, params.spec

    def fn(r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        al = _alpha_arr(spec, cfg, r, z, eps)
        return v_from_alpha(a, al, r)

    return fn


# ---------------------------------------------------------------------------
# finite-difference application of L_lambda
# ---------------------------------------------------------------------------

def _laplacian_fd(fn, cfg: GeometryConfig, r: float, z, h: float):
    """Order-6 FD Laplacian of fn(r, z) for y-radial functions.

    Lap = d_rr + (nu-1)/r d_r + sum_a d_{z_a z_a}; each coordinate uses the
    7-point order-6 centered stencil with the same step h.
    """
    nu = cfg.normal_dim
    k = cfg.k
    z = np.asarray(z, dtype=float)
    rs = r + h * _OFFS
    zc = np.broadcast_to(z, (7, k))
    fr = fn(rs, zc)
    d1 = float(np.dot(_D1, fr)) / h
    d2 = float(np.dot(_D2, fr)) / h**2
    lap = d2 + (nu - 1.0) / r * d1
    for ax in range(k):
        zs = np.repeat(z[None, :], 7, axis=0)
        zs[:, ax] = z[ax] + h * _OFFS
        fz = fn(np.full(7, r), zs)
        lap += float(np.dot(_D2, fz)) / h**2
    return lap


def apply_operator(fn, spec: WeightSpec, cfg: GeometryConfig, lam: float,
                   p: FermiPoint, h: float | None = None,
                   with_error: bool = False):
    """(L_lam fn)(p) by order-6 finite differences, step h (default rho/16).

    With ``with_error`` a step-halving estimate of the FD error is returned
    alongside; the potential terms are evaluated analytically, so the error
    estimate covers only the Laplacian.
    """
    r = float(p.r)
    if h is None:
        h = r / 16.0
    if h > r / 4.0:
        raise StepTooLarge(f"h={h} exceeds rho/4={r / 4.0}")
    _, _, C = _leading_coeff(cfg)
    z = np.asarray(p.z, dtype=float)
    qs = float(spec.q_at(0.0, z))
    eta = float(spec.eta_at(r, z))
    f0 = fn(np.array([r]), z[None, :]).item()
    pot = (-C * qs + lam * eta) / r**2 * f0

    lap_h = _laplacian_fd(fn, cfg, r, z, h)
    if not with_error:
        return -lap_h + pot
    lap_h2 = _laplacian_fd(fn, cfg, r, z, h / 2.0)
    err = abs(lap_h - lap_h2) / (2.0**6 - 1.0)
    return -lap_h2 + pot, err


def apply_L_lambda(params: GroundStateParams, lam: float, p: FermiPoint,
                   cfg: GeometryConfig, h: float | None = None):
    """(L_lam v_{a, q-eps})(p) via the FD machinery."""
    return apply_operator(make_v_callable(params, cfg), params.spec, cfg,
                          lam, p, h)


# ---------------------------------------------------------------------------
# radial scalar oracle (q constant): exact derivatives in high precision
# ---------------------------------------------------------------------------

def _oracle_eval(a, eps, qbar, nu, rho_val, dps=ORACLE_DPS):
    """v, Lap v and log-derivative pieces for constant q, in mpmath.

    With g = log v = a log(l) + alpha(r) log r, l = -log r,
    Lap v / v = g'' + (g')^2 + (nu-1)/r g'.
    """
    with mp.workdps(dps):
        r = mp.mpf(rho_val)
        A = (mp.mpf(2) - nu) / 2
        c0 = 1 - mp.mpf(qbar) + mp.mpf(eps)
        rad = c0 + r
        s = mp.sqrt(rad)
        al = A * (1 - s)
        alp = -A / (2 * s)
        alpp = A / (4 * rad ** mp.mpf(1.5))
        ell = -mp.log(r)
        logr = mp.log(r)
        v = ell**a * r**al
        gp = -a / (r * ell) + alp * logr + al / r
        gpp = (a / (r**2 * ell) - a / (r**2 * ell**2)
               + alpp * logr + 2 * alp / r - al / r**2)
        lap_over_v = gpp + gp**2 + (nu - 1) / r * gp
        return float(v), float(lap_over_v * v), float(al), float(ell)


def radial_oracle(params: GroundStateParams, cfg: GeometryConfig,
                  rho_val: float, lam: float = 0.0):
    """High-precision (v, Lap v, L_lam v) at rho for constant-q specs."""
    if params.spec.family is not WeightFamily.CONSTANT:
        raise ValidationError("radial oracle requires the Constant family")
    nu, _, C = _leading_coeff(cfg)
    qbar = params.spec.q_const * params.spec.q_scale
    v, lap, _, _ = _oracle_eval(params.a, params.epsilon, qbar, nu, rho_val)
    zeros = np.zeros((1, cfg.k))
    eta = params.spec.eta_at(np.array([rho_val]), zeros).item()
    Lv = -lap + (-C * qbar + lam * eta) / rho_val**2 * v
    return v, lap, Lv


# ---------------------------------------------------------------------------
# expansion residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionSample:
    rho: float
    z: tuple
    residual: float
    scaled_residual: float
    fd_error: float


@dataclass(frozen=True)
class ExpansionCheck:
    """Residual of the ground-state expansion along a dyadic schedule.

    ``samples`` are sorted by decreasing rho.  ``slope_fit`` is the least
    squares (slope, intercept) of log(|residual| rho^2 / v) against
    log(rho): a positive slope means the residual is that many powers of
    rho smaller than the leading rho^-2 scale.  ``log1_coeff_fit`` is the
    empirical (log rho)^-1 coefficient and ``log1_reading`` records which
    closed form it matches ("derived" = a(nu-2)sqrt(1-q+eps), "stated" =
    nu-a, or "ambiguous").
    """

    samples: tuple
    slope_fit: tuple
    max_scaled_residual: float
    dropped: int = 0
    log1_coeff_fit: float = 0.0
    log1_reading: str = "ambiguous"

    def rho_values(self):
        return np.array([s.rho for s in self.samples])

    def scaled_residuals(self):
        return np.array([s.scaled_residual for s in self.samples])


@dataclass(frozen=True)
class SampleSchedule:
    j_min: int = 4
    j_max: int = 20
    n_tangential: int = 8

    def rho_values(self):
        return 2.0 ** (-np.arange(self.j_min, self.j_max + 1, dtype=float))


def _tangential_offsets(spec: WeightSpec, n: int):
    """n tangential samples offset from the contact point z0.

    Midpoint-shifted so no sample sits exactly on a maximizer of q, where
    the exponent degenerates; mirrors the quadrature rule never touching
    Sigma.
    """
    offs = (np.arange(n) + 0.5) / n
    z0 = np.asarray(spec.z0, dtype=float)
    return np.mod(z0[None, :] + offs[:, None], 1.0)


def expansion_residual(params: GroundStateParams, cfg: GeometryConfig,
                       schedule: SampleSchedule = SampleSchedule()) -> ExpansionCheck:
    """Check Lap v against its expansion; residual must be O(rho^-3/2 |log|) v.

    Constant-q specs use the high-precision radial oracle; general specs use
    order-6 finite differences with step-halving noise control (samples with
    FD noise above half the residual are dropped and counted).
    """
    spec = params.spec
    nu, A, C = _leading_coeff(cfg)
    a, eps = params.a, params.epsilon
    use_oracle = spec.family is WeightFamily.CONSTANT
    zs = _tangential_offsets(spec, schedule.n_tangential)
    rows = []
    v_by_row = []
    raw_t = []       # (rho, T) pairs for the (log)^-1 coefficient fit
    dropped = 0
    vfn = make_v_callable(params, cfg)
    for rv in schedule.rho_values():
        for z_idx, zrow in enumerate(zs):
            if use_oracle:
                qbar = spec.q_const * spec.q_scale
                v, lap, _, _ = _oracle_eval(a, eps, qbar, nu, rv)
                fd_err = 0.0
                q_here = qbar - eps
            else:
                p = FermiPoint(rv, tuple(zrow))
                v = eval_v(params, p, cfg)
                lap_h = _laplacian_fd(vfn, cfg, rv, zrow, rv / 16.0)
                lap_h2 = _laplacian_fd(vfn, cfg, rv, zrow, rv / 32.0)
                fd_err = abs(lap_h - lap_h2) / 63.0
                lap = lap_h2
                q_here = float(spec.q_at(0.0, zrow)) - eps
            ell = -math.log(rv)
            logr = math.log(rv)
            c0 = 1.0 - q_here
            coef1 = a * (nu - 2.0) * math.sqrt(max(c0, 0.0))
            body = lap + C * q_here * v / rv**2
            tail2 = a * (a - 1.0) * v / (rv**2 * ell**2)
            tail1 = coef1 * v / (rv**2 * logr)
            resid = body - tail2 - tail1
            if z_idx == 0:
                # coefficient fit at one reference offset: the (log)^-1
                # coefficient varies with q(sigma) across offsets
                raw_t.append((rv, (body - tail2) * rv**2 * logr / v))
            scaled = abs(resid) * rv**1.5 / (ell * abs(v))
            keep = fd_err <= 0.5 * abs(resid) or fd_err == 0.0
            if keep:
                rows.append(ExpansionSample(rv, tuple(zrow), resid, scaled, fd_err))
                v_by_row.append(abs(v))
            else:
                dropped += 1
            if use_oracle:
                break       # z-independent; one row per rho is the content
    if not rows:
        raise FDUnstable("all samples dropped; no resolvable residual")
    order = sorted(range(len(rows)), key=lambda i: -rows[i].rho)
    rows = [rows[i] for i in order]
    v_by_row = [v_by_row[i] for i in order]

    x = np.log(np.array([s.rho for s in rows]))
    y = np.log(np.array([abs(s.residual) * s.rho**2 / vv
                         for s, vv in zip(rows, v_by_row)]).clip(1e-300))
    slope, intercept = np.polyfit(x, y, 1)

    # empirical (log)^-1 coefficient from the deepest quartile
    raw_t.sort(key=lambda t: t[0])
    deepest = [t for _, t in raw_t[: max(3, len(raw_t) // 4)]]
    c1 = float(np.mean(deepest))
    zmid = zs[0]
    q_mid = (float(spec.q_at(0.0, zmid)) - eps if not use_oracle
             else spec.q_const * spec.q_scale - eps)
    derived = a * (nu - 2.0) * math.sqrt(max(1.0 - q_mid, 0.0))
    stated = nu - a
    d_der, d_st = abs(c1 - derived), abs(c1 - stated)
    if d_der < 0.5 * d_st:
        reading = "derived"
    elif d_st < 0.5 * d_der:
        reading = "stated"
    else:
        reading = "ambiguous"

    return ExpansionCheck(samples=tuple(rows),
                          slope_fit=(float(slope), float(intercept)),
                          max_scaled_residual=float(max(s.scaled_residual
                                                        for s in rows)),
                          dropped=dropped,
                          log1_coeff_fit=c1,
                          log1_reading=reading)


# ---------------------------------------------------------------------------
# barrier checks
# ---------------------------------------------------------------------------

class BarrierKind(enum.Enum):
    SUBSOLUTION_VEPS = "subsolution_veps"
    SUPERSOLUTION_U = "supersolution_u"


@dataclass(frozen=True)
class BarrierReport:
    """Sign verification of L_lam on a barrier over a radius/angle sample.

    r_valid is the largest sampled radius below which the sign condition
    holds at every sample (up to the FD error budget tol_fd);
    worst_violation is the most positive signed violation among samples
    with rho <= r_valid (<= 0 when the check passes cleanly).
    """

    kind: BarrierKind
    lam: float
    r_valid: float
    worst_violation: float
    positivity_ok: bool
    epsilons: tuple = ()
    tol_fd: float = 0.0
    samples: tuple = field(default=(), repr=False)


def _barrier_callable(kind: BarrierKind, spec: WeightSpec, cfg: GeometryConfig,
                      eps: float):
    if kind is BarrierKind.SUBSOLUTION_VEPS:
        vm1 = make_v_callable(GroundStateParams(-1.0, 0.0, spec), cfg)
        v0e = make_v_callable(GroundStateParams(0.0, eps, spec), cfg)
        return lambda r, z: vm1(r, z) + v0e(r, z)
    v0 = make_v_callable(GroundStateParams(0.0, 0.0, spec), cfg)
    vm1 = make_v_callable(GroundStateParams(-1.0, 0.0, spec), cfg)
    return lambda r, z: v0(r, z) - vm1(r, z)


def barrier_check(kind: BarrierKind, spec: WeightSpec, cfg: GeometryConfig,
                  lam: float, epsilons=(0.0, 0.1, 0.5),
                  n_rho: int = 36, n_z: int = 8,
                  rho_min: float = 1e-6) -> BarrierReport:
    """Verify L_lam V_eps <= 0 (subsolution) or L_lam U >= 0, U > 0.

    Samples are log-spaced radii in (rho_min, R) crossed with tangential
    offsets; the sign condition is required at every sample with rho below
    the reported r_valid, with tolerance tol_fd = 10x the step-halving FD
    error estimate.
    """
    if not spec.normalized:
        raise ValidationError("barrier_check requires a normalized spec")
    rho_samples = np.geomspace(rho_min, 0.98 * cfg.R, n_rho)
    z_samples = _tangential_offsets(spec, n_z)
    eps_list = tuple(epsilons) if kind is BarrierKind.SUBSOLUTION_VEPS else (0.0,)

    rows = []       # (rho, z, eps, signed_violation, fd_err, value)
    positivity_ok = True
    for eps in eps_list:
        fn = _barrier_callable(kind, spec, cfg, eps)
        for rv in rho_samples:
            for zrow in z_samples:
                p = FermiPoint(rv, tuple(zrow))
                val, err = apply_operator(fn, spec, cfg, lam, p,
                                          with_error=True)
                tol = 10.0 * err + 1e-13 * abs(val)
                if kind is BarrierKind.SUBSOLUTION_VEPS:
                    violation = val - tol
                else:
                    violation = -val - tol
                    u_val = fn(np.array([rv]), zrow[None, :]).item()
                    if u_val <= 0.0:
                        positivity_ok = False
                rows.append((rv, tuple(zrow), eps, violation, err, val))

    # r_valid: largest sample radius such that all samples below it pass
    radii = sorted(set(r for r, *_ in rows))
    worst_by_radius = {r: max(v for (rr, _, _, v, _, _) in rows if rr == r)
                       for r in radii}
    r_valid = 0.0
    for r in radii:
        if worst_by_radius[r] <= 0.0:
            r_valid = r
        else:
            break
    if r_valid == 0.0:
        raise NoValidRadius(
            f"{kind.value}: sign condition fails at rho={radii[0]:.3g}")
    included = [v for (r, _, _, v, _, _) in rows if r <= r_valid]
    tol_fd = max(10.0 * e for (_, _, _, _, e, _) in rows)
    return BarrierReport(kind=kind, lam=lam, r_valid=r_valid,
                         worst_violation=max(included),
                         positivity_ok=positivity_ok,
                         epsilons=eps_list, tol_fd=tol_fd,
                         samples=tuple(rows))


def barrier_integral_bound(spec: WeightSpec, grid: Grid,
                           r_cap: float | None = None):
    """Quadratures of both sides of the barrier mass bound.

    Left side: integral of V_0^2 rho^-2 over the tube (grid quadrature).
    Right side: tangential quadrature of 1/sqrt(1 - q(sigma)) at the grid's
    tangential resolution.  Divergence of the right side shows up as growth
    across refinement levels; the caller sweeps levels.
    """
    cfg = grid.cfg
    if r_cap is None:
        r_cap = cfg.R
    v0fn = _barrier_callable(BarrierKind.SUBSOLUTION_VEPS, spec, cfg, 0.0)
    rho_g = grid.qp_rho.ravel()
    z_g = grid.qp_z.reshape(-1, cfg.k)
    w_g = grid.weights.ravel()
    mask = rho_g <= r_cap
    vals = v0fn(rho_g[mask], z_g[mask])
    lhs = float(np.sum(w_g[mask] * vals**2 / rho_g[mask] ** 2))

    n = cfg.n_z
    mids = (np.arange(n) + 0.5) / n
    mesh = np.meshgrid(*([mids] * cfg.k), indexing="ij")
    zm = np.stack([m.ravel() for m in mesh], axis=1)
    qs = spec.q_at(np.zeros(len(zm)), zm)
    integrand = 1.0 / np.sqrt(np.maximum(1.0 - qs, 1e-300))
    rhs = float(np.sum(integrand) / n**cfg.k)
    return lhs, rhs
