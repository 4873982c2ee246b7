"""Weight triples (b, q, eta) and their validation/normalization.

The quotient numerator and denominator carry three weights: a positive
diffusion coefficient b, a positive singular-mass coefficient q, and a
nonnegative Lipschitz perturbation weight eta vanishing on Sigma.  After
normalization the spec satisfies max over Sigma of q/b = 1, which pins the
sharp constant and is relied on by the attainment criterion.

Built-in families:

* ``Constant`` -- b = 1, q = const; the classic inverse-square setup.
* ``SinPower``  -- q(z) = 1 - A |sin(pi (z - z0))|^(2 beta) per tangential
  axis (tensor product for k > 1), so 1 - q vanishes to order 2*beta at the
  isolated maximizer z0 and the attainment-criterion integral is a p-test.
* ``Custom``    -- arithmetic expressions in (r, z1..zk) for q and b.

eta is one of rho, rho^2, or rho*h(z) with h >= 0 Lipschitz.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import (BadParams, EtaNegative, EtaNotLipschitz, EtaNotVanishing,
                     NonPositiveWeight, NotNormalized)
from .expressions import compile_expression
from .geometry import FermiPoint, Grid

SIGMA_MAX_TOL = 1e-10       # tolerance on max q/b = 1 after normalization
ETA_VANISH_TOL = 1e-8
ETA_LIPSCHITZ_BOUND = 1e6


class WeightFamily(enum.Enum):
    CONSTANT = "constant"
    SIN_POWER = "sin_power"
    CUSTOM = "custom"


class EtaKind(enum.Enum):
    RHO = "rho"
    RHO_SQUARED = "rho_squared"
    RHO_PROFILE = "rho_profile"


@dataclass(frozen=True)
class WeightSpec:
    family: WeightFamily
    k: int = 1
    amplitude: float = 0.5            # A for SinPower
    contact_beta: float = 1.5         # beta for SinPower
    z0: tuple = (0.0,)
    q_const: float = 1.0              # Constant family value
    custom_q: str | None = None
    custom_b: str | None = None       # None -> b == 1
    eta_kind: EtaKind = EtaKind.RHO_SQUARED
    eta_profile: str | None = None    # h(z) for RHO_PROFILE
    normalized: bool = False
    q_scale: float = 1.0              # normalization factor applied to q
    sigma_maximizers: tuple = ()      # recorded maximizers of q/b on Sigma
    continuum_maximizers: bool = False
    warnings: tuple = ()

    def __post_init__(self):
        if not isinstance(self.family, WeightFamily):
            object.__setattr__(self, "family", WeightFamily(self.family))
        if not isinstance(self.eta_kind, EtaKind):
            object.__setattr__(self, "eta_kind", EtaKind(self.eta_kind))
        object.__setattr__(self, "z0",
                           tuple(float(v) for v in np.atleast_1d(self.z0)))
        if len(self.z0) != self.k:
            raise BadParams(f"z0 has {len(self.z0)} components, k={self.k}")

    # -- raw evaluation (vectorized over trailing axes) ----------------------

    def q_raw(self, r, z):
        z = np.asarray(z, dtype=float)
        r = np.asarray(r, dtype=float)
        if self.family is WeightFamily.CONSTANT:
            return np.full(np.broadcast_shapes(r.shape, z.shape[:-1]), self.q_const)
        if self.family is WeightFamily.SIN_POWER:
            out = np.ones(z.shape[:-1])
            for a in range(self.k):
                s = np.abs(np.sin(np.pi * (z[..., a] - self.z0[a])))
                out = out * (1.0 - self.amplitude * s ** (2.0 * self.contact_beta))
            return np.broadcast_to(out, np.broadcast_shapes(r.shape, out.shape)).copy()
        return compile_expression(self.custom_q, self.k)(r, z)

    def b_at(self, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.custom_b is None:
            return np.ones(np.broadcast_shapes(r.shape, z.shape[:-1]))
        return compile_expression(self.custom_b, self.k)(r, z)

    def q_at(self, r, z):
        return self.q_scale * self.q_raw(r, z)

    def eta_at(self, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.eta_kind is EtaKind.RHO:
            h = np.ones(np.broadcast_shapes(r.shape, z.shape[:-1]))
            return r * h
        if self.eta_kind is EtaKind.RHO_SQUARED:
            return r * r * np.ones(np.broadcast_shapes(r.shape, z.shape[:-1]))
        h = compile_expression(self.eta_profile or "1", self.k)(r, z)
        return r * h

    def qb_sigma(self, z):
        """q/b restricted to Sigma (r = 0)."""
        z = np.asarray(z, dtype=float)
        r0 = np.zeros(z.shape[:-1])
        return self.q_at(r0, z) / self.b_at(r0, z)

    def as_dict(self) -> dict:
        return {
            "family": self.family.value,
            "A": self.amplitude,
            "beta": self.contact_beta,
            "z0": list(self.z0),
            "q_const": self.q_const,
            "custom_q": self.custom_q,
            "custom_b": self.custom_b,
            "eta_kind": self.eta_kind.value,
            "eta_profile": self.eta_profile,
            "q_scale": self.q_scale,
            "normalized": self.normalized,
        }


def eval_weights(spec: WeightSpec, p: FermiPoint):
    """Evaluate (b, q, eta) at a Fermi point.  Requires a normalized spec."""
    if not spec.normalized:
        raise NotNormalized("run validate_and_normalize first")
    z = np.asarray(p.z, dtype=float)
    b = float(spec.b_at(p.r, z))
    q = float(spec.q_at(p.r, z))
    eta = float(spec.eta_at(p.r, z))
    return b, q, eta


def make_sin_family(A: float, beta: float, z0, eta_kind=EtaKind.RHO_SQUARED,
                    k: int = 1, eta_profile: str | None = None) -> WeightSpec:
    """SinPower spec; for k=1 the criterion integral converges iff beta < 1.

    A = 1 is rejected: q would vanish at the antipode of z0, violating
    strict positivity.
    """
    if not (0.0 < A < 1.0):
        raise BadParams(f"amplitude must be in (0, 1), got {A}")
    if beta <= 0.0:
        raise BadParams(f"contact exponent must be positive, got {beta}")
    return WeightSpec(family=WeightFamily.SIN_POWER, k=k, amplitude=A,
                      contact_beta=beta, z0=tuple(np.atleast_1d(z0)),
                      eta_kind=eta_kind, eta_profile=eta_profile)


def _sigma_sample_grid(k: int):
    """Deterministic tangential sample with ~2^14 total points."""
    per_axis = max(64, int(round(2 ** (14 / k))))
    pts = np.arange(per_axis) / per_axis
    mesh = np.meshgrid(*([pts] * k), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), per_axis


def _golden_refine_axis(fn, z, axis, halfwidth, iters=80):
    """Golden-section maximization of fn along one coordinate of z."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a = z[axis] - halfwidth
    b = z[axis] + halfwidth
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    zz = z.copy()

    def val(x):
        zz[axis] = x
        return fn(zz)

    fc, fd = val(c), val(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = val(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = val(d)
    out = z.copy()
    out[axis] = 0.5 * (a + b)
    return out


def find_sigma_max(spec: WeightSpec):
    """Locate max of q/b on Sigma: (max value, maximizer list, continuum flag).

    Dense sampling (2^14 budget) plus golden-section refinement per axis at
    each candidate local maximum.
    """
    zgrid, per_axis = _sigma_sample_grid(spec.k)
    vals = spec.qb_sigma(zgrid)
    vmax = float(np.max(vals))
    near = vals >= vmax - 1e-9 * max(1.0, abs(vmax))
    continuum = bool(np.count_nonzero(near) > 0.01 * vals.size)
    if continuum:
        # a positive-measure maximizer set: the dense max is already exact
        # to sampling resolution and pointwise refinement is meaningless
        return vmax, [], True

    def qb_point(z):
        return spec.qb_sigma(z[None, :]).item()

    shape = (per_axis,) * spec.k
    grid_vals = vals.reshape(shape)
    is_max = np.ones(shape, dtype=bool)
    for a in range(spec.k):
        is_max &= grid_vals >= np.roll(grid_vals, 1, axis=a)
        is_max &= grid_vals >= np.roll(grid_vals, -1, axis=a)
    cand_idx = np.argwhere(is_max & (grid_vals >= vmax - 1e-4 * max(1.0, abs(vmax))))

    refined = []
    for idx in cand_idx:
        z = idx.astype(float) / per_axis
        for _sweep in range(3):
            for a in range(spec.k):
                z = _golden_refine_axis(qb_point, z, a, 1.5 / per_axis)
        z = np.mod(z, 1.0)
        refined.append((qb_point(z), tuple(z)))
    if not refined:
        return vmax, [], continuum
    best = max(v for v, _ in refined)
    # deduplicate on the torus
    keep = []
    for v, z in sorted(refined, key=lambda t: t[1]):
        if v < best - 1e-8 * max(1.0, abs(best)):
            continue
        dup = any(
            all(min(abs(a - b), 1.0 - abs(a - b)) < 2.0 / per_axis
                for a, b in zip(z, zk)) for zk in keep)
        if not dup:
            keep.append(z)
    return best, keep, continuum


def validate_and_normalize(spec: WeightSpec, grid: Grid) -> WeightSpec:
    """Rescale q so max over Sigma of q/b = 1 and check all weight conditions.

    Positivity of b and q is checked on every grid quadrature point;
    eta >= 0, eta = 0 on Sigma, and boundedness of eta/rho are checked on a
    fixed logarithmic probe ladder plus the near-Sigma grid points.
    Idempotent: normalizing twice gives the same spec.
    """
    base = replace(spec, q_scale=1.0, normalized=False,
                   sigma_maximizers=(), continuum_maximizers=False, warnings=())
    vmax, maximizers, continuum = find_sigma_max(base)
    if vmax <= 0.0:
        raise NonPositiveWeight(f"max of q/b on Sigma is {vmax}")
    scale = 1.0 / vmax

    cand = replace(base, q_scale=scale)

    rho_g = grid.qp_rho.ravel()
    z_g = grid.qp_z.reshape(-1, grid.cfg.k)
    zs, _ = _sigma_sample_grid(cand.k)
    b_g = cand.b_at(rho_g, z_g)
    q_g = cand.q_at(rho_g, z_g)
    b_s = cand.b_at(np.zeros(len(zs)), zs)
    q_s = cand.q_at(np.zeros(len(zs)), zs)
    for name, vals in (("b", b_g), ("q", q_g), ("b", b_s), ("q", q_s)):
        if np.any(vals <= 0.0) or not np.all(np.isfinite(vals)):
            raise NonPositiveWeight(
                f"{name} <= 0 at a sampled point (min {vals.min()})")

    eta_g = cand.eta_at(rho_g, z_g)
    if np.any(eta_g < 0.0):
        raise EtaNegative(f"eta < 0 at a quadrature point (min {eta_g.min()})")

    # eta on Sigma itself (evaluated in the limit, not at rho = 0, so that
    # profiles singular at the axis are judged by their vanishing rate)
    zsub = zs[:: max(1, len(zs) // 512)]
    with np.errstate(divide="ignore", invalid="ignore"):
        eta_sigma = cand.eta_at(np.full(len(zsub), 1e-300), zsub)
    if not np.all(np.isfinite(eta_sigma)) or np.any(np.abs(eta_sigma)
                                                    > ETA_VANISH_TOL):
        raise EtaNotVanishing("eta does not vanish on Sigma")

    # Lipschitz vanishing: difference quotient eta/rho on a log ladder
    ladder = np.geomspace(1e-14, grid.cfg.R / 10.0, 24)
    zl = zsub[:: max(1, len(zsub) // 16)]
    rr = np.repeat(ladder, len(zl))
    zz = np.tile(zl, (len(ladder), 1))
    quot = cand.eta_at(rr, zz) / rr
    near = rho_g < grid.cfg.R / 10.0
    if np.any(near):
        quot_grid = eta_g[near] / rho_g[near]
        quot = np.concatenate([quot, quot_grid])
    if np.any(quot > ETA_LIPSCHITZ_BOUND):
        raise EtaNotLipschitz(f"eta/rho reaches {quot.max():.3g}")

    warnings = []
    if continuum:
        warnings.append("ContinuumMaximizers: q/b attains its max on a "
                        "positive fraction of Sigma")
    # positivity of eta off Sigma is only advisory (the existence proof needs
    # eta >= 0 and eta <= C rho, nothing more)
    off = rho_g > grid.cfg.R / 2.0
    if np.any(off) and np.any(eta_g[off] <= 0.0):
        warnings.append("EtaVanishesOffSigma: eta = 0 somewhere off Sigma")

    out = replace(cand, normalized=True,
                  sigma_maximizers=tuple(maximizers),
                  continuum_maximizers=continuum,
                  warnings=tuple(warnings))
    # final guard on the realized normalization
    chk, _, _ = find_sigma_max(out)
    if abs(chk - 1.0) > SIGMA_MAX_TOL:
        raise NonPositiveWeight(f"normalization failed: max q/b = {chk}")
    return out
