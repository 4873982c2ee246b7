"""Convergence classification of the attainment integral over Sigma.

The integrand 1/sqrt(1 - q/b) blows up exactly on the maximizer set of
q/b (which normalization pins at value 1).  Near an isolated maximizer
with contact behavior 1 - q/b ~ c d^(2 beta) the integrand is ~ d^(-beta),
so on a k-dimensional Sigma the integral converges iff beta < k.

Two independent classifiers run and must agree:

* exponent test -- log-log regression of 1 - q/b against distance along
  coordinate rays; worst (smallest-convergence) direction decides, with a
  margin of 0.05 around beta = k;
* growth test -- quadrature of the integral with shrinking exclusion caps
  of radius 2^-j around each maximizer; convergent iff the estimates are
  Cauchy (last two within 5%), divergent iff the increments do not decay
  (this catches the logarithmic beta = k case that the exponent margin
  excludes).

A positive-measure maximizer set (q == b on a chunk of Sigma) is flagged
as a continuum and left Inconclusive rather than guessed at.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NonIsolatedMaximizers, PoorFit
from .weights import WeightSpec, find_sigma_max

LOCALIZATION_RADIUS = 2.0**-14      # dense-scan resolution on Sigma
BETA_MARGIN = 0.05
CAUCHY_REL = 0.05
FIT_RESIDUAL_MAX = 0.1
# 1 - q/b is formed by cancellation against 1, so values below ~100 eps are
# noise; samples under this floor are censored from fits and quadrature
MEASURABLE_CONTACT = 1e-13


class CriterionVerdict(enum.Enum):
    CONVERGENT = "Convergent"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"


class VerdictBasis(enum.Enum):
    EXPONENT = "ExponentTest"
    GROWTH = "GrowthTest"
    BOTH = "Both"
    NONE = "None"


@dataclass(frozen=True)
class BetaEstimate:
    maximizer: tuple
    beta: float
    fit_residual: float
    per_ray: tuple          # fitted beta along each coordinate ray


@dataclass(frozen=True)
class CriterionReport:
    maximizers: tuple
    localization_radius: float
    beta_estimates: tuple
    integral_estimates: tuple      # per cap level, increasing caps excluded
    cap_levels: tuple              # cap radii per level
    verdict: CriterionVerdict
    verdict_basis: VerdictBasis
    continuum_maximizers: bool = False
    notes: tuple = ()


def _torus_dist(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b))
    d = np.minimum(d, 1.0 - d)
    return float(np.sqrt(np.sum(d * d)))


def find_maximizers(spec: WeightSpec):
    """Isolated maximizers of q/b on Sigma (value within 1e-8 of 1).

    Raises NonIsolatedMaximizers when two refined maximizers are closer
    than 10x the localization radius; a positive-measure maximizer set is
    reported through the spec/continuum flag instead (empty list).
    """
    vmax, maximizers, continuum = find_sigma_max(spec)
    if continuum:
        return [], True
    good = [m for m in maximizers
            if abs(spec.qb_sigma(np.asarray(m)[None, :]).item() - 1.0) <= 1e-8]
    for i in range(len(good)):
        for j in range(i + 1, len(good)):
            if _torus_dist(good[i], good[j]) <= 10.0 * LOCALIZATION_RADIUS:
                raise NonIsolatedMaximizers(
                    f"maximizers {good[i]} and {good[j]} closer than "
                    f"{10.0 * LOCALIZATION_RADIUS}")
    return good, False


def estimate_exponents(spec: WeightSpec, maximizers,
                       d_lo: float = 1e-6, d_hi: float = 1e-2,
                       n_samples: int = 25):
    """Per-maximizer contact exponents by log-log regression along rays.

    1 - q/b ~ c d^(2 beta) gives slope 2 beta; the smallest beta over the
    2k coordinate rays is reported (the worst direction controls
    integrability).  Fit residual above 0.1 marks the estimate poor.
    """
    k = spec.k
    ds = np.geomspace(d_lo, d_hi, n_samples)
    out = []
    for m in maximizers:
        m = np.asarray(m, dtype=float)
        betas = []
        resids = []
        for axis in range(k):
            for sgn in (+1.0, -1.0):
                z = np.tile(m, (n_samples, 1))
                z[:, axis] = np.mod(m[axis] + sgn * ds, 1.0)
                g = 1.0 - spec.qb_sigma(z)
                ok = np.nonzero(g > MEASURABLE_CONTACT)[0]
                if len(ok) < 8:
                    raise PoorFit(f"contact of q/b at {tuple(m)} too flat to fit")
                x = np.log(ds[ok])
                y = np.log(g[ok])
                slope, intercept = np.polyfit(x, y, 1)
                # the maximizer location is only value-flat accurate; censor
                # distances within 100x of the float-flat scale and refit
                if slope > 0.0:
                    d_flat = float((1e-16 * np.exp(-intercept)) ** (1.0 / slope))
                    keep = ok[ds[ok] >= 100.0 * d_flat]
                    if len(keep) >= 6:
                        x, y = np.log(ds[keep]), np.log(g[keep])
                        slope, intercept = np.polyfit(x, y, 1)
                resid = float(np.sqrt(np.mean((y - slope * x - intercept) ** 2)))
                betas.append(slope / 2.0)
                resids.append(resid)
        out.append(BetaEstimate(maximizer=tuple(m),
                                beta=float(min(betas)),
                                fit_residual=float(max(resids)),
                                per_ray=tuple(betas)))
    return out


def _growth_levels_k1(spec: WeightSpec, maximizers, j0: int = 4,
                      j1: int = 20, cells_far: int = 2048,
                      cells_annulus: int = 48):
    """Cap-excluded quadrature levels of int 1/sqrt(1-q/b) for k = 1.

    Level j excludes caps of radius 2^-j around each maximizer; the far
    region uses uniform midpoint cells, each annulus [2^-j-1, 2^-j) a
    log-spaced midpoint rule.  Estimates are exactly nested: I_j is
    I_{j-1} plus the annulus contributions, so divergence appears as
    non-decaying increments.
    """
    ms = sorted(m[0] for m in maximizers)
    d0 = 2.0**-j0

    def contact(z):
        return 1.0 - spec.qb_sigma(np.atleast_2d(z).T)

    def f(z):
        return 1.0 / np.sqrt(np.maximum(contact(z), 1e-300))

    far = 0.0
    for i, m in enumerate(ms):
        nxt = m + 1.0 if len(ms) == 1 else \
            (ms[i + 1] if i + 1 < len(ms) else ms[0] + 1.0)
        a, b = m + d0, nxt - d0
        if b <= a:
            continue
        zmid = a + (np.arange(cells_far) + 0.5) * (b - a) / cells_far
        far += float(np.sum(f(np.mod(zmid, 1.0)))) * (b - a) / cells_far

    levels = [far]
    caps = [d0]
    for j in range(j0 + 1, j1 + 1):
        inc = 0.0
        lo, hi = 2.0**-j, 2.0 ** -(j - 1)
        edges = np.geomspace(lo, hi, cells_annulus + 1)
        mid = np.sqrt(edges[:-1] * edges[1:])
        dw = np.diff(edges)
        measurable = True
        for m in ms:
            for sgn in (+1.0, -1.0):
                g = contact(np.mod(m + sgn * mid, 1.0))
                if np.any(g <= MEASURABLE_CONTACT):
                    measurable = False
                inc += float(np.sum(dw / np.sqrt(np.maximum(g, 1e-300))))
        if not measurable:
            break    # deeper caps are below float resolution; stop honestly
        levels.append(levels[-1] + inc)
        caps.append(lo)
    return levels, caps


def _growth_verdict(levels):
    """Cauchy -> Convergent; non-decaying increments -> Divergent."""
    inc = np.diff(levels)
    if len(inc) < 3:
        return CriterionVerdict.INCONCLUSIVE
    if abs(levels[-1] - levels[-2]) <= CAUCHY_REL * abs(levels[-1]):
        return CriterionVerdict.CONVERGENT
    head = np.mean(inc[:3])
    tail = np.mean(inc[-3:])
    if tail >= 0.5 * head and levels[-1] >= 1.2 * levels[0]:
        return CriterionVerdict.DIVERGENT
    return CriterionVerdict.INCONCLUSIVE


def classify_criterion(spec: WeightSpec) -> CriterionReport:
    """Combine exponent and growth tests into a criterion verdict.

    Agreement gives the shared verdict with basis Both; a margin-void
    exponent lets the growth test decide alone (and vice versa); open
    disagreement or a continuum of maximizers is Inconclusive.
    """
    notes = []
    try:
        maximizers, continuum = find_maximizers(spec)
    except NonIsolatedMaximizers as exc:
        return CriterionReport((), LOCALIZATION_RADIUS, (), (), (),
                               CriterionVerdict.INCONCLUSIVE,
                               VerdictBasis.NONE, False,
                               (f"NonIsolatedMaximizers: {exc}",))
    if continuum:
        return CriterionReport((), LOCALIZATION_RADIUS, (), (), (),
                               CriterionVerdict.INCONCLUSIVE,
                               VerdictBasis.NONE, True,
                               ("ContinuumMaximizers: q/b = 1 on a "
                                "positive-measure subset of Sigma",))
    if not maximizers:
        return CriterionReport((), LOCALIZATION_RADIUS, (), (), (),
                               CriterionVerdict.CONVERGENT,
                               VerdictBasis.EXPONENT, False,
                               ("no contact points: integrand bounded",))

    k = spec.k
    try:
        estimates = estimate_exponents(spec, maximizers)
        poor = any(e.fit_residual > FIT_RESIDUAL_MAX for e in estimates)
    except PoorFit as exc:
        estimates, poor = [], True
        notes.append(str(exc))
    if poor:
        exp_verdict = None
        notes.append("PoorFit: exponent regression residual too large")
    else:
        # one divergent contact point makes the whole integral diverge
        largest = max(e.beta for e in estimates)
        if largest >= k + BETA_MARGIN:
            exp_verdict = CriterionVerdict.DIVERGENT
        elif largest <= k - BETA_MARGIN:
            exp_verdict = CriterionVerdict.CONVERGENT
        else:
            exp_verdict = None
            notes.append(f"beta within {BETA_MARGIN} of k: exponent test abstains")

    if k == 1:
        levels, caps = _growth_levels_k1(spec, maximizers)
        growth_verdict = _growth_verdict(levels)
    else:
        levels, caps = (), ()
        growth_verdict = CriterionVerdict.INCONCLUSIVE
        notes.append("growth test limited to k = 1; exponent test decides")

    if growth_verdict is CriterionVerdict.INCONCLUSIVE and exp_verdict is None:
        verdict, basis = CriterionVerdict.INCONCLUSIVE, VerdictBasis.NONE
    elif exp_verdict is None:
        verdict, basis = growth_verdict, VerdictBasis.GROWTH
    elif growth_verdict is CriterionVerdict.INCONCLUSIVE:
        verdict, basis = exp_verdict, VerdictBasis.EXPONENT
    elif growth_verdict is exp_verdict:
        verdict, basis = exp_verdict, VerdictBasis.BOTH
    else:
        verdict, basis = CriterionVerdict.INCONCLUSIVE, VerdictBasis.NONE
        notes.append("exponent and growth tests disagree")

    return CriterionReport(
        maximizers=tuple(tuple(m) for m in maximizers),
        localization_radius=LOCALIZATION_RADIUS,
        beta_estimates=tuple(estimates),
        integral_estimates=tuple(levels),
        cap_levels=tuple(caps),
        verdict=verdict,
        verdict_basis=basis,
        continuum_maximizers=False,
        notes=tuple(notes),
    )
