"""Threshold location and attainment diagnostics.

mu_lam equals the sharp constant C for lambda below a finite threshold and
drops strictly below it above the threshold.  Numerically the plateau is
approached from above through slowly spreading discrete minimizers, so the
dichotomy predicate works on Richardson-extrapolated values over three mesh
levels with a safety gap: P(lam) = "extrapolated mu < C - gap".  The gap is
calibrated as three times the observed extrapolation error on the plateau
itself (by walking lambda negative until the extrapolated value stops
moving).  Bisection of P then brackets the threshold.

The departure of mu from the plateau is quadratically flat in lambda (the
new ground state appears as a marginally bound mode), so the located
bracket sits a little above the true threshold; the attainment diagnostics
on either side of the bracket are therefore trend classifications, not
certificates, and Inconclusive is an expected verdict near the crossing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .assembly import assemble_forms
from .eigensolve import extrapolate, solve_mu
from .errors import NoBracket, ValidationError
from .geometry import GeometryConfig, build_grid
from .weights import WeightSpec

LAMBDA_LIMIT = 1e6


class Verdict(enum.Enum):
    BOUNDED_MINIMIZER = "BoundedMinimizer"
    CONCENTRATING_SEQUENCE = "ConcentratingSequence"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ThresholdResult:
    lambda_star: float
    bracket: tuple                 # (lo, hi): P false at lo, true at hi
    per_mesh_mu: tuple             # rows (level, n_r, n_z, lam, mu)
    extrapolated_mu: tuple         # rows (lam, extrapolated mu)
    gap_tolerance: float
    hardy_constant: float
    calibration_lambda: float


@dataclass(frozen=True)
class AttainmentDiagnostic:
    lam: float
    mass_ratio_series: tuple       # M_q-mass fraction within rho < R/cap_divisor
    rho_inv_norm_series: tuple     # M_q[u] with u M_0-normalized
    verdict: Verdict
    levels: tuple                  # (n_r, n_z) per level
    cap_divisor: float


class _LevelSolver:
    """Forms per mesh level, reused across all lambda probes; warm starts."""

    def __init__(self, cfg: GeometryConfig, spec: WeightSpec, multipliers,
                 tol: float):
        self.tol = tol
        self.levels = []
        for m in multipliers:
            lcfg = cfg.with_resolution(cfg.n_r * m, cfg.n_z * m)
            grid = build_grid(lcfg)
            forms = assemble_forms(grid, spec)
            self.levels.append({"cfg": lcfg, "forms": forms, "v0": None})
        self.mu_rows = []
        self.extrap_rows = {}

    def extrapolated_mu(self, lam: float) -> float:
        if lam in self.extrap_rows:
            return self.extrap_rows[lam]
        mus = []
        for idx, lvl in enumerate(self.levels):
            r = solve_mu(lvl["forms"], lam, tol=self.tol, v0=lvl["v0"])
            lvl["v0"] = r.vector
            mus.append(r.mu)
            self.mu_rows.append((idx, lvl["cfg"].n_r, lvl["cfg"].n_z, lam, r.mu))
        value, _ = extrapolate(mus)
        self.extrap_rows[lam] = value
        return value


def extrapolated_mu_levels(cfg: GeometryConfig, spec: WeightSpec, lam: float,
                           multipliers=(1, 2, 4), tol: float = 1e-9) -> float:
    """Richardson-extrapolated mu over mesh levels at a single lambda."""
    return _LevelSolver(cfg, spec, multipliers, tol).extrapolated_mu(lam)


def _calibrate_gap(solver: _LevelSolver, C: float):
    """Walk lambda negative until the plateau is reached; gap = 3x error.

    The exact value never exceeds C, so the first probe whose extrapolated
    mu reaches C is inside the plateau and its overshoot measures the
    extrapolation error there (discrete values approach the plateau from
    above, and on coarse meshes keep creeping upward with |lambda| as the
    eta-wall shrinks the resolved range, so waiting for flatness instead
    would inflate the calibration).
    """
    lam = -4.0 * max(1.0, C)
    prev = solver.extrapolated_mu(lam)
    while abs(lam) < LAMBDA_LIMIT:
        lam *= 2.0
        cur = solver.extrapolated_mu(lam)
        if cur >= C or abs(cur - prev) <= 5e-3 * max(1.0, C):
            err = abs(cur - C)
            return max(3.0 * err, 0.01 * max(1.0, C)), lam
        prev = cur
    raise NoBracket("no plateau found down to lambda = -1e6; "
                    "is eta degenerate on the minimizer's support?")


def find_lambda_star(cfg: GeometryConfig, spec: WeightSpec,
                     tol_lambda: float = 0.1, multipliers=(1, 2, 4),
                     tol: float = 1e-9,
                     gap_tolerance: float | None = None) -> ThresholdResult:
    """Bracket the threshold by bisection of the extrapolation predicate.

    The initial bracket [-1, 1] is grown geometrically until the predicate
    differs at the ends; NoBracket is raised if it stays constant over
    |lambda| <= 1e6.  The returned bracket has width <= tol_lambda and the
    predicate is re-evaluated at both ends after the search.
    """
    if cfg.hardy_constant() <= 0.0:
        raise ValidationError("threshold requires N - k >= 3 (positive constant)")
    if not spec.normalized:
        raise ValidationError("find_lambda_star requires a normalized spec")
    C = cfg.hardy_constant()
    solver = _LevelSolver(cfg, spec, multipliers, tol)

    if gap_tolerance is None:
        gap, lam_cal = _calibrate_gap(solver, C)
    else:
        gap, lam_cal = float(gap_tolerance), float("nan")

    def P(lam):
        return solver.extrapolated_mu(lam) < C - gap

    lo, hi = -1.0, 1.0
    if P(lo):
        hi = lo
        while P(lo):
            lo *= 2.0
            if abs(lo) > LAMBDA_LIMIT:
                raise NoBracket("predicate true for all lambda >= -1e6")
    else:
        while not P(hi):
            hi *= 2.0
            if hi > LAMBDA_LIMIT:
                raise NoBracket("predicate false for all lambda <= 1e6")
        lo = hi / 2.0 if hi > 1.0 else lo

    while hi - lo > tol_lambda:
        mid = 0.5 * (lo + hi)
        if P(mid):
            hi = mid
        else:
            lo = mid

    # re-evaluate the endpoints after the search (not from the probe cache)
    solver.extrap_rows.pop(lo, None)
    solver.extrap_rows.pop(hi, None)
    if P(lo) or not P(hi):
        raise NoBracket("bracket endpoints lost their predicate values on "
                        "re-evaluation")

    return ThresholdResult(
        lambda_star=0.5 * (lo + hi),
        bracket=(lo, hi),
        per_mesh_mu=tuple(solver.mu_rows),
        extrapolated_mu=tuple(sorted(solver.extrap_rows.items())),
        gap_tolerance=gap,
        hardy_constant=C,
        calibration_lambda=lam_cal,
    )


def _series_stable(series, rel=0.10):
    a, b = series[-2], series[-1]
    return abs(b - a) <= rel * max(abs(b), 1e-300)


def _series_growing(series, rel=0.15):
    inc = all(b > a for a, b in zip(series, series[1:]))
    a, b = series[-2], series[-1]
    return inc and (b - a) > rel * max(abs(b), 1e-300)


def attainment_diagnostic(cfg: GeometryConfig, spec: WeightSpec, lam: float,
                          multipliers=(1, 2, 4), tol: float = 1e-9,
                          cap_divisor: float = 4.0) -> AttainmentDiagnostic:
    """Refinement-trend classification of the minimizer at a fixed lambda.

    BoundedMinimizer: both the M_0-normalized singular norm M_q[u]/M_0[u]
    and the near-Sigma M_q-mass fraction stabilize (last two levels within
    10%).  ConcentratingSequence: the singular norm grows without
    stabilizing while the near-Sigma mass fraction keeps increasing.
    Anything else is Inconclusive.
    """
    if not spec.normalized:
        raise ValidationError("attainment_diagnostic requires a normalized spec")
    if len(multipliers) < 3:
        raise ValidationError("need at least 3 refinement levels")
    rho_inv_series = []
    mass_series = []
    levels = []
    cap = cfg.R / cap_divisor
    for m in multipliers:
        lcfg = cfg.with_resolution(cfg.n_r * m, cfg.n_z * m)
        grid = build_grid(lcfg)
        forms = assemble_forms(grid, spec)
        r = solve_mu(forms, lam, tol=tol)
        u = r.vector
        mq = float(u @ (forms.M_q @ u))
        m0 = float(u @ (forms.M_0 @ u))
        rho_inv_series.append(mq / m0)
        # nodal attribution of the M_q mass (sums to mq exactly)
        node_mass = u * (forms.M_q @ u)
        inside = forms.node_r < cap
        mass_series.append(float(node_mass[inside].sum() / mq))
        levels.append((lcfg.n_r, lcfg.n_z))

    if _series_stable(rho_inv_series) and _series_stable(mass_series):
        verdict = Verdict.BOUNDED_MINIMIZER
    elif (_series_growing(rho_inv_series)
          and mass_series[-1] > mass_series[0] + 0.01):
        verdict = Verdict.CONCENTRATING_SEQUENCE
    else:
        verdict = Verdict.INCONCLUSIVE
    return AttainmentDiagnostic(
        lam=lam,
        mass_ratio_series=tuple(mass_series),
        rho_inv_norm_series=tuple(rho_inv_series),
        verdict=verdict,
        levels=tuple(levels),
        cap_divisor=cap_divisor,
    )
