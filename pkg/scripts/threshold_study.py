#!/usr/bin/env python3
"""Threshold study: locate lambda*, sweep the quotient through it, diagnose.

Uses the free tube as the compact model with b = q == 1 and eta = rho^2.
Prints the bracket, the extrapolated mu values around it, and the
refinement-trend attainment diagnostics on both sides.
"""

import argparse
import time

import numpy as np

from hardylab import (GeometryConfig, Model, WeightFamily, WeightSpec,
                      EtaKind, attainment_diagnostic, build_grid,
                      extrapolated_mu_levels, find_lambda_star,
                      validate_and_normalize)


def run(R, n_r, n_z, tol_lambda):
    cfg = GeometryConfig(N=5, k=1, model=Model.REDUCED, R=R,
                         grading_gamma=2.0, n_r=n_r, n_z=n_z)
    grid = build_grid(cfg)
    spec = validate_and_normalize(
        WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                   eta_kind=EtaKind.RHO_SQUARED), grid)
    res = find_lambda_star(cfg, spec, tol_lambda=tol_lambda)
    lo, hi = res.bracket
    print(f"hardy constant      : {res.hardy_constant}")
    print(f"gap tolerance       : {res.gap_tolerance:.4f} "
          f"(calibrated at lambda={res.calibration_lambda:g})")
    print(f"bracket             : [{lo:.4f}, {hi:.4f}]  width "
          f"{hi - lo:.4f}")
    print(f"lambda*             : {res.lambda_star:.4f}")

    print("\nextrapolated mu through the crossing:")
    for lam in np.linspace(lo - 4.0, hi + 4.0, 9):
        mu = extrapolated_mu_levels(cfg, spec, float(lam))
        print(f"  lambda={lam:9.4f}  mu={mu:.6f}")

    dcfg = GeometryConfig(N=5, k=1, model=Model.REDUCED, R=R,
                          grading_gamma=1.0, n_r=12, n_z=4)
    for lam, side in ((hi + 1.0, "supercritical"), (lo - 1.0, "subcritical")):
        d = attainment_diagnostic(dcfg, spec, lam)
        print(f"\n{side} (lambda={lam:.3f}): verdict {d.verdict.value}")
        print(f"  rho_inv_norm per level : "
              + " ".join(f"{v:.4f}" for v in d.rho_inv_norm_series))
        print(f"  near-Sigma mass ratio  : "
              + " ".join(f"{v:.4f}" for v in d.mass_ratio_series))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--R", type=float, default=0.5)
    ap.add_argument("--n-r", type=int, default=32)
    ap.add_argument("--n-z", type=int, default=4)
    ap.add_argument("--tol-lambda", type=float, default=0.1)
    args = ap.parse_args()
    t0 = time.monotonic()
    run(args.R, args.n_r, args.n_z, args.tol_lambda)
    print(f"\ntotal {time.monotonic() - t0:.1f}s")
