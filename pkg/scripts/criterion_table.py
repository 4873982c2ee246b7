#!/usr/bin/env python3
"""Attainment-criterion classification table for the SinPower family.

For k = 1 the integral of 1/sqrt(1 - q/b) over the circle converges iff
the contact exponent beta is below 1; the table crosses amplitudes with
exponents and reports the classifier's verdict, basis, and fitted beta.
"""

import argparse
import time

from hardylab import (GeometryConfig, build_grid, classify_criterion,
                      make_sin_family, validate_and_normalize)


def run(betas, amplitudes, z0):
    cfg = GeometryConfig(N=4, k=1, R=0.25, n_r=8, n_z=8)
    grid = build_grid(cfg)
    print(f"{'beta':>6} {'A':>6} {'verdict':>14} {'basis':>14} "
          f"{'beta_hat':>9} {'levels':>7}")
    for beta in betas:
        for A in amplitudes:
            spec = validate_and_normalize(make_sin_family(A, beta, z0), grid)
            rep = classify_criterion(spec)
            bhat = (f"{rep.beta_estimates[0].beta:9.4f}"
                    if rep.beta_estimates else "      n/a")
            print(f"{beta:6.2f} {A:6.2f} {rep.verdict.value:>14} "
                  f"{rep.verdict_basis.value:>14} {bhat} "
                  f"{len(rep.integral_estimates):7d}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--z0", type=float, default=0.3)
    args = ap.parse_args()
    t0 = time.monotonic()
    run(betas=(0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0),
        amplitudes=(0.25, 0.5, 0.9), z0=args.z0)
    print(f"\ntotal {time.monotonic() - t0:.1f}s")
