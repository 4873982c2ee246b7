#!/usr/bin/env python3
"""Sharp-constant refinement study on the flat tube model.

For b = q == 1 and eta = rho^2 the quotient's infimum over functions
decaying at infinity equals ((N-k-2)/2)^2.  On the Dirichlet tube the
discrete minimum converges to that constant from above through slowly
spreading minimizers; with the free boundary at lambda = -10, the constant
test function caps the quotient at |lambda| R^2 / 2 instead, which is the
reason the two variants are both interesting to look at side by side.
"""

import argparse
import time

from hardylab import (Boundary, GeometryConfig, Model, WeightFamily,
                      WeightSpec, EtaKind, assemble_forms, build_grid,
                      extrapolate, solve_mu, validate_and_normalize)


def run(N, k, R, lam, gammas, sizes, n_z):
    raw = WeightSpec(family=WeightFamily.CONSTANT, q_const=1.0,
                     eta_kind=EtaKind.RHO_SQUARED)
    C = GeometryConfig(N=N, k=k).hardy_constant()
    print(f"N={N} k={k} R={R} lambda={lam}   target constant C={C}")
    for boundary in (Boundary.DIRICHLET, Boundary.FREE):
        print(f"\n-- boundary: {boundary.value}")
        print(f"{'gamma':>6} " + " ".join(f"{f'n_r={n}':>12}" for n in sizes)
              + f" {'extrapolated':>14} {'order':>7}")
        for gamma in gammas:
            mus = []
            for n_r in sizes:
                cfg = GeometryConfig(N=N, k=k, model=Model.REDUCED, R=R,
                                     grading_gamma=gamma, n_r=n_r, n_z=n_z,
                                     boundary=boundary)
                grid = build_grid(cfg)
                spec = validate_and_normalize(raw, grid)
                mus.append(solve_mu(assemble_forms(grid, spec), lam,
                                    tol=1e-9).mu)
            lim, order = extrapolate(mus)
            cells = " ".join(f"{m:12.6f}" for m in mus)
            print(f"{gamma:6.1f} {cells} {lim:14.6f} "
                  f"{order if order is None else f'{order:7.2f}'}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=5)
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--R", type=float, default=0.25)
    ap.add_argument("--lam", type=float, default=-10.0)
    ap.add_argument("--n-z", type=int, default=8)
    args = ap.parse_args()
    t0 = time.monotonic()
    run(args.N, args.k, args.R, args.lam,
        gammas=(2.0, 3.0, 4.0, 5.0), sizes=(64, 128, 256), n_z=args.n_z)
    print(f"\ntotal {time.monotonic() - t0:.1f}s")
