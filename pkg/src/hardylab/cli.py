"""Command-line driver: configuration in, CSV/JSON artifacts + manifest out.

Exit codes: 0 success, 2 validation error, 3 solver non-convergence,
4 I/O error.  All numeric output is serialized with 17 significant digits;
timings live only in the manifest so result payloads are byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import assembly, criterion as criterion_mod, eigensolve, groundstate
from .config import RunConfig, parse_config
from .errors import HardyLabError, SolverError, ValidationError
from .geometry import build_grid
from .manifest import RunManifest
from .threshold import attainment_diagnostic, find_lambda_star
from .weights import validate_and_normalize

json_dump_opts = dict(indent=2, sort_keys=True)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: str, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: str, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, **json_dump_opts)
        fh.write("\n")


class Runner:
    """Shared pipeline state: config, grid, normalized weights, manifest."""

    def __init__(self, rc: RunConfig, command: str):
        self.rc = rc
        self.command = command
        self.t0 = time.monotonic()
        self.timings = {}
        os.makedirs(rc.out_dir, exist_ok=True)
        t = time.monotonic()
        self.grid = build_grid(rc.geometry)
        self.spec = validate_and_normalize(rc.weights, self.grid)
        self.timings["setup_s"] = time.monotonic() - t
        self.manifest = RunManifest(
            command=command,
            config_hash=assembly.config_hash(rc.geometry, self.spec),
            geometry=rc.geometry.as_dict(),
            weights=self.spec.as_dict(),
            normalization={
                "q_scale": self.spec.q_scale,
                "maximizers": [list(m) for m in self.spec.sigma_maximizers],
                "continuum_maximizers": self.spec.continuum_maximizers,
            },
            warnings=list(self.spec.warnings),
        )

    def out_path(self, name: str) -> str:
        return os.path.join(self.rc.out_dir, name)

    def emit(self, name: str, kind: str, payload):
        path = self.out_path(name)
        if kind == "json":
            write_json(path, payload)
        else:
            header, rows = payload
            write_csv(path, header, rows)
        self.manifest.add_output(path)
        return path

    def forms(self):
        t = time.monotonic()
        forms, hit = assembly.assemble_or_load(self.grid, self.spec,
                                               self.rc.cache_dir)
        self.timings["assembly_s"] = time.monotonic() - t
        self.manifest.cache_hit = hit
        return forms

    def finish(self) -> int:
        self.timings["total_s"] = time.monotonic() - self.t0
        self.manifest.timings = self.timings
        self.manifest.write(self.rc.out_dir)
        return 0

    def dump_grid(self):
        g = self.grid
        lumped = np.zeros(g.dof_count)
        contrib = g.weights @ g.ref_shape          # (cells, nloc)
        np.add.at(lumped, g.cell_dofs.ravel(), contrib.ravel())
        k = g.cfg.k
        hdr = ["index", "r"] + [f"z_{a+1}" for a in range(k)] + ["measure_weight"]
        rows = [[i, g.node_r[i]] + list(g.node_z[i]) + [lumped[i]]
                for i in range(g.dof_count)]
        self.emit("grid.csv", "csv", (hdr, rows))


# -- commands ----------------------------------------------------------------

def cmd_validate(run: Runner, args) -> int:
    run.emit("validation.json", "json", {
        "q_scale": run.spec.q_scale,
        "maximizers": [list(m) for m in run.spec.sigma_maximizers],
        "continuum_maximizers": run.spec.continuum_maximizers,
        "warnings": list(run.spec.warnings),
        "normalized": run.spec.normalized,
    })
    return run.finish()


def cmd_assemble(run: Runner, args) -> int:
    forms = run.forms()
    if run.rc.cache_dir:
        assembly.write_forms(forms, run.rc.cache_dir)
    run.emit("assemble.json", "json", {
        "dof_count": forms.dof_count,
        "nnz": int(forms.A_b.nnz),
        "config_hash": forms.config_hash,
        "max_eta_over_q": forms.max_eta_over_q,
        "boundary_dofs": int(len(forms.boundary_active)),
    })
    if args.dump_grid:
        run.dump_grid()
    return run.finish()


def cmd_solve(run: Runner, args) -> int:
    forms = run.forms()
    t = time.monotonic()
    res = eigensolve.solve_mu(forms, run.rc.solver.lam, tol=run.rc.solver.tol)
    run.timings["solve_s"] = time.monotonic() - t
    run.emit("solve.json", "json", {
        "lambda": res.lam, "mu": res.mu, "residual": res.residual,
        "iterations": res.iterations, "converged": res.converged,
    })
    if args.dump_vector:
        rows = [[i, v] for i, v in enumerate(res.vector)]
        run.emit("vector.csv", "csv", (["index", "value"], rows))
    if args.dump_grid:
        run.dump_grid()
    return run.finish()


def cmd_sweep(run: Runner, args) -> int:
    s = run.rc.solver
    lambdas = np.linspace(s.lambda_from, s.lambda_to, s.steps)
    forms = run.forms()
    t = time.monotonic()
    results = eigensolve.sweep(forms, lambdas, tol=s.tol)
    run.timings["sweep_s"] = time.monotonic() - t
    rows = [[r.lam, r.mu, r.residual, r.iterations] for r in results]
    run.emit("sweep.csv", "csv",
             (["lambda", "mu", "residual", "iterations"], rows))
    return run.finish()


def cmd_lambda_star(run: Runner, args) -> int:
    s = run.rc.solver
    t = time.monotonic()
    res = find_lambda_star(run.rc.geometry, run.spec,
                           tol_lambda=s.tol_lambda,
                           multipliers=s.multipliers(), tol=s.tol,
                           gap_tolerance=s.gap_tolerance)
    run.timings["lambda_star_s"] = time.monotonic() - t
    # attainment at the threshold itself is beyond honest mesh resolution;
    # the criterion verdict is reported alongside for inspection
    crit = criterion_mod.classify_criterion(run.spec)
    run.emit("lambda_star.json", "json", {
        "lambda_star": res.lambda_star,
        "bracket": list(res.bracket),
        "gap_tolerance": res.gap_tolerance,
        "hardy_constant": res.hardy_constant,
        "calibration_lambda": res.calibration_lambda,
        "extrapolated_mu": [[l, m] for l, m in res.extrapolated_mu],
        "attainment_at_threshold": {
            "criterion_verdict": crit.verdict.value,
            "criterion_basis": crit.verdict_basis.value,
            "decided_numerically": False,
        },
    })
    rows = [list(r) for r in res.per_mesh_mu]
    run.emit("lambda_star_mesh.csv", "csv",
             (["level", "n_r", "n_z", "lambda", "mu"], rows))
    return run.finish()


def cmd_diagnose(run: Runner, args) -> int:
    s = run.rc.solver
    t = time.monotonic()
    d = attainment_diagnostic(run.rc.geometry, run.spec, s.lam,
                              multipliers=s.multipliers(), tol=s.tol)
    run.timings["diagnose_s"] = time.monotonic() - t
    run.emit("diagnose.json", "json", {
        "lambda": d.lam, "verdict": d.verdict.value,
        "cap_divisor": d.cap_divisor,
        "levels": [list(l) for l in d.levels],
        "rho_inv_norm_series": list(d.rho_inv_norm_series),
        "mass_ratio_series": list(d.mass_ratio_series),
    })
    rows = [[i, d.levels[i][0], d.levels[i][1], d.rho_inv_norm_series[i],
             d.mass_ratio_series[i]] for i in range(len(d.levels))]
    run.emit("diagnose.csv", "csv",
             (["level", "n_r", "n_z", "rho_inv_norm", "mass_ratio"], rows))
    return run.finish()


def cmd_criterion(run: Runner, args) -> int:
    t = time.monotonic()
    rep = criterion_mod.classify_criterion(run.spec)
    run.timings["criterion_s"] = time.monotonic() - t
    run.emit("criterion.json", "json", {
        "verdict": rep.verdict.value,
        "verdict_basis": rep.verdict_basis.value,
        "continuum_maximizers": rep.continuum_maximizers,
        "maximizers": [list(m) for m in rep.maximizers],
        "localization_radius": rep.localization_radius,
        "beta_estimates": [{"maximizer": list(e.maximizer), "beta": e.beta,
                            "fit_residual": e.fit_residual}
                           for e in rep.beta_estimates],
        "notes": list(rep.notes),
    })
    rows = [[i, rep.cap_levels[i], rep.integral_estimates[i]]
            for i in range(len(rep.cap_levels))]
    run.emit("criterion_levels.csv", "csv",
             (["level", "cap_radius", "integral_estimate"], rows))
    return run.finish()


def cmd_verify_expansion(run: Runner, args) -> int:
    t = time.monotonic()
    schedule = groundstate.SampleSchedule()
    summary = {}
    rows = []
    for a in (0.0, -1.0, 0.5):
        params = groundstate.GroundStateParams(a, 0.0, run.spec)
        chk = groundstate.expansion_residual(params, run.rc.geometry, schedule)
        for smp in chk.samples:
            rows.append([a, smp.rho, ";".join(_fmt(v) for v in smp.z),
                         smp.residual, smp.scaled_residual, smp.fd_error])
        summary[f"a={a:g}"] = {
            "slope_fit": list(chk.slope_fit),
            "max_scaled_residual": chk.max_scaled_residual,
            "dropped": chk.dropped,
            "log1_coeff_fit": chk.log1_coeff_fit,
            "log1_reading": chk.log1_reading,
        }
    run.timings["expansion_s"] = time.monotonic() - t
    run.emit("expansion.csv", "csv",
             (["a", "rho", "z", "residual", "scaled_residual", "fd_error"],
              rows))
    run.emit("expansion.json", "json", summary)
    return run.finish()


def cmd_verify_barriers(run: Runner, args) -> int:
    t = time.monotonic()
    lam = run.rc.solver.lam
    rows = []
    summary = {}
    for kind in (groundstate.BarrierKind.SUBSOLUTION_VEPS,
                 groundstate.BarrierKind.SUPERSOLUTION_U):
        rep = groundstate.barrier_check(kind, run.spec, run.rc.geometry, lam)
        for (rv, z, eps, violation, err, val) in rep.samples:
            rows.append([kind.value, eps, lam, rv,
                         ";".join(_fmt(v) for v in z), val, err])
        summary[kind.value] = {
            "r_valid": rep.r_valid,
            "worst_violation": rep.worst_violation,
            "positivity_ok": rep.positivity_ok,
            "tol_fd": rep.tol_fd,
            "epsilons": list(rep.epsilons),
        }
    run.timings["barriers_s"] = time.monotonic() - t
    run.emit("barriers.csv", "csv",
             (["kind", "epsilon", "lambda", "rho", "z", "value", "fd_error"],
              rows))
    run.emit("barriers.json", "json", summary)
    return run.finish()


def cmd_local_hardy(run: Runner, args) -> int:
    forms = run.forms()
    t = time.monotonic()
    res = eigensolve.local_hardy_remainder(forms, tol=run.rc.solver.tol,
                                           return_result=True)
    run.timings["local_hardy_s"] = time.monotonic() - t
    run.emit("local_hardy.json", "json", {
        "c_h": res.mu, "residual": res.residual, "converged": res.converged,
        "hardy_constant": run.rc.geometry.hardy_constant(),
    })
    return run.finish()


def cmd_report(run: Runner, args) -> int:
    out = run.rc.out_dir
    merged = {"command": "report", "sources": []}
    long_rows = []
    for name in sorted(os.listdir(out)):
        path = os.path.join(out, name)
        if name.endswith(".json") and name not in ("manifest.json",
                                                   "report.json"):
            with open(path) as fh:
                merged[name[:-5]] = json.load(fh)
            merged["sources"].append(name)
    sweep_path = os.path.join(out, "sweep.csv")
    if os.path.exists(sweep_path):
        with open(sweep_path) as fh:
            next(fh)
            for line in fh:
                lam, mu, *_ = line.strip().split(",")
                long_rows.append(["mu_lambda", lam, mu])
    diag_path = os.path.join(out, "diagnose.csv")
    if os.path.exists(diag_path):
        with open(diag_path) as fh:
            next(fh)
            for line in fh:
                lvl, _, _, rho_inv, mass = line.strip().split(",")
                long_rows.append(["rho_inv_norm", lvl, rho_inv])
                long_rows.append(["mass_ratio", lvl, mass])
    run.emit("report.json", "json", merged)
    if long_rows:
        run.emit("report_long.csv", "csv",
                 (["series", "x", "y"], long_rows))
    return run.finish()


_COMMANDS = {
    "validate": cmd_validate,
    "assemble": cmd_assemble,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "lambda-star": cmd_lambda_star,
    "diagnose": cmd_diagnose,
    "criterion": cmd_criterion,
    "verify-expansion": cmd_verify_expansion,
    "verify-barriers": cmd_verify_barriers,
    "local-hardy": cmd_local_hardy,
    "report": cmd_report,
}


def build_parser():
    p = argparse.ArgumentParser(prog="hardylab",
                                description="singular Rayleigh quotient lab")
    p.add_argument("command", choices=sorted(_COMMANDS))
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--lambda-from", type=float, default=None)
    p.add_argument("--lambda-to", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--dump-vector", action="store_true")
    p.add_argument("--dump-grid", action="store_true")
    return p


def _apply_overrides(rc: RunConfig, args) -> RunConfig:
    from dataclasses import replace
    sol = rc.solver
    updates = {}
    for src, dst in (("lam", "lam"), ("tol", "tol"), ("levels", "levels"),
                     ("lambda_from", "lambda_from"),
                     ("lambda_to", "lambda_to"), ("steps", "steps")):
        v = getattr(args, src)
        if v is not None:
            updates[dst] = v
    if updates:
        sol = replace(sol, **updates)
    out_dir = args.out_dir if args.out_dir is not None else rc.out_dir
    cache = args.cache_dir if args.cache_dir is not None else rc.cache_dir
    if cache is None:
        cache = os.environ.get("HARDYLAB_CACHE") or None
    return RunConfig(geometry=rc.geometry, weights=rc.weights, solver=sol,
                     out_dir=out_dir, cache_dir=cache)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = _apply_overrides(parse_config(args.config), args)
        run = Runner(rc, args.command)
        return _COMMANDS[args.command](run, args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except HardyLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
