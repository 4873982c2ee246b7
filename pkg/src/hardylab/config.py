"""Run configuration: flat INI-style sections with strict key checking.

Sections: [geometry], [weights], [solver], [output].  Unknown sections or
keys are errors (typos must not silently change a run).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ValidationError
from .geometry import Boundary, GeometryConfig, Model
from .weights import EtaKind, WeightFamily, WeightSpec

_GEOMETRY_KEYS = {"dimension", "submanifold_dimension", "model", "tube_radius",
                  "grading", "n_r", "n_z", "boundary"}
_WEIGHTS_KEYS = {"family", "a", "beta", "z0", "q_const", "b_profile",
                 "eta_kind", "eta_profile", "custom_q", "custom_b"}
_SOLVER_KEYS = {"lambda", "tol", "levels", "lambda_from", "lambda_to", "steps",
                "tol_lambda", "gap_tolerance"}
_OUTPUT_KEYS = {"out_dir", "cache_dir"}


@dataclass(frozen=True)
class SolverSettings:
    lam: float = 0.0
    tol: float = 1e-9
    levels: int = 3
    lambda_from: float = -5.0
    lambda_to: float = 5.0
    steps: int = 11
    tol_lambda: float = 0.1
    gap_tolerance: float | None = None

    def multipliers(self):
        return tuple(2**i for i in range(self.levels))


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig
    weights: WeightSpec           # raw, not yet normalized
    solver: SolverSettings = field(default_factory=SolverSettings)
    out_dir: str = "out"
    cache_dir: str | None = None


def _check_keys(parser, section, allowed):
    if not parser.has_section(section):
        return {}
    items = dict(parser.items(section))
    unknown = set(items) - allowed
    if unknown:
        raise ValidationError(
            f"unknown key(s) {sorted(unknown)} in [{section}]; "
            f"allowed: {sorted(allowed)}")
    return items


def _get(items, key, cast, default):
    if key not in items:
        return default
    raw = items[key]
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"cannot parse {key} = {raw!r}: {exc}") from exc


def parse_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise OSError(f"cannot read config file {path}")
    known_sections = {"geometry", "weights", "solver", "output"}
    unknown = set(parser.sections()) - known_sections
    if unknown:
        raise ValidationError(f"unknown section(s) {sorted(unknown)}")

    geo = _check_keys(parser, "geometry", _GEOMETRY_KEYS)
    cfg = GeometryConfig(
        N=_get(geo, "dimension", int, 5),
        k=_get(geo, "submanifold_dimension", int, 1),
        model=Model(_get(geo, "model", str, "reduced")),
        R=_get(geo, "tube_radius", float, 0.25),
        grading_gamma=_get(geo, "grading", float, 2.0),
        n_r=_get(geo, "n_r", int, 32),
        n_z=_get(geo, "n_z", int, 8),
        boundary=Boundary(_get(geo, "boundary", str, "free")),
    )

    wts = _check_keys(parser, "weights", _WEIGHTS_KEYS)
    z0_raw = _get(wts, "z0", str, "0.0")
    z0 = tuple(float(v) for v in z0_raw.split(","))
    if len(z0) == 1 and cfg.k > 1:
        z0 = z0 * cfg.k
    spec = WeightSpec(
        family=WeightFamily(_get(wts, "family", str, "constant")),
        k=cfg.k,
        amplitude=_get(wts, "a", float, 0.5),
        contact_beta=_get(wts, "beta", float, 1.5),
        z0=z0,
        q_const=_get(wts, "q_const", float, 1.0),
        custom_q=_get(wts, "custom_q", str, None) or None,
        custom_b=_get(wts, "b_profile", str,
                      _get(wts, "custom_b", str, None)) or None,
        eta_kind=EtaKind(_get(wts, "eta_kind", str, "rho_squared")),
        eta_profile=_get(wts, "eta_profile", str, None) or None,
    )

    sol = _check_keys(parser, "solver", _SOLVER_KEYS)
    solver = SolverSettings(
        lam=_get(sol, "lambda", float, 0.0),
        tol=_get(sol, "tol", float, 1e-9),
        levels=_get(sol, "levels", int, 3),
        lambda_from=_get(sol, "lambda_from", float, -5.0),
        lambda_to=_get(sol, "lambda_to", float, 5.0),
        steps=_get(sol, "steps", int, 11),
        tol_lambda=_get(sol, "tol_lambda", float, 0.1),
        gap_tolerance=_get(sol, "gap_tolerance", float, None),
    )

    out = _check_keys(parser, "output", _OUTPUT_KEYS)
    return RunConfig(
        geometry=cfg,
        weights=spec,
        solver=solver,
        out_dir=_get(out, "out_dir", str, "out"),
        cache_dir=_get(out, "cache_dir", str, None) or None,
    )
