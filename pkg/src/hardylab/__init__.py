"""hardylab: numerical laboratory for singular Rayleigh quotients.

Weighted quotients of the form

    (int b |grad u|^2 - lam int eta rho^-2 u^2) / (int q rho^-2 u^2)

on a flat torus with a coordinate-subtorus singular set: assembly and
eigensolves, threshold location in lam, attainment diagnostics, ground
state expansion and barrier verification, and the contact-exponent
criterion for attainment at the threshold.
"""

from .geometry import (Boundary, FermiPoint, GeometryConfig, Grid, Model,
                       build_grid, project_sigma, rho, sphere_area)
from .weights import (EtaKind, WeightFamily, WeightSpec, eval_weights,
                      make_sin_family, validate_and_normalize)
from .assembly import QuadraticForms, assemble_forms, config_hash, quotient
from .eigensolve import (EigenResult, extrapolate, local_hardy_remainder,
                         solve_mu, sweep)
from .groundstate import (BarrierKind, BarrierReport, ExpansionCheck,
                          GroundStateParams, SampleSchedule, alpha,
                          apply_L_lambda, apply_operator,
                          barrier_check, barrier_integral_bound, eval_v,
                          expansion_residual, make_v_callable, radial_oracle)
from .threshold import (AttainmentDiagnostic, ThresholdResult, Verdict,
                        attainment_diagnostic, extrapolated_mu_levels,
                        find_lambda_star)
from .criterion import (BetaEstimate, CriterionReport, CriterionVerdict,
                        VerdictBasis, classify_criterion, estimate_exponents,
                        find_maximizers)

__version__ = "0.1.0"
