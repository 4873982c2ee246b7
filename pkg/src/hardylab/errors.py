"""Exception taxonomy for hardylab.

Every failure mode that callers are expected to branch on gets its own
class; the CLI maps these onto exit codes (validation -> 2, solver -> 3,
io -> 4).
"""


class HardyLabError(Exception):
    """Base class for all hardylab errors."""


class ValidationError(HardyLabError):
    """Bad configuration or weight data; CLI exit code 2."""


class SolverError(HardyLabError):
    """Numerical solver failure; CLI exit code 3."""


# -- geometry ---------------------------------------------------------------

class OutsideTube(ValidationError):
    """Point has rho >= tube radius, projection is not defined."""


class DegenerateGrid(ValidationError):
    """Grid resolution below the minimum (n_r < 4 or n_z < 4)."""


# -- weights ----------------------------------------------------------------

class NonPositiveWeight(ValidationError):
    """b or q fails strict positivity at a sampled point."""


class EtaNegative(ValidationError):
    """eta takes a negative value at a sampled point."""


class EtaNotVanishing(ValidationError):
    """inf over the tangential sample of eta exceeds tolerance."""


class EtaNotLipschitz(ValidationError):
    """Sampled difference quotient eta/rho is unbounded."""


class NotNormalized(ValidationError):
    """Weight evaluation requested before the normalization pass."""


class BadParams(ValidationError):
    """Weight family parameters outside their admissible range."""


# -- ground states ----------------------------------------------------------

class NegativeRadicand(ValidationError):
    """1 - q/b + rho < 0; signals an unnormalized weight spec."""


class OutOfDomain(ValidationError):
    """Ground-state evaluation outside rho in (0, 1)."""


class StepTooLarge(ValidationError):
    """Finite-difference step exceeds rho/4 at the sample point."""


class FDUnstable(SolverError):
    """Finite-difference noise exceeds the signal being measured."""


class NoValidRadius(SolverError):
    """Barrier sign condition fails even at the smallest sampled rho."""


# -- assembly / eigensolve --------------------------------------------------

class SingularMass(SolverError):
    """A quadrature point landed on the singular set (must not happen)."""


class ZeroDenominator(ValidationError):
    """Rayleigh quotient evaluated on a vector with M_q[u] = 0."""


class NotConverged(SolverError):
    """Eigensolver exceeded max iterations; best iterate is attached."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InnerSolveBreakdown(SolverError):
    """Sparse factorization or inner linear solve failed."""


# -- threshold / criterion --------------------------------------------------

class NoBracket(SolverError):
    """Threshold predicate constant over |lambda| <= 1e6; no crossing."""


class NonIsolatedMaximizers(ValidationError):
    """Maximizers of q/b too close together for a local analysis."""


class PoorFit(SolverError):
    """Contact-exponent regression residual too large to trust."""
