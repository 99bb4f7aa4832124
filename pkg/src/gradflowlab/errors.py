"""Exception types shared across the package."""


class GradFlowError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(GradFlowError):
    """Vector arguments with incompatible dimensions."""


class NegativeRate(GradFlowError):
    """Scalar dissipation potentials are defined for nonnegative rates only."""


class NotConvex(GradFlowError):
    """A tabulated potential failed the midpoint convexity check."""


class ConjugateDiverged(GradFlowError):
    """Numeric conjugation exceeded the divergence ceiling (missing superlinearity)."""


class SingularOnsager(GradFlowError):
    """Dual evaluation requested for a singular Onsager metric."""


class OutsideDomain(GradFlowError):
    """State outside the domain of the energy functional."""


class UnknownLambda(GradFlowError):
    """A diagnostic requiring a convexity modulus was called with lambda unknown."""


class MissingForces(GradFlowError):
    """Trajectory carries no forces and the energy has no usable selector."""


class SlopeUnavailable(GradFlowError):
    """Metric slope cannot be computed along the requested path."""


class InnerSolveFailed(GradFlowError):
    """No multi-start of the incremental minimization converged."""


class InfeasibleStart(GradFlowError):
    """All candidate starts lie outside the energy domain."""


class NonfiniteObjective(GradFlowError):
    """Incremental objective evaluated to NaN."""


class OutOfRange(GradFlowError):
    """Time outside the trajectory span."""


class GridMismatch(GradFlowError):
    """Two trajectories do not share a time grid."""


class CellSolveFailed(GradFlowError):
    """The oscillation cell problem did not converge."""


class NonpositiveArgument(GradFlowError):
    """Logarithmic mean requires strictly positive arguments."""


class NonpositiveConcentration(GradFlowError):
    """Reaction-network states must be componentwise positive."""


class MassNotNormalized(GradFlowError):
    """Density masses must sum to one."""


class NegativeDensity(GradFlowError):
    """Densities must be nonnegative."""


class OriginSample(GradFlowError):
    """Polar-coordinate checks cannot be sampled at the origin."""


class ValidationError(GradFlowError):
    """Scenario file is syntactically valid but semantically wrong."""


class ParseError(GradFlowError):
    """Scenario file could not be parsed."""
