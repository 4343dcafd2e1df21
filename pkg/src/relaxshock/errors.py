"""Exception types raised across the toolkit.

Every failure mode that callers are expected to branch on gets its own
class; generic misuse raises ValueError/TypeError as usual.
"""


class RelaxShockError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RelaxShockError):
    """Invalid run configuration (bad schema, unknown keys, bad values)."""


class UnknownModel(RelaxShockError):
    """Requested builtin model name does not exist."""


class DomainViolation(RelaxShockError):
    """A state left the model's declared validity box."""


class NoConvergence(RelaxShockError):
    """An iterative solve (Newton, continuation) failed to converge."""


class SingularJacobian(RelaxShockError):
    """A Jacobian required to be invertible is numerically singular."""


class Infeasible(RelaxShockError):
    """A feasibility search (symmetrizer / compensator) found no solution.

    Carries the best margin achieved so callers can report how close the
    search came.
    """

    def __init__(self, message, best_margin=None, best_candidate=None):
        super().__init__(message)
        self.best_margin = best_margin
        self.best_candidate = best_candidate


class SpectralGapViolation(RelaxShockError):
    """The reduced convection matrix lacks the required one-small /
    rest-separated eigenvalue structure."""


class GenuineNonlinearityFailure(RelaxShockError):
    """Directional derivative of the principal characteristic speed
    vanishes or changes sign on the examined range."""


class DimensionMismatch(RelaxShockError):
    """Array shapes inconsistent with the model's (n, r) split."""


class SingularQ2(RelaxShockError):
    """The relaxing source block q2 is numerically singular at a state."""


class LambdaOnQ2Spectrum(RelaxShockError):
    """Requested spectral parameter coincides with an eigenvalue of q2."""


class GridMismatch(RelaxShockError):
    """Field data does not live on the expected profile grid."""


class NoConnection(RelaxShockError):
    """The end-state continuation left the model domain before reaching
    the requested amplitude."""


class LaxViolation(RelaxShockError):
    """Computed end states do not satisfy the compressivity (Lax)
    inequalities for the principal field."""


class NewtonDivergence(RelaxShockError):
    """The profile boundary-value Newton iteration diverged."""


class TruncationTooShort(RelaxShockError):
    """The truncated domain is too short: the profile has not decayed to
    its end states at the boundaries."""


class AlgebraicConstraintSingular(RelaxShockError):
    """The conserved-flux constraint cannot be inverted for the remaining
    profile unknowns; signals a characteristic / subshock regime."""


class RankChange(RelaxShockError):
    """The flux Jacobian changes rank (or kernel) along the profile, so
    the constant-rank elimination does not apply."""


class AlgebraicBlockSingular(RelaxShockError):
    """The algebraic block of the eliminated eigenvalue system is singular
    for the requested spectral parameter."""


class StiffnessFailure(RelaxShockError):
    """Evans integration could not meet its tolerance."""


class EssentialSpectrumHit(RelaxShockError):
    """A contour point is too close to the essential spectrum of the
    end-state symbols."""


class PhaseJump(RelaxShockError):
    """Adaptive contour refinement hit its cap with a phase increment
    still larger than pi/2; the contour likely passes near a zero."""


class NotDecayed(RelaxShockError):
    """A test field does not decay at the ends of the grid, so integrated
    quantities are not trustworthy."""


class EigenframeDiscontinuity(RelaxShockError):
    """Continuous eigenvector tracking failed (overlap below threshold)."""


class GapViolation(RelaxShockError):
    """Spectral gap required by the block diagonalizer is not met."""


class MepsTooLarge(RelaxShockError):
    """Goodman weight exponent M * int|W'|/c is too large for the weights
    to stay O(1)."""


class KeySignViolation(RelaxShockError):
    """The drive term d(alpha_0)/dx fails to be negative against |W'|;
    indicates wrong shock orientation or failure of compressivity."""
