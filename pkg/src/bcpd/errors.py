"""Exception hierarchy shared by all analysis modules."""


class BcpdError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(BcpdError):
    """Bad user input: wrong dimensions, malformed map files, unknown keys."""


class ContinuityError(ConfigurationError):
    """The two half-maps disagree on the switching manifold."""

    def __init__(self, monomials):
        self.monomials = list(monomials)
        super().__init__(
            "half-maps are not continuous across s = 0; offending monomials: "
            + ", ".join(self.monomials)
        )


class DegeneracyError(BcpdError):
    """A non-degeneracy condition required by the analysis fails."""


class SingularityMissing(DegeneracyError):
    """The left half-map does not have multiplier -1 at the origin."""


class DegenerateUnfolding(DegeneracyError):
    """The parameters fail to unfold the codimension-two point."""


class SingularLinearization(DegeneracyError):
    """1 is an eigenvalue of the linear part, so the fixed point is not isolated."""


class ResonantMonomial(DegeneracyError):
    """A homological equation in the center-manifold expansion is singular."""


class ZeroSign(DegeneracyError):
    """A sign formula vanishes within tolerance."""


class NumericalError(BcpdError):
    """A numerical procedure failed."""


class NoConvergence(NumericalError):
    """Newton iteration did not reach the residual tolerance."""


class WrongItinerary(NumericalError):
    """A converged orbit does not follow the requested sign sequence."""


class Escaped(NumericalError):
    """An orbit left the escape radius."""


class CostGuard(ConfigurationError):
    """The requested enumeration is too expensive."""


class PreconditionsNotMet(BcpdError):
    """Inputs lie outside the region where a construction applies."""

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("preconditions not met: " + "; ".join(self.failed))


class InvarianceFailed(NumericalError):
    """A sampled point escapes the candidate trapping interval."""

    def __init__(self, x, image, interval):
        self.x = x
        self.image = image
        self.interval = interval
        super().__init__(
            f"f^2({x:.6g}) = {image:.6g} is not inside ({interval[0]:.6g}, {interval[1]:.6g})"
        )


class SeedInvalid(NumericalError):
    """A continuation seed does not satisfy its defining system."""


class StepFailure(NumericalError):
    """Continuation step size fell below the minimum."""
