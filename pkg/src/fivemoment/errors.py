"""Exception types raised by the five-moment solver."""


class SolverError(Exception):
    """Base class for every error raised by this package."""


class ZeroDensity(SolverError):
    """Moment operations require a nonzero number density M0."""


class NegativeInput(SolverError):
    """A quantity that must be nonnegative (density, temperature) was not."""


class NotRealizable(SolverError):
    """A moment vector left the admissible moment set."""


class ExcludedSet(SolverError):
    """Moment vector lies on the manifold where the two-node Gaussian
    inversion has no solution (zero skewness with super-Gaussian kurtosis)."""


class RootFindFailure(SolverError):
    """The bracketed root search for the shared Gaussian variance failed."""


class InvalidA(SolverError):
    """The Gaussian-closure wave-speed constant must exceed sqrt(3)."""


class NonpositiveTheta(SolverError):
    """BGK relaxation needs a positive temperature to build the Maxwellian."""


class ZeroSpread(SolverError):
    """Interface signal speeds collapsed; no admissible time step exists."""


class CellAvgNotRealizable(SolverError):
    """A cell average handed to the face limiter was not realizable."""


class RealizabilityLost(SolverError):
    """Post-update audit failed; indicates a CFL or limiter bug."""


class UnknownPreset(SolverError):
    """Requested benchmark preset does not exist."""


class LengthMismatch(SolverError):
    """Error norms require fields of equal length."""


class IndivisibleRatio(SolverError):
    """Reference restriction requires the fine grid to tile the coarse one."""


class ParseError(SolverError):
    """Malformed configuration text."""


class ValidationError(SolverError):
    """Configuration violates a solver bound or required setting."""
