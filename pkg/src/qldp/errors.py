"""Exception types shared across the package."""


class QldpError(Exception):
    """Base class for package-specific failures."""


class InvalidSpec(QldpError):
    """An environment or model specification violates its invariants."""


class OutOfHorizon(QldpError):
    """A trajectory position beyond the realized horizon was requested."""


class DimensionMismatch(QldpError):
    """Reward / tilt vectors with inconsistent dimensions."""


class TooLarge(QldpError):
    """Problem size exceeds the guard of an enumeration-based routine."""


class OffLattice(QldpError):
    """A reward atom does not sit on the requested lattice."""


class MemoryCap(QldpError):
    """An exact computation would exceed the configured memory budget."""


class AllMinusInfinity(QldpError):
    """Every partition value along the probe schedule vanished."""


class NotPeriodic(QldpError):
    """An exact corrector computation was requested for a non-periodic environment."""


class Diverged(QldpError):
    """The corrector objective is unbounded below."""


class BracketFailure(QldpError):
    """Root bracketing failed within the configured expansion range."""


class NonConvexCurve(QldpError):
    """A stored cumulant curve fails the midpoint convexity check."""


class InvalidRho(QldpError):
    """An intensity outside (0, 1) was supplied."""


class CapExceeded(QldpError):
    """A builder cap (truncation mass, excursion dimension) was exceeded."""


class TooManyStates(QldpError):
    """The chain alphabet is larger than the exact-enumeration cap."""
