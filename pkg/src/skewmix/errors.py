"""Exception hierarchy shared by all skewmix modules."""
from __future__ import annotations


class SkewmixError(Exception):
    """Base class for every error raised by this package."""


class NotUnipotentUpperTriangular(SkewmixError):
    """The matrix is not integer, upper triangular with unit diagonal."""


class IdentityMatrixError(SkewmixError):
    """The matrix equals the identity, so the map is a plain rotation."""


class DimensionTooSmall(SkewmixError):
    """The torus dimension is below the supported minimum."""


class DimensionMismatch(SkewmixError):
    """Operands live on tori of different dimensions."""


class IndexOutOfRange(SkewmixError, IndexError):
    """A coordinate or factor index is outside the valid range."""


class NoShearVector(SkewmixError):
    """No integer vector v with v A = v + a e_d, a != 0, exists."""


class SupportExplosion(SkewmixError):
    """A symbolic Birkhoff sum exceeded the frequency-support cap."""


class OrbitNotEscaping(SkewmixError):
    """A frequency orbit could not be certified as exhausted within the
    configured walk bound, so the coboundary criterion is inapplicable."""


class PeriodicOrbit(SkewmixError):
    """A frequency with nonzero fiber component is fixed by the transpose
    action; the orbit never escapes."""


class NotACoboundary(SkewmixError):
    """An orbit obstruction exceeds tolerance; no smooth solution exists."""


class NonPositiveRoof(SkewmixError):
    """The certified minimum of a roof function is not strictly positive."""


class RoofNotFiberConstant(SkewmixError):
    """The roof depends on a coordinate that the requested projection
    suppresses."""


class EmptyCube(SkewmixError):
    """A cube has an empty or degenerate interval."""


class NonIntegerEntry(SkewmixError):
    """A lattice divisibility chain produces a non-integer section matrix."""


class NonTransverseGenerator(SkewmixError):
    """The flow generator has zero leading component, so it never crosses
    the section transversally."""


class NonPositiveRate(SkewmixError):
    """A time-change rate function is not strictly positive at a sampled
    point."""


class AssertionMismatch(SkewmixError):
    """Two independent computations of the same quantity disagree."""
