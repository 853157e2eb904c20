"""Exception hierarchy shared across the package."""


class CmsumError(Exception):
    """Base class for all package-specific errors."""


class DegenerateSum(CmsumError):
    """The counter-monotonic sum is (numerically) constant.

    Raised when the quantile-sum function g carries no essential
    variation, e.g. for two identical uniform marginals where
    g(u) = u + (1 - u) is constant.
    """


class CapExceeded(CmsumError):
    """A configured enumeration cap (atoms, crossings) was exceeded."""


class UnresolvedOscillation(CmsumError):
    """Crossing detection could not stabilise after maximal grid refinement."""


class RangeError(CmsumError):
    """A retention or level lies outside the attainable range of the sum."""


class InsufficientSamples(CmsumError):
    """Too few Monte Carlo samples for the requested empirical estimate."""


class MismatchedTarget(CmsumError):
    """An oracle report was compared against a different target quantity."""
