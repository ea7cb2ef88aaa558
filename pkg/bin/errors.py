"""Exceptions raised by the sphereval modules."""


class SpherevalError(Exception):
    """Base class for every failure raised on purpose by this package."""


class UnsupportedScheme(SpherevalError, ValueError):
    """The (scheme, dimension) pair has no quadrature implementation."""


class UnsupportedDimension(SpherevalError, ValueError):
    """The operation is only implemented in some ambient dimensions."""


class NonFiniteValue(SpherevalError, ArithmeticError):
    """An integrand produced NaN or infinity at a quadrature node."""


class TieAtNode(SpherevalError):
    """A gradient was requested on a nonsmooth seam of a field."""


class NotSmooth(SpherevalError):
    """Second derivatives were requested from a field containing lattice nodes."""


class DimensionMismatch(SpherevalError, ValueError):
    """Fields, vectors or matrices of different ambient dimensions were combined."""


class SingularMatrix(SpherevalError, ValueError):
    """A non-invertible matrix was passed to the GL action."""


class HullFailure(SpherevalError):
    """Qhull could not build the convex hull of the given vertices."""


class NoRoot(SpherevalError):
    """Bisection found no sign change on the search interval."""


class EmptyPacking(SpherevalError):
    """The cap packing has no points at the requested spacing."""


class InputSpecError(SpherevalError, ValueError):
    """A JSON input or grid spec string could not be parsed."""
