"""Exception hierarchy shared by every geopid module."""


class GeoPidError(Exception):
    """Base class for all errors raised by geopid."""


class StructuralError(GeoPidError, ValueError):
    """Dimension or topology mismatch between objects that must agree."""


class ParameterError(GeoPidError, ValueError):
    """A numeric parameter lies outside its admissible range."""


class DegenerateMetric(GeoPidError):
    """The metric cannot be inverted where an inverse is required."""


class DegenerateConstraint(GeoPidError):
    """The distribution basis is rank deficient or its Gram matrix is ill-conditioned."""


class ConstraintViolation(GeoPidError):
    """A velocity that should lie in the distribution does not.

    Attributes
    ----------
    residual : float
        Norm of the out-of-distribution component that triggered the error.
    """

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class NonFiniteState(GeoPidError, FloatingPointError):
    """Integration produced an inf or nan state component."""


class EmptyRegion(GeoPidError, ValueError):
    """A sampling region contains no usable sample points."""


class Unsupported(GeoPidError, NotImplementedError):
    """Requested operation is not available for this system."""
