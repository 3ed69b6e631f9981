"""Exception hierarchy.

The CLI maps :class:`InputError` subclasses to exit code 2 and
:class:`ConvergenceError` subclasses to exit code 3.
"""


class TropmaError(Exception):
    pass


class InputError(TropmaError, ValueError):
    """Bad user data: malformed files, invalid parameters."""


class DegenerateLatticeError(InputError):
    pass


class AmplenessError(InputError):
    """The bilinear form is not positive definite."""


class StrictConvexityError(InputError):
    """A Green function is not strictly convex on the sample grid."""


class DensityRangeError(InputError):
    pass


class ConvergenceError(TropmaError):
    """A numerical procedure did not reach its target."""


class NonConvergenceError(ConvergenceError):
    def __init__(self, message: str, last_residual: float):
        super().__init__(message)
        self.last_residual = last_residual


class StepFailureError(ConvergenceError):
    pass


class RefineGridError(ConvergenceError):
    pass


class RefineNError(ConvergenceError):
    """The requested subdivision is too coarse for the requested check."""


class DegeneratePolytopeError(TropmaError):
    """A dual polytope is not full-dimensional."""


class ConstructionError(TropmaError):
    """An invariant that holds by theorem failed: this is a bug."""
