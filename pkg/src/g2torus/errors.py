"""Exception types shared across the package."""


class G2TorusError(Exception):
    """Base class for all errors raised by g2torus."""


class GridMismatch(G2TorusError, ValueError):
    """Two profiles living on different grids were combined."""


class NotZeroMean(G2TorusError, ValueError):
    """A tangent profile (or antiderivative input) has non-zero mean."""


class PositivityLost(G2TorusError, ArithmeticError):
    """A density profile dropped below the positivity floor."""


class DegreeError(G2TorusError, ValueError):
    """Form degrees are incompatible for the requested operation."""


class ShockDetected(G2TorusError, ArithmeticError):
    """Characteristics of the Burgers velocity cross before the final time."""

    def __init__(self, message, shock_time=None, margin=None):
        super().__init__(message)
        self.shock_time = shock_time
        self.margin = margin


class MassMismatch(G2TorusError, ValueError):
    """Boundary densities do not carry the same total mass."""


class DegenerateDensity(G2TorusError, ValueError):
    """A boundary density falls below the positivity floor."""


class NoRotation(G2TorusError, ValueError):
    """Two densities are not related by a rigid rotation of the circle."""


class StiffnessAbort(G2TorusError, ArithmeticError):
    """The adaptive time step underflowed."""


class NotPositiveDefinite(G2TorusError, ValueError):
    """A pointwise matrix field is not symmetric positive-definite."""


class BudgetExhausted(G2TorusError, RuntimeError):
    """A search ran out of iterations; ``report`` carries the best-so-far."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
