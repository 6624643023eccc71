"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or parameter combination."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class CoverageError(ValueError):
    """A sampled ROI point is not detection-covered by any sensor."""

    def __init__(self, point):
        self.point = tuple(float(v) for v in point)
        super().__init__(
            f"coverage violation: point ({self.point[0]:.6g}, {self.point[1]:.6g}) "
            "is not within the detection range of any sensor"
        )


class UnsupportedModelError(ValueError):
    """Operation requested for a sensing model it does not support."""


class EstimationError(RuntimeError):
    """A Monte Carlo estimate could not be produced (e.g. every run censored)."""


class BoundNotApplicable(ValueError):
    """An analytic bound cannot deliver the requested guarantee (e.g. non-positive exponent)."""
