"""Exception hierarchy shared by all cqg modules."""


class CQGError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CQGError, ValueError):
    """A point or stencil falls outside the coordinate ranges of a chart."""


class DegenerateChartError(CQGError, ValueError):
    """The metric is singular (or numerically so) at the evaluation point."""


class CoordinateSingularityError(CQGError, ValueError):
    """Evaluation too close to a coordinate singularity (beta near 0 or pi)."""


class UnsupportedDimensionError(CQGError, ValueError):
    pass


class NodeError(CQGError, ValueError):
    """The wavefunction or density vanishes, so phase/log quantities are undefined."""


class PoleError(NodeError):
    """A closed-form curvature diverges at the requested configuration."""


class InvalidGaugeError(CQGError, ValueError):
    pass


class InvalidSurfaceError(CQGError, ValueError):
    pass


class ChartExitError(DomainError):
    """A trajectory left the chart through a non-periodic coordinate.

    The partially integrated path is attached as ``path``.
    """

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class QuadratureError(CQGError, ArithmeticError):
    """Non-finite integrand value; ``node`` holds the offending coordinates."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class QuadratureOrderError(CQGError, ValueError):
    pass


class ValidationError(CQGError, ValueError):
    pass


class ConsistencyError(CQGError, RuntimeError):
    """Internal invariant violated (e.g. a Monte Carlo run with zero total weight)."""


class ConfigError(CQGError, ValueError):
    pass
