"""Exception types shared across the package."""


class SmoothLipError(Exception):
    """Base class for all package errors."""


class DomainError(SmoothLipError):
    """Coordinates outside a model's valid coordinate domain."""


class OutOfChartError(SmoothLipError):
    """Tangent vector or point outside a chart's 3-delta ball."""


class OutOfDomainError(SmoothLipError):
    """Query point outside a grid's hull."""


class CoverFailureError(SmoothLipError):
    """Oscillation conditions forced a chart radius below the floor."""


class PartitionCoverageError(SmoothLipError):
    """A point of the region is not covered by any chart plateau."""


class ExtensionError(SmoothLipError):
    """McShane precondition violated; carries the offending node pair."""


class MarginError(SmoothLipError):
    """Mollifier radius does not fit in the available grid padding."""


class ParameterError(SmoothLipError):
    """Invalid scalar parameter (lambda/mu ordering, eps range, ...)."""


class EstimationError(SmoothLipError):
    """Lipschitz estimation impossible (all sampled pairs degenerate)."""


class PipelineError(SmoothLipError):
    """A per-chart stage missed its budget; names chart and stage."""

    def __init__(self, chart: int, stage: str, message: str):
        self.chart = chart
        self.stage = stage
        super().__init__(f"chart {chart}, stage {stage}: {message}")


class SearchError(SmoothLipError):
    """Perturbation search did not terminate within the iteration cap."""

    def __init__(self, message: str, best_margin: float):
        self.best_margin = best_margin
        super().__init__(message)


class BumpabilityError(SmoothLipError):
    """No admissible cutoff parameter for the requested gradient bound."""


class ConfigError(SmoothLipError):
    """Scenario configuration failed to parse or validate."""
