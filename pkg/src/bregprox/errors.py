"""Exception types shared across the package."""


class BregproxError(Exception):
    """Base class for all package-specific errors."""


class GeometryError(BregproxError, ValueError):
    """Invalid point/tangent data or mismatched manifolds/base points."""


class ZoneError(BregproxError, ValueError):
    """A point lies outside the zone of a Bregman function."""


class ParameterError(BregproxError, ValueError):
    """A numeric parameter violates its contract (e.g. nonpositive weight)."""


class StrategyError(BregproxError, ValueError):
    """Inner-solver strategy incompatible with the problem structure."""


class DivergenceError(BregproxError, RuntimeError):
    """An iteration escaped its configured trust region."""


class ConfigurationError(BregproxError, ValueError):
    """Invalid run configuration (schedules, names, dimensions)."""
