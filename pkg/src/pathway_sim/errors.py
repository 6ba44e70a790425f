"""Exception hierarchy shared across the simulator."""


class PathwaySimError(Exception):
    """Base class for all library errors."""


class PoolError(PathwaySimError):
    """Raised by pool operations: empty pool, ratio mismatch, insufficient LP."""


class PegModelError(PathwaySimError):
    """Raised by peg models: bad weights, degenerate factor range, missing factor."""


class InterventionError(PathwaySimError):
    """Raised by intervention planning/execution on invalid inputs."""


class StalePlanError(InterventionError):
    """The pool changed between planning and execution."""


class ConfigError(PathwaySimError):
    """A config violates an invariant. Message names the offending field."""


class ConfigParseError(ConfigError):
    """A config file is structurally unreadable (bad JSON/CSV, missing field)."""
