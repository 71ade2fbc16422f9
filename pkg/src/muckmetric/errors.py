"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class RangeError(ParameterError):
    """A numeric argument lies outside its admissible range."""


class ConfigError(ValueError):
    """A config file or flag set cannot be parsed into a valid run config."""


class FitError(RuntimeError):
    """Not enough usable data points for a regression."""


class SearchError(RuntimeError):
    """A search over a weight family found no feasible member."""


class PlotError(ValueError):
    """Data cannot be rendered with the requested axes (e.g. log of <= 0)."""
