"""Exception hierarchy. Each family maps onto one CLI exit code."""


class CVGADError(Exception):
    exit_code = 1


class ConfigError(CVGADError, ValueError):
    exit_code = 2


class DataError(CVGADError):
    exit_code = 3


class LoadError(DataError, OSError):
    pass


class MalformedBundleError(DataError, ValueError):
    pass


class GraphValidationError(DataError, ValueError):
    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        msg = f"invariant violated: {invariant}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ConsistencyError(DataError, RuntimeError):
    """Raised when bookkeeping disagrees with the graph (e.g. removing an absent edge)."""


class DegenerateBatchError(ConfigError):
    pass


class UndefinedMetricError(ValueError):
    pass


class DivergenceError(CVGADError, FloatingPointError):
    exit_code = 4
