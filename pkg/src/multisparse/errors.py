"""Exception types shared across the package."""


class ContractError(ValueError):
    """Input violates a documented precondition (shape, sign, range)."""


class IllConditionedKernel(ArithmeticError):
    """Covariance factorization failed even after jitter."""

    def __init__(self, msg, hyper=None):
        super().__init__(msg)
        self.hyper = hyper


class DegeneratePseudoSet(IllConditionedKernel):
    """Pseudo-input covariance is singular (typically duplicated locations)."""


class OptimizationFailed(RuntimeError):
    """Hyperparameter optimization produced no finite objective."""

    def __init__(self, msg, last_iterate=None):
        super().__init__(msg)
        self.last_iterate = last_iterate


class SimulationDiverged(RuntimeError):
    def __init__(self, msg, t=None):
        super().__init__(msg)
        self.t = t


class DegenerateFlatness(ValueError):
    """Desired thrust direction is undefined (commanded free fall)."""


class ConfigError(ValueError):
    """Scenario or method configuration is malformed."""
