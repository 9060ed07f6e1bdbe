"""Exception hierarchy shared by all modules."""


class ContractError(ValueError):
    """Input violates a documented precondition."""


class ConfigError(ValueError):
    """Experiment configuration is malformed."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its target accuracy."""


class QuadratureError(NumericalError):
    def __init__(self, message, achieved=None, where=None):
        super().__init__(message)
        self.achieved = achieved
        self.where = where


class StiffnessError(NumericalError):
    def __init__(self, message, t_reached=None):
        super().__init__(message)
        self.t_reached = t_reached
