"""Exception hierarchy shared by all modules."""


class OtfsRaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(OtfsRaError, ValueError):
    pass


class Infeasible(OtfsRaError):
    """A requested configuration cannot be realized (grid, Doppler, target)."""


class BudgetInfeasible(Infeasible):
    pass


class DopplerInfeasible(Infeasible):
    pass


class ScenarioInfeasible(Infeasible):
    pass


class ModelDomainError(OtfsRaError, ValueError):
    """Inputs fall outside the region where the signal model is valid."""


class NumericError(OtfsRaError, ArithmeticError):
    pass


class InsufficientFrames(InvalidParameter):
    pass
