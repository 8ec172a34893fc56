"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SaddleflowError(Exception):
    exit_code = 1


class InvalidInput(SaddleflowError, ValueError):
    exit_code = 2


class ZeroRow(InvalidInput):
    pass


class NegativePrimal(InvalidInput):
    pass


class BoundedFeasibleSet(InvalidInput):
    """The no-ISS construction needs an unbounded feasible set."""


class NumericalFailure(SaddleflowError):
    exit_code = 3


class NonFinite(NumericalFailure):
    pass


class BudgetExceeded(NumericalFailure):
    pass


class Infeasible(SaddleflowError):
    exit_code = 4


class Unbounded(SaddleflowError):
    exit_code = 4


class UnboundedSolutionSet(SaddleflowError):
    exit_code = 4
