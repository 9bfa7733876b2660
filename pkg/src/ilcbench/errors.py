"""Exception types raised across the package."""


class IlcError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(IlcError, ValueError):
    pass


class IncompatibleSignalsError(IlcError, ValueError):
    """Sample times or lengths of combined signals do not match."""


class SimulationOverflowError(IlcError, ArithmeticError):
    def __init__(self, message, index, iteration=None):
        super().__init__(message)
        self.index = index
        self.iteration = iteration


class FrequencyRangeError(IlcError, ValueError):
    pass


class AliasingError(IlcError, ValueError):
    pass


class InstabilityError(IlcError, ValueError):
    def __init__(self, message, roots):
        super().__init__(message)
        self.roots = roots


class InversionSingularityError(IlcError, ValueError):
    pass


class PreviewBudgetError(IlcError, ValueError):
    def __init__(self, message, required):
        super().__init__(message)
        self.required = required


class InfeasibleDesignError(IlcError, ValueError):
    def __init__(self, message, worst_frequency):
        super().__init__(message)
        self.worst_frequency = worst_frequency


class FixedPointUndefinedError(IlcError, ValueError):
    pass


class SingularUpdateError(IlcError, ValueError):
    pass


class DimensionError(IlcError, ValueError):
    pass


class ConfigError(IlcError, ValueError):
    """Configuration could not be parsed or validated.

    ``violations`` lists every problem found, not only the first one.
    """

    def __init__(self, message, violations=None, line=None, column=None):
        super().__init__(message)
        self.violations = list(violations or [])
        self.line = line
        self.column = column
