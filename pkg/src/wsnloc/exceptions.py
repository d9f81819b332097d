"""Exception hierarchy shared by every module."""


class LocalizationError(Exception):
    """Base class for all errors raised by wsnloc."""


class InvalidConfigError(LocalizationError, ValueError):
    pass


class ContractError(LocalizationError, ValueError):
    """A caller violated an operation's precondition (shape, count, ...)."""


class DomainError(LocalizationError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class NodeNotFoundError(LocalizationError, KeyError):
    pass


class UnderdeterminedError(LocalizationError):
    """Too few references to fix a position."""


class RankDeficiencyError(LocalizationError):
    """References are collinear/coplanar so the linear system is singular."""


class CalibrationError(LocalizationError):
    pass


class NoEstimateError(LocalizationError):
    pass


class DegenerateUpdateError(LocalizationError):
    """Every particle received zero likelihood."""


class NumericalError(LocalizationError, ArithmeticError):
    pass


class ScenarioError(InvalidConfigError):
    """Scenario file failed to parse or validate.

    ``line`` is the 1-based line number of the offending key when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
