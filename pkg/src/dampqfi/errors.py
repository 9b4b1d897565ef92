"""Exception hierarchy shared by every module.

Numerical failures derive from :class:`NumericalError` so the CLI can map
them to a single exit code; configuration problems derive from
:class:`ConfigError`.
"""


class DampQfiError(Exception):
    """Base class for all package errors."""


class ConfigError(DampQfiError, ValueError):
    """Bad user configuration (unknown key, value out of range)."""


class NumericalError(DampQfiError, ArithmeticError):
    """A computation could not produce a trustworthy number."""


class InvalidDimensionError(ConfigError):
    pass


class PreconditionError(DampQfiError, ValueError):
    pass


class TruncationTooSmallError(NumericalError):
    pass


class NotPSDError(NumericalError):
    pass


class CorruptStateError(NumericalError):
    pass


class StepSizeError(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class InfeasibleError(NumericalError):
    def __init__(self, msg, min_d=None):
        super().__init__(msg)
        self.min_d = min_d


class UnboundedVarianceError(NumericalError):
    """Fisher information is zero, so no finite variance bound exists."""


class DegenerateCandidatesError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class RenormalizationError(NumericalError):
    pass
