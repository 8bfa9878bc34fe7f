"""Exception hierarchy shared by all flatcore modules."""


class FlatcoreError(Exception):
    """Base class for every error raised by flatcore."""


class ValidationError(FlatcoreError, ValueError):
    """Invalid input or configuration. Carries one message per violation."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ParseError(ValidationError):
    """Configuration text could not be parsed."""


class NumericalError(FlatcoreError, ArithmeticError):
    """A numerical procedure failed to deliver a result."""


class DimensionTooSmall(ValidationError):
    pass


class ZeroField(ValidationError):
    pass


class DisconnectedDomain(ValidationError):
    pass


class NotStarShaped(ValidationError):
    pass


class SupportExceedsDomain(ValidationError):
    pass


class ProbeOutsideDomain(ValidationError):
    pass


class NoRoot(NumericalError):
    """The fibering map t -> E(tu) has no critical point."""


class NoConvergence(NumericalError):
    pass


class MaxIterations(NumericalError):
    pass


class StepFailure(NumericalError):
    pass


class NoEventBeforeRmax(NumericalError):
    pass


class NoSignChange(NumericalError):
    pass


class ToleranceNotMet(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass
