"""Exception types raised across the toolkit."""


class CsdynError(Exception):
    """Base class for all structured errors."""


class DimensionMismatchError(CsdynError):
    pass


class DegenerateFormError(CsdynError):
    pass


class OpenLoopError(CsdynError):
    pass


class UnknownModelError(CsdynError):
    pass


class ParamError(CsdynError):
    pass


class KindError(CsdynError):
    """A map operation was applied to a flow model or vice versa."""


class PoisonedStateError(CsdynError):
    """NaN/inf produced by a field evaluation; carries the offending state."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class BlowUpError(CsdynError):
    """An operation that needs a finite orbit hit a blow-up."""

    def __init__(self, message, t_escape=None):
        super().__init__(message)
        self.t_escape = t_escape


class ConvergenceError(CsdynError):
    pass


class SectionError(CsdynError):
    pass


class NonHyperbolicError(CsdynError):
    pass


class UnsupportedContactError(CsdynError):
    pass


class StructureError(CsdynError):
    """A model lacks the structure (H, lambda, eta, ...) an operation needs."""


class ConfigError(CsdynError):
    """Invalid run configuration; carries file/line context when known."""

    def __init__(self, message, line=None, key=None):
        super().__init__(message)
        self.line = line
        self.key = key
