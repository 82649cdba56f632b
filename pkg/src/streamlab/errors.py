"""Exception hierarchy shared by all streamlab modules."""


class StreamlabError(Exception):
    """Base class for every error raised by streamlab."""


class ConfigurationError(StreamlabError, ValueError):
    """Invalid system, cover or analysis configuration."""


class NumericError(StreamlabError, ArithmeticError):
    """A numerical evaluation failed."""


class NonFinite(NumericError):
    """A map evaluation produced inf or nan.

    ``index`` carries the failing orbit index or box position when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class GraphTooLarge(NumericError):
    """The outer approximation would exceed the edge budget."""


class DomainViolation(ConfigurationError):
    pass


class NoCatalogRule(ConfigurationError):
    pass


class TooDeep(ConfigurationError):
    pass


class UnknownId(StreamlabError, KeyError):
    pass


class EmptySelection(ConfigurationError):
    pass


class UnknownNode(StreamlabError, KeyError):
    pass


class CycleDetected(StreamlabError):
    def __init__(self, message, cycle=None):
        super().__init__(message)
        self.cycle = cycle


class Unreachable(StreamlabError):
    pass


class UnsupportedDimension(ConfigurationError):
    pass


class InsufficientSeparation(StreamlabError):
    pass


class TrappingViolation(StreamlabError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ModeUnsupported(StreamlabError):
    pass


class MissingArtifact(StreamlabError):
    pass
