"""Exception hierarchy shared by every module."""


class InvsigError(Exception):
    """Base class for all library errors."""


class DegenerateImage(InvsigError):
    """Raised when an image (or pooled map) is constant and cannot be normalized."""


class DimensionMismatch(InvsigError):
    pass


class MalformedFile(InvsigError):
    pass


class UnsupportedFormat(InvsigError):
    pass


class InvalidElement(InvsigError):
    pass


class OutOfRange(InvsigError):
    pass


class NotAGroup(InvsigError):
    """The transformation set has no composition table (e.g. ScaleSet)."""


class EmptyWindow(InvsigError):
    pass


class EmptyBank(InvsigError):
    pass


class IncompatibleSignatures(InvsigError):
    pass


class LipschitzBudgetExceeded(InvsigError):
    pass


class OrbitsNotDistinct(InvsigError):
    pass


class ConfigError(InvsigError):
    pass


class InsufficientSamples(InvsigError):
    pass
