"""Exception types raised by the numerical layers."""


class RandEntireError(Exception):
    """Base class for numeric failures; the CLI maps these to exit code 3."""


class TruncationFailure(RandEntireError):
    pass


class QuadratureDivergence(RandEntireError):
    pass


class RootFindingFailure(RandEntireError):
    def __init__(self, message, root=None):
        super().__init__(message)
        self.root = root


class CircleRootProximity(RandEntireError):
    pass


class ConfigError(ValueError):
    """Invalid configuration or precondition; the CLI maps this to exit code 2."""
