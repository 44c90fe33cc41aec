"""Exception types shared across the package."""


class PanelError(Exception):
    """Base class for all errors raised by panelopt."""


class InvalidGeometry(PanelError):
    pass


class MalformedFile(PanelError):
    pass


class EndpointSingularity(PanelError):
    pass


class SingularSystem(PanelError):
    pass


class NoStagnationPoint(PanelError):
    pass


class DegenerateDistribution(PanelError):
    pass


class ShapeMismatch(PanelError):
    pass


class EmptyWorkload(PanelError):
    pass


class ConfigError(PanelError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
