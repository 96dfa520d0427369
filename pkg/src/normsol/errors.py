"""Exception hierarchy shared by every solver module."""


class NormsolError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(NormsolError, ValueError):
    pass


class NoRoots(NormsolError):
    """The landscape function has no positive maximum, so no thresholds exist."""


class ZeroField(NormsolError, ValueError):
    pass


class SupportOverflow(NormsolError):
    """A transformed profile no longer fits inside the periodic box."""


class DomainTooSmall(NormsolError):
    pass


class PotentialError(NormsolError, ValueError):
    """A potential hypothesis failed; ``point`` holds the witnessing location."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class H1Violated(PotentialError):
    pass


class H2Violated(PotentialError):
    pass


class H3Violated(PotentialError):
    pass


class NotConverged(NormsolError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class RegionEscape(NormsolError):
    """The descent left its localization region.

    ``last_inside`` is the last iterate whose barycenter was still in the region.
    """

    def __init__(self, message, region=None, last_inside=None, barycenter=None):
        super().__init__(message)
        self.region = region
        self.last_inside = last_inside
        self.barycenter = barycenter


class LandscapeViolated(NormsolError):
    pass


class BlowUpGuard(NormsolError):
    def __init__(self, message, trace=None, state=None):
        super().__init__(message)
        self.trace = trace
        self.state = state


class ConfigError(NormsolError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
