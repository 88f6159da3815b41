"""Exception types raised across the package."""


class GmtError(Exception):
    """Base class for package errors."""


class InvalidArgument(GmtError, ValueError):
    pass


class EmptyDomain(GmtError, ValueError):
    """A statistic was requested over a region carrying no mass."""


class DepthExhausted(GmtError, RuntimeError):
    """The lattice is not deep enough for the requested scale."""


class PreconditionViolated(GmtError, ValueError):
    pass
