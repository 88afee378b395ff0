"""Exception types raised by pcap."""


class PcapError(Exception):
    """Base class for all pcap errors."""


class InvalidArgument(PcapError, ValueError):
    pass


class DomainDisconnected(PcapError, ValueError):
    pass


class ValidationError(PcapError, ValueError):
    pass


class ParseError(PcapError, ValueError):
    """Malformed input file; carries the offending location."""

    def __init__(self, message, path=None, line=None, field=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field}")
        super().__init__(f"{': '.join(loc)}: {message}" if loc else message)
        self.path = path
        self.line = line
        self.field = field


class SizeError(PcapError):
    """Exhaustive enumeration would exceed the configured cap."""


class ConvergenceError(PcapError):
    """An iterative solver stopped before meeting its tolerance.

    ``best`` holds the best iterate found and ``residual`` its residual.
    """

    def __init__(self, message, best=None, residual=float("nan"), value=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.best = best
        self.residual = residual
        self.value = value


class PreconditionError(PcapError, ValueError):
    """Arguments violate an operation's stated precondition."""
