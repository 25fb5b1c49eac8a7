"""Exception hierarchy shared by all modules.

Every error raised on purpose by the library derives from ``HombError`` so the
command line can map failure classes onto exit codes.
"""


class HombError(Exception):
    """Base class for library errors."""


class DomainError(HombError, ValueError):
    """An argument lies outside the domain of an operation."""


class ResolutionError(HombError, ValueError):
    """A frequency or delay grid is too coarse or too narrow for the request."""


class GeometryError(HombError, ValueError):
    """Frequency bins overlap more than the configured threshold.

    The measured overlap is kept on ``overlap`` for diagnostics.
    """

    def __init__(self, message, overlap=None):
        super().__init__(message)
        self.overlap = overlap


class AnalysisError(HombError, ValueError):
    """A trace or count record is insufficient for the requested analysis."""


class SamplingError(HombError, ValueError):
    """Delay sampling is too coarse for the fringe content (aliasing)."""


class TruncationError(HombError, ValueError):
    """The temporal window of the two-time oracle clips the wavepacket."""


class ParseError(HombError, ValueError):
    """A scenario config file is malformed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line
