"""Exception hierarchy shared across the library.

Everything raised on purpose derives from :class:`SisdrlabError`, so callers
can catch one type at a CLI boundary. Subclasses also derive from the closest
builtin (ValueError / IOError semantics) to stay friendly to generic code.
"""


class SisdrlabError(Exception):
    """Base class for all errors raised by this package."""


class SignalMismatchError(SisdrlabError, ValueError):
    """Two signals disagree in length or sample rate where they must match."""


class ZeroEnergyError(SisdrlabError, ValueError):
    """An all-zero signal reached an operation that forms an energy ratio."""


class SourceCountError(SisdrlabError, ValueError):
    """Reference/estimate lists have mismatched or unsupported sizes."""


class UnboundedMetricError(SisdrlabError, ValueError):
    """A metric came out infinite where a finite value is required."""


class DegenerateCorrelationError(SisdrlabError, ValueError):
    """Target and noise are (anti-)parallel to within working precision."""


class ParallelSignalsError(DegenerateCorrelationError):
    """A construction needed an orthogonal component and none was left."""


class ClippingError(SisdrlabError, ValueError):
    """Mixing produced samples outside [-1, 1] under the 'error' policy."""


class SampleRangeError(SisdrlabError, ValueError):
    """Samples exceed [-1, 1] and the write policy forbids saturation."""


class SchemaVersionError(SisdrlabError, ValueError):
    """A manifest or report declares a schema this version cannot read."""


class WavFormatError(SisdrlabError, ValueError):
    """File is not a well-formed RIFF/WAVE container."""


class UnsupportedEncodingError(WavFormatError):
    """WAV encoding is not 16-bit integer PCM."""


class MultiChannelError(WavFormatError):
    """WAV file holds more than one channel."""
