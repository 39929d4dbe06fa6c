"""Exception hierarchy shared across the toolkit."""


class StrokekitError(Exception):
    """Base class for all toolkit errors."""


# --- frame codec / stream decoding -----------------------------------------

class BadSyncError(StrokekitError):
    """Frame does not start with the sync bytes."""


class BadCrcError(StrokekitError):
    """Frame checksum mismatch: the payload is corrupt."""


class CodeOutOfRangeError(StrokekitError):
    """A decoded ADC code exceeds the 10-bit range; encoder bug upstream."""


class EmptyStreamError(StrokekitError):
    """No frames available to assemble a recording."""


class GapTooLargeError(StrokekitError):
    """More consecutive frames are missing than the interpolation policy allows."""


# --- recording files --------------------------------------------------------

class MalformedHeaderError(StrokekitError):
    """Recording file header is missing or unparseable."""


class VersionUnsupportedError(StrokekitError):
    """Recording file declares a container version this reader does not know."""


class TruncatedDataError(StrokekitError):
    """Recording file body is shorter than its header declares."""


# --- analysis ---------------------------------------------------------------

class TooShortError(StrokekitError):
    """Series is shorter than the operation's minimum length."""


class EmptyInputError(StrokekitError):
    """No input recordings were given."""


class NonMonotonicPeaksError(StrokekitError):
    """Per-channel peak times are not strictly monotonic along the array."""


class FlatChannelError(StrokekitError):
    """Channel envelope is identically zero: no contact over that sensor."""


class ZeroTimeSpreadError(StrokekitError):
    """All channel peaks are simultaneous; stroke velocity is undefined."""


class InvalidRecordingError(StrokekitError):
    """Recording failed validation; the message lists the violations."""


# --- synthesis / fitting ----------------------------------------------------

class BandLimitError(StrokekitError):
    """Carrier frequency exceeds what the sample rate can represent."""


class DegenerateTargetError(StrokekitError):
    """Fit target has an all-zero envelope or spectrum."""
