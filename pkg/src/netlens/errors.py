"""Exception hierarchy shared by all netlens modules.

Every failure mode surfaced by the public API maps onto one of these
classes so callers (and the CLI exit-code logic) can branch on type
rather than on message text.
"""


class NetlensError(Exception):
    """Base class for all errors raised by netlens."""


class DimensionError(NetlensError):
    """A tensor shape does not satisfy an operation's contract.

    Carries the offending axis name so messages stay actionable.
    """

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class ArgumentError(NetlensError):
    """A scalar argument is out of its documented range."""


class ConfigError(NetlensError):
    """A configuration object is inconsistent (bad rule coverage, unknown
    method, non-conv Grad-CAM layer, malformed run config)."""


class NumericalError(NetlensError):
    """A computation hit a value it cannot stabilize (e.g. an exactly-zero
    LRP denominator with epsilon 0)."""


class WeightStoreError(NetlensError):
    """A weight store does not match the network it is used with."""


class WeightFormatError(NetlensError):
    """Base class for weight-file load failures."""


class BlobSizeError(WeightFormatError):
    """Blob byte count disagrees with the manifest."""


class UnknownDtypeError(WeightFormatError):
    """Manifest declares a dtype this build does not support."""


class ChecksumError(WeightFormatError):
    """Blob CRC32 does not match the manifest checksum."""


class PpmError(NetlensError):
    """PPM byte stream cannot be decoded."""


class CsvError(NetlensError):
    """Scored-sample CSV cannot be parsed; carries the 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class UndefinedMetricError(NetlensError):
    """A metric is undefined for the given input (e.g. AUC with one class)."""
