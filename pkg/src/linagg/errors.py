"""Shared exception types."""


class LinaggError(Exception):
    """Base class for all package errors."""


class ParameterError(LinaggError, ValueError):
    """Invalid or inconsistent configuration values."""


class DimensionError(LinaggError, ValueError):
    """Operands disagree on ring degree or modulus."""


class ThresholdError(LinaggError, ValueError):
    """Too few parties or shares to meet the threshold."""


class RangeError(LinaggError, ValueError):
    """A value falls outside its admissible range (e.g. decode overflow)."""


class FormatError(LinaggError, ValueError):
    """Malformed wire bytes or mismatched payload shape."""


class DecryptionError(LinaggError):
    """Authenticated decryption failed (wrong key or tampered data)."""


class ShareTransportError(LinaggError):
    """An encrypted share bundle could not be opened."""
