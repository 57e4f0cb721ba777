"""Exception hierarchy shared across the package.

Every error raised by otalign derives from :class:`OtalignError`, with
file-format problems grouped under :class:`EmbIoError` so callers (and the
CLI exit-code mapping) can distinguish bad inputs from numeric failures.
"""

from __future__ import annotations


class OtalignError(Exception):
    """Base class for all otalign errors."""


class ConfigError(OtalignError):
    """Inconsistent or out-of-range configuration values."""


# --- embedding file I/O -------------------------------------------------


class EmbIoError(OtalignError):
    """Base class for embedding file-format errors."""


class BadMagic(EmbIoError):
    """File does not start with the EMB1 magic bytes."""


class UnsupportedVersion(EmbIoError):
    """Header declares a format version this reader does not understand."""


class UnsupportedDtype(EmbIoError):
    """Header declares a payload dtype code other than float32."""


class TruncatedFile(EmbIoError):
    """File is shorter than the header-declared payload requires."""


class TrailingData(EmbIoError):
    """File is longer than the header-declared payload allows."""


class InvalidShape(EmbIoError):
    """Declared or parsed matrix shape violates M >= 1, D >= 1."""


class NonFiniteValue(EmbIoError):
    """A NaN or infinity was found in matrix data."""


class RaggedRows(EmbIoError):
    """CSV rows do not all have the same number of columns."""


class ParseError(EmbIoError):
    """A CSV cell could not be parsed as a decimal number."""


# --- numeric core -------------------------------------------------------


class DimMismatch(OtalignError):
    """Operand shapes are incompatible."""


class KOutOfRange(OtalignError):
    """Requested neighbor count k is outside [1, N]."""


class TooLarge(OtalignError):
    """Instance exceeds the size limit of the exact enumeration solver."""


class NonUniformMarginals(OtalignError):
    """The exact solver requires uniform marginals on a square instance."""


class TooFewSamples(OtalignError):
    """Gaussian statistics need at least two samples."""


class SqrtFailure(OtalignError):
    """Matrix square root could not be computed (eigensolver failure)."""
