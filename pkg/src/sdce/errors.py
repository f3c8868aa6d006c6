"""Exception hierarchy shared by every subsystem.

All library errors derive from :class:`SdceError` so callers can catch one
type at the CLI boundary and map it to an exit code.
"""


class SdceError(Exception):
    """Base class for all errors raised by this package."""


# --- key / keystream ------------------------------------------------------

class KeyOutOfRange(SdceError):
    """Key parameter outside the admissible chaotic range."""


class DegenerateOrbit(SdceError):
    """The chaotic orbit collapsed (hit 0/1, went non-finite, or cycled)."""


class KeyDerivationFailed(SdceError):
    """Could not derive a valid per-chunk key within the retry budget."""


class KeyFileError(SdceError):
    """Key file missing, malformed, or not decodable."""


# --- entropy coding -------------------------------------------------------

class EmptyInput(SdceError):
    """Operation requires at least one input symbol."""


class EmptyHistogram(SdceError):
    """Histogram has no counts."""


class SymbolNotInTable(SdceError):
    """A symbol to encode has no codeword in the code table."""


class TruncatedStream(SdceError):
    """Bitstream exhausted (or undecodable) before all symbols were read."""


class TrailingBits(SdceError):
    """More than 7 unused bits remain after decoding all symbols."""


class CodeLengthOverflow(SdceError):
    """An optimal code length exceeds the 32-bit wire-format limit."""


# --- frame pipeline -------------------------------------------------------

class MalformedFrame(SdceError):
    """Frame data does not match the declared shape or sample format."""


class PixelCountMismatch(SdceError):
    """Encoded frame's pixel count disagrees with the sequence metadata."""


# --- container ------------------------------------------------------------

class BadMagic(SdceError):
    """Container does not start with the expected magic bytes."""


class UnsupportedVersion(SdceError):
    """Container version not understood by this reader."""


class CorruptRecord(SdceError):
    """A frame record failed its integrity check."""

    def __init__(self, message, frame_index=None):
        super().__init__(message)
        self.frame_index = frame_index


class Truncated(SdceError):
    """Container ended in the middle of a record."""

    def __init__(self, message, frame_index=None):
        super().__init__(message)
        self.frame_index = frame_index


class OutOfOrderFrame(SdceError):
    """Frame records were written out of index order."""


class SinkFailure(SdceError):
    """Writing to the output sink failed."""


# --- video I/O ------------------------------------------------------------

class BadSignature(SdceError):
    """Input stream does not carry a recognised video signature."""


class UnsupportedColorspace(SdceError):
    """Video colorspace outside the supported subset."""


class HeaderSyntax(SdceError):
    """Video stream header could not be parsed."""


class TruncatedFrame(SdceError):
    """Video stream ended inside a frame payload."""


# --- chunk engine ---------------------------------------------------------

class ChunkTooSmall(SdceError):
    """Chunk size smaller than a single frame."""


class MissingChunk(SdceError):
    """A chunk required for merging is absent."""

    def __init__(self, message, chunk_index=None):
        super().__init__(message)
        self.chunk_index = chunk_index


class ChunkFailure(SdceError):
    """A chunk task failed; carries the failing chunk index and cause."""

    def __init__(self, message, chunk_index=None, cause=None):
        super().__init__(message)
        self.chunk_index = chunk_index
        self.cause = cause


# --- metrics --------------------------------------------------------------

class ShapeMismatch(SdceError):
    """Operands do not share a common shape."""


class LengthMismatch(SdceError):
    """Byte sequences differ in length."""


class ZeroInput(SdceError):
    """Denominator byte count is zero."""


class ZeroDuration(SdceError):
    """Elapsed time is zero or negative."""


class NonPositiveProbability(SdceError):
    """Probability value outside (0, 1]."""
