"""Per-frame canonical Huffman coding over the 256-value byte alphabet.

The tree is built by repeatedly merging the two minimum-weight nodes, with
ties broken by (weight, lowest contained symbol) so identical histograms
always yield identical tables.  Only the code lengths are kept; codewords
are the canonical rewrite (shorter codes numerically first, ties by symbol
value), which lets the container store a 256-byte length table and nothing
else.  A single-symbol frame gets a 1-bit code.
"""

from dataclasses import dataclass, field
import heapq

import numpy as np

from . import _kernels
from .errors import (CodeLengthOverflow, EmptyHistogram, EmptyInput,
                     SymbolNotInTable, TrailingBits, TruncatedStream)

ALPHABET = 256
MAX_CODE_LENGTH = 32  # wire format stores lengths 0..32


@dataclass(frozen=True)
class SymbolHistogram:
    """Occurrence counts per byte value."""

    counts: np.ndarray  # int64[256]

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if counts.shape != (ALPHABET,):
            raise ValueError(f"histogram needs {ALPHABET} bins, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("negative count in histogram")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def probabilities(self) -> np.ndarray:
        total = self.total
        if total == 0:
            raise EmptyHistogram("histogram is empty")
        return self.counts / total


def build_histogram(pixels) -> SymbolHistogram:
    """Count byte values; errors on empty input."""
    data = np.frombuffer(pixels, dtype=np.uint8) if isinstance(
        pixels, (bytes, bytearray, memoryview)) else np.asarray(pixels)
    data = data.reshape(-1)
    if data.size == 0:
        raise EmptyInput("cannot build a histogram from zero pixels")
    if data.dtype != np.uint8:
        raise ValueError(f"expected byte data, got dtype {data.dtype}")
    counts = np.bincount(data, minlength=ALPHABET).astype(np.int64)
    return SymbolHistogram(counts)


@dataclass(frozen=True)
class CodeTable:
    """Canonical code assignment derived from per-symbol code lengths.

    ``lengths[v] == 0`` means value v is absent.  The decode side tables
    (first codeword, symbol count, and symbol offset per length) are
    precomputed here and shared with the decoding kernel.
    """

    lengths: np.ndarray  # uint8[256]
    codes: np.ndarray = field(repr=False, default=None)
    _first_code: np.ndarray = field(repr=False, default=None)
    _level_counts: np.ndarray = field(repr=False, default=None)
    _level_offsets: np.ndarray = field(repr=False, default=None)
    _symbols: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        lengths = np.ascontiguousarray(self.lengths, dtype=np.uint8)
        if lengths.shape != (ALPHABET,):
            raise ValueError(f"need {ALPHABET} lengths, got {lengths.shape}")
        if lengths.max(initial=0) > MAX_CODE_LENGTH:
            raise CodeLengthOverflow(
                f"code length {int(lengths.max())} exceeds {MAX_CODE_LENGTH}")
        present = np.nonzero(lengths)[0]
        if present.size == 0:
            raise EmptyHistogram("code table has no symbols")

        level_counts = np.zeros(MAX_CODE_LENGTH + 1, dtype=np.int64)
        for value in present:
            level_counts[lengths[value]] += 1
        kraft = int((level_counts[1:] << (MAX_CODE_LENGTH -
                     np.arange(1, MAX_CODE_LENGTH + 1))).sum())
        full = 1 << MAX_CODE_LENGTH
        if kraft > full or (present.size >= 2 and kraft != full):
            raise ValueError("lengths violate the Kraft equality")

        first_code = np.zeros(MAX_CODE_LENGTH + 1, dtype=np.int64)
        level_offsets = np.zeros(MAX_CODE_LENGTH + 1, dtype=np.int64)
        next_code = 0
        next_offset = 0
        for width in range(1, MAX_CODE_LENGTH + 1):
            first_code[width] = next_code
            level_offsets[width] = next_offset
            next_code = (next_code + int(level_counts[width])) << 1
            next_offset += int(level_counts[width])

        # canonical order: (length, symbol) ascending
        ordered = sorted((int(lengths[v]), int(v)) for v in present)
        codes = np.zeros(ALPHABET, dtype=np.uint32)
        assigned = first_code.copy()
        for width, value in ordered:
            codes[value] = assigned[width]
            assigned[width] += 1
        symbols = np.array([v for _, v in ordered], dtype=np.uint8)

        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "_first_code", first_code)
        object.__setattr__(self, "_level_counts", level_counts)
        object.__setattr__(self, "_level_offsets", level_offsets)
        object.__setattr__(self, "_symbols", symbols)

    @classmethod
    def from_lengths(cls, lengths) -> "CodeTable":
        if isinstance(lengths, (bytes, bytearray, memoryview)):
            lengths = np.frombuffer(lengths, dtype=np.uint8)
        return cls(np.asarray(lengths, dtype=np.uint8))

    def wire_bytes(self) -> bytes:
        """256 bytes of code lengths; the reader rebuilds the codewords."""
        return self.lengths.tobytes()

    def kraft_sum(self) -> float:
        present = self.lengths[self.lengths > 0].astype(np.float64)
        return float(np.sum(2.0 ** -present))


@dataclass(frozen=True)
class BitStream:
    """Packed MSB-first bits: payload bytes plus the exact valid bit count."""

    payload: bytes
    bit_length: int

    def __post_init__(self):
        if self.bit_length < 0:
            raise ValueError("negative bit length")
        need = (self.bit_length + 7) // 8
        if len(self.payload) != need:
            raise ValueError(
                f"payload holds {len(self.payload)} bytes, "
                f"bit length {self.bit_length} needs {need}")


def build_code_table(hist: SymbolHistogram) -> CodeTable:
    """Optimal Huffman lengths -> canonical table.

    Merge tie-break: (weight, lowest symbol contained).  Single-symbol
    alphabets get code length 1.
    """
    counts = hist.counts
    present = np.nonzero(counts)[0]
    if present.size == 0:
        raise EmptyHistogram("cannot build a code for an empty histogram")
    lengths = np.zeros(ALPHABET, dtype=np.int64)
    if present.size == 1:
        lengths[present[0]] = 1
        return CodeTable.from_lengths(lengths.astype(np.uint8))

    heap = [(int(counts[v]), int(v), [int(v)]) for v in present]
    heapq.heapify(heap)
    while len(heap) > 1:
        w1, m1, group1 = heapq.heappop(heap)
        w2, m2, group2 = heapq.heappop(heap)
        for v in group1:
            lengths[v] += 1
        for v in group2:
            lengths[v] += 1
        heapq.heappush(heap, (w1 + w2, min(m1, m2), group1 + group2))
    if lengths.max() > MAX_CODE_LENGTH:
        raise CodeLengthOverflow(
            f"optimal code needs {int(lengths.max())} bits; the container "
            f"stores at most {MAX_CODE_LENGTH}")
    return CodeTable.from_lengths(lengths.astype(np.uint8))


def encode(pixels, table: CodeTable) -> BitStream:
    """Concatenate codewords in pixel order."""
    data = np.frombuffer(pixels, dtype=np.uint8) if isinstance(
        pixels, (bytes, bytearray, memoryview)) else np.asarray(pixels)
    data = np.ascontiguousarray(data.reshape(-1), dtype=np.uint8)
    if data.size == 0:
        raise EmptyInput("nothing to encode")
    per_pixel = table.lengths[data]
    if not per_pixel.all():
        bad = int(data[per_pixel == 0][0])
        raise SymbolNotInTable(f"pixel value {bad} has no codeword")
    bit_length = int(per_pixel.astype(np.int64).sum())
    out = np.zeros((bit_length + 7) // 8, dtype=np.uint8)
    _kernels.pack_codes(data, table.codes, table.lengths, out)
    return BitStream(out.tobytes(), bit_length)


def decode(stream: BitStream, table: CodeTable, n: int) -> np.ndarray:
    """Read exactly n symbols; the stream must then be spent (<= 7 pad bits)."""
    if n < 0:
        raise ValueError("negative symbol count")
    payload = np.frombuffer(stream.payload, dtype=np.uint8)
    out = np.empty(n, dtype=np.uint8)
    consumed, status = _kernels.unpack_codes(
        payload, stream.bit_length, table._first_code, table._level_counts,
        table._level_offsets, table._symbols, n, out)
    if status == 1:
        raise TruncatedStream(
            f"bits exhausted after {int(consumed)} of {stream.bit_length} "
            f"before reaching {n} symbols")
    if status == 2:
        raise TruncatedStream(f"undecodable codeword at bit {int(consumed)}")
    leftover = stream.bit_length - int(consumed)
    if leftover > 7:
        raise TrailingBits(f"{leftover} unused bits remain after {n} symbols")
    return out


def mean_code_length(hist: SymbolHistogram, table: CodeTable) -> float:
    """Frequency-weighted average codeword length in bits per symbol."""
    total = hist.total
    if total == 0:
        raise EmptyHistogram("histogram is empty")
    missing = (hist.counts > 0) & (table.lengths == 0)
    if missing.any():
        bad = int(np.nonzero(missing)[0][0])
        raise SymbolNotInTable(f"histogram value {bad} missing from table")
    weighted = int((hist.counts * table.lengths.astype(np.int64)).sum())
    return weighted / total


def total_bits(code_count: int, mean_len: float) -> float:
    """Total coded bits implied by a code count and a mean code length."""
    if code_count < 0:
        raise ValueError("negative code count")
    return code_count * mean_len


def entropy_bits(hist: SymbolHistogram) -> float:
    """Shannon entropy of the histogram in bits/symbol (present symbols)."""
    total = hist.total
    if total == 0:
        raise EmptyHistogram("histogram is empty")
    p = hist.counts[hist.counts > 0] / total
    return float(-(p * np.log2(p)).sum())
