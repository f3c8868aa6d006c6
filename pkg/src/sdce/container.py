"""On-disk envelope for an encoded sequence (.sdce files).

Fixed little-endian layout.  40-byte header::

    magic "SDCE" | version u16 | flags u16 | width u32 | height u32 |
    fps_num u32 | fps_den u32 | frame_count u64 | chunk_index u32 |
    burn_in u16 | 2 pad bytes

followed by one record per frame::

    frame_index u64 | pixel_count u64 | code_lengths 256B |
    payload_bit_length u64 | payload ceil(bits/8) B | crc32 u32

The CRC covers the whole record body (everything before the CRC field), so
any single-byte corruption inside a record is detected on read.  The key is
never stored; flags carry the pipeline order, which is a public parameter.
"""

from dataclasses import dataclass
import struct
import zlib

from . import pipeline
from .errors import (BadMagic, CorruptRecord, OutOfOrderFrame, SinkFailure,
                     Truncated, UnsupportedVersion)
from .huffman import ALPHABET, BitStream
from .pipeline import COMPRESS_THEN_ENCRYPT, ENCRYPT_THEN_COMPRESS, EncodedFrame

MAGIC = b"SDCE"
VERSION = 1
FLAG_COMPRESS_THEN_ENCRYPT = 0x0001

_HEADER = struct.Struct("<4sHHIIIIQIH2x")
HEADER_SIZE = _HEADER.size  # 40
_RECORD_HEAD = struct.Struct("<QQ")
_RECORD_BITLEN = struct.Struct("<Q")
_RECORD_CRC = struct.Struct("<I")


@dataclass(frozen=True)
class ContainerHeader:
    width: int
    height: int
    fps_num: int
    fps_den: int
    frame_count: int
    chunk_index: int = 0
    burn_in: int = pipeline.DEFAULT_BURN_IN
    order: str = COMPRESS_THEN_ENCRYPT

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"degenerate dimensions {self.width}x{self.height}")
        if self.fps_den < 1 or self.fps_num < 1:
            raise ValueError("frame rate terms must be >= 1")
        if self.frame_count < 0 or self.chunk_index < 0:
            raise ValueError("negative count")
        if not 0 <= self.burn_in <= 0xFFFF:
            raise ValueError("burn_in must fit in 16 bits")
        if self.order not in (ENCRYPT_THEN_COMPRESS, COMPRESS_THEN_ENCRYPT):
            raise ValueError(f"unknown order {self.order!r}")

    def pack(self) -> bytes:
        flags = FLAG_COMPRESS_THEN_ENCRYPT if self.order == COMPRESS_THEN_ENCRYPT else 0
        return _HEADER.pack(MAGIC, VERSION, flags, self.width, self.height,
                            self.fps_num, self.fps_den, self.frame_count,
                            self.chunk_index, self.burn_in)

    @classmethod
    def unpack(cls, raw: bytes) -> "ContainerHeader":
        if len(raw) < HEADER_SIZE:
            raise Truncated(f"header needs {HEADER_SIZE} bytes, got {len(raw)}")
        (magic, version, flags, width, height, fps_num, fps_den,
         frame_count, chunk_index, burn_in) = _HEADER.unpack(raw[:HEADER_SIZE])
        if magic != MAGIC:
            raise BadMagic(f"expected {MAGIC!r}, found {magic!r}")
        if version != VERSION:
            raise UnsupportedVersion(f"container version {version}")
        order = (COMPRESS_THEN_ENCRYPT if flags & FLAG_COMPRESS_THEN_ENCRYPT
                 else ENCRYPT_THEN_COMPRESS)
        try:
            return cls(width, height, fps_num, fps_den, frame_count,
                       chunk_index, burn_in, order)
        except ValueError as exc:
            raise CorruptRecord(f"invalid header fields: {exc}") from exc

    def to_meta(self) -> pipeline.FrameMeta:
        return pipeline.FrameMeta(self.width, self.height, self.fps_num,
                                  self.fps_den, self.frame_count)


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    pixel_count: int
    code_lengths: bytes
    payload_bit_length: int
    payload: bytes

    def __post_init__(self):
        if len(self.code_lengths) != ALPHABET:
            raise ValueError("code_lengths must hold 256 bytes")
        need = (self.payload_bit_length + 7) // 8
        if len(self.payload) != need:
            raise ValueError(
                f"payload holds {len(self.payload)} bytes; bit length "
                f"{self.payload_bit_length} needs {need}")

    def body(self) -> bytes:
        return b"".join((
            _RECORD_HEAD.pack(self.frame_index, self.pixel_count),
            self.code_lengths,
            _RECORD_BITLEN.pack(self.payload_bit_length),
            self.payload,
        ))

    @classmethod
    def from_encoded(cls, enc: EncodedFrame) -> "FrameRecord":
        return cls(enc.frame_index, enc.original_pixel_count,
                   enc.code_lengths, enc.payload.bit_length,
                   enc.payload.payload)

    def to_encoded(self, order: str) -> EncodedFrame:
        return EncodedFrame(self.frame_index, self.pixel_count,
                            self.code_lengths,
                            BitStream(self.payload, self.payload_bit_length),
                            order)


def write_container(header: ContainerHeader, frames, sink) -> int:
    """Stream header plus records to a binary sink; returns bytes written.

    Records must arrive in strictly increasing frame_index order and their
    number must match ``header.frame_count``.
    """
    written = 0
    try:
        sink.write(header.pack())
    except OSError as exc:
        raise SinkFailure(f"header write failed: {exc}") from exc
    written += HEADER_SIZE
    previous = None
    count = 0
    for record in frames:
        if previous is not None and record.frame_index <= previous:
            raise OutOfOrderFrame(
                f"frame {record.frame_index} after {previous}")
        previous = record.frame_index
        body = record.body()
        crc = zlib.crc32(body) & 0xFFFFFFFF
        try:
            sink.write(body)
            sink.write(_RECORD_CRC.pack(crc))
        except OSError as exc:
            raise SinkFailure(
                f"record {record.frame_index} write failed: {exc}") from exc
        written += len(body) + _RECORD_CRC.size
        count += 1
    if count != header.frame_count:
        raise ValueError(
            f"header promises {header.frame_count} frames, wrote {count}")
    return written


_READ_STEP = 16 * 1024 * 1024


def _read_exact(source, n: int, frame_index, what: str) -> bytes:
    # read in bounded steps so a corrupt length field cannot trigger a
    # single absurd allocation; EOF surfaces as Truncated either way
    parts = []
    got = 0
    while got < n:
        chunk = source.read(min(n - got, _READ_STEP))
        if not chunk:
            break
        parts.append(chunk)
        got += len(chunk)
    if got != n:
        raise Truncated(
            f"container ended inside {what} (frame {frame_index}): "
            f"wanted {n} bytes, got {got}", frame_index=frame_index)
    return b"".join(parts) if len(parts) != 1 else parts[0]


def read_records(source, header: ContainerHeader):
    """Lazily yield CRC-checked FrameRecords after the header was read."""
    for i in range(header.frame_count):
        head = _read_exact(source, _RECORD_HEAD.size, i, "record header")
        frame_index, pixel_count = _RECORD_HEAD.unpack(head)
        lengths = _read_exact(source, ALPHABET, frame_index, "code table")
        bitlen_raw = _read_exact(source, _RECORD_BITLEN.size, frame_index,
                                 "bit length")
        (bit_length,) = _RECORD_BITLEN.unpack(bitlen_raw)
        payload_bytes = (bit_length + 7) // 8
        payload = _read_exact(source, payload_bytes, frame_index, "payload")
        crc_raw = _read_exact(source, _RECORD_CRC.size, frame_index, "crc")
        (stored_crc,) = _RECORD_CRC.unpack(crc_raw)
        actual = zlib.crc32(head)
        actual = zlib.crc32(lengths, actual)
        actual = zlib.crc32(bitlen_raw, actual)
        actual = zlib.crc32(payload, actual) & 0xFFFFFFFF
        if actual != stored_crc:
            raise CorruptRecord(
                f"crc mismatch in frame {frame_index}: "
                f"stored {stored_crc:08x}, computed {actual:08x}",
                frame_index=frame_index)
        yield FrameRecord(frame_index, pixel_count, lengths, bit_length,
                          payload)


def read_container(source):
    """Validate the header and return (header, lazy record iterator)."""
    raw = source.read(HEADER_SIZE)
    header = ContainerHeader.unpack(raw)
    return header, read_records(source, header)


def write_container_file(path, header: ContainerHeader, frames) -> int:
    try:
        with open(path, "wb") as fh:
            return write_container(header, frames, fh)
    except OSError as exc:
        raise SinkFailure(f"cannot write {path}: {exc}") from exc


def read_container_file(path):
    """Eagerly read a container file into (header, list of records)."""
    with open(path, "rb") as fh:
        header, records = read_container(fh)
        return header, list(records)


def read_header_file(path) -> ContainerHeader:
    with open(path, "rb") as fh:
        return ContainerHeader.unpack(fh.read(HEADER_SIZE))
