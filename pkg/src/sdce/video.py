"""Raw video ingest/emit: Y4M (subset) input, PGM and RGV1 output.

Y4M support covers progressive C420 and Cmono streams: the luma plane is
kept as the grayscale frame, chroma is skipped.  RGV1 is the package's raw
grayscale interchange: a 24-byte header (magic "RGV1", then width, height,
fps_num, fps_den, frame_count as little-endian u32) followed by the frames
back to back, one byte per pixel, row-major.
"""

from dataclasses import dataclass
import io
import os
import re
import struct

import numpy as np

from .errors import (BadSignature, HeaderSyntax, SinkFailure, TruncatedFrame,
                     UnsupportedColorspace)
from .pipeline import FrameMeta

Y4M_SIGNATURE = b"YUV4MPEG2"
RGV_MAGIC = b"RGV1"
RGV_HEADER = struct.Struct("<4sIIIII")
RGV_HEADER_SIZE = RGV_HEADER.size  # 24

# C420 chroma-siting variants share the plane layout we need (luma first).
_C420_TAGS = {"420", "420jpeg", "420mpeg2", "420paldv"}
_MONO_TAGS = {"mono"}


@dataclass
class RawVideo:
    """A grayscale sequence held in memory as a (n, h, w) uint8 array."""

    meta: FrameMeta
    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.uint8)
        expected = (self.meta.frame_count, self.meta.height, self.meta.width)
        if frames.shape != expected:
            raise ValueError(f"frames shape {frames.shape} != meta {expected}")
        self.frames = frames

    @property
    def nbytes(self) -> int:
        return int(self.frames.nbytes)


# --- Y4M ----------------------------------------------------------------

def _parse_y4m_header(line: bytes):
    """Return (width, height, fps_num, fps_den, colorspace tag)."""
    fields = line.decode("ascii", errors="replace").split(" ")
    if fields[0] != Y4M_SIGNATURE.decode():
        raise BadSignature("stream does not start with YUV4MPEG2")
    width = height = None
    fps = None
    colorspace = "420"
    for token in fields[1:]:
        if not token:
            continue
        tag, value = token[0], token[1:]
        if tag == "W":
            if not value.isdigit():
                raise HeaderSyntax(f"bad width token {token!r}")
            width = int(value)
        elif tag == "H":
            if not value.isdigit():
                raise HeaderSyntax(f"bad height token {token!r}")
            height = int(value)
        elif tag == "F":
            m = re.fullmatch(r"(\d+):(\d+)", value)
            if not m:
                raise HeaderSyntax(f"bad frame rate token {token!r}")
            fps = (int(m.group(1)), int(m.group(2)))
        elif tag == "C":
            colorspace = value
        # I (interlacing), A (aspect), X (extensions) are ignored
    if width is None or height is None:
        raise HeaderSyntax("missing W or H tag")
    if fps is None:
        raise HeaderSyntax("missing F frame-rate tag")
    if width < 1 or height < 1 or fps[0] < 1 or fps[1] < 1:
        raise HeaderSyntax("non-positive geometry or frame rate")
    if colorspace in _MONO_TAGS:
        chroma = 0
    elif colorspace in _C420_TAGS:
        if width % 2 or height % 2:
            raise UnsupportedColorspace(
                f"C420 needs even dimensions, got {width}x{height}")
        chroma = (width // 2) * (height // 2) * 2
    else:
        raise UnsupportedColorspace(f"colorspace C{colorspace} not supported")
    return width, height, fps[0], fps[1], chroma


def _read_line(stream, limit=512) -> bytes:
    buf = bytearray()
    while len(buf) < limit:
        ch = stream.read(1)
        if not ch:
            break
        if ch == b"\n":
            return bytes(buf)
        buf += ch
    if len(buf) >= limit:
        raise HeaderSyntax("unterminated header line")
    return bytes(buf)


def parse_y4m(source) -> RawVideo:
    """Parse a whole Y4M stream (path, bytes, or binary file) into memory."""
    if isinstance(source, (bytes, bytearray)):
        stream = io.BytesIO(source)
    elif isinstance(source, (str, os.PathLike)):
        stream = open(source, "rb")
    else:
        stream = source
    try:
        first = _read_line(stream)
        if not first.startswith(Y4M_SIGNATURE):
            raise BadSignature("stream does not start with YUV4MPEG2")
        width, height, fps_num, fps_den, chroma = _parse_y4m_header(first)
        luma = width * height
        frames = []
        while True:
            marker = _read_line(stream)
            if marker == b"" and stream.read(1) == b"":
                break
            if not marker.startswith(b"FRAME"):
                raise HeaderSyntax(f"expected FRAME marker, got {marker[:16]!r}")
            data = stream.read(luma)
            if len(data) != luma:
                raise TruncatedFrame(
                    f"frame {len(frames)}: luma plane short "
                    f"({len(data)}/{luma} bytes)")
            if chroma:
                skipped = stream.read(chroma)
                if len(skipped) != chroma:
                    raise TruncatedFrame(
                        f"frame {len(frames)}: chroma planes short")
            frames.append(np.frombuffer(data, dtype=np.uint8)
                          .reshape(height, width))
        meta = FrameMeta(width, height, fps_num, fps_den, len(frames))
        stacked = (np.stack(frames) if frames
                   else np.empty((0, height, width), dtype=np.uint8))
        return RawVideo(meta, stacked)
    finally:
        if isinstance(source, (str, os.PathLike, bytes, bytearray)):
            stream.close()


# --- PGM ------------------------------------------------------------------

def write_pgm(frame: np.ndarray, path) -> None:
    frame = np.asarray(frame, dtype=np.uint8)
    if frame.ndim != 2:
        raise ValueError(f"PGM frame must be 2-D, got shape {frame.shape}")
    height, width = frame.shape
    try:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
            fh.write(frame.tobytes())
    except OSError as exc:
        raise SinkFailure(f"cannot write {path}: {exc}") from exc


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise BadSignature(f"{path} is not a binary PGM")
    width, height, maxval = (int(m.group(i)) for i in (1, 2, 3))
    if maxval != 255:
        raise UnsupportedColorspace(f"PGM maxval {maxval} unsupported")
    pixels = data[m.end():m.end() + width * height]
    if len(pixels) != width * height:
        raise TruncatedFrame(f"{path}: pixel data short")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width)


def pgm_name(index: int) -> str:
    return f"frame_{index:06d}.pgm"


def write_pgm_sequence(video: RawVideo, directory) -> int:
    """One binary PGM per frame, zero-padded names; returns the file count."""
    os.makedirs(directory, exist_ok=True)
    for i in range(video.meta.frame_count):
        write_pgm(video.frames[i], os.path.join(directory, pgm_name(i)))
    return video.meta.frame_count


def read_pgm_sequence(directory, fps=(25, 1)) -> RawVideo:
    names = sorted(n for n in os.listdir(directory) if n.endswith(".pgm"))
    if not names:
        raise BadSignature(f"no .pgm files in {directory}")
    frames = [read_pgm(os.path.join(directory, n)) for n in names]
    height, width = frames[0].shape
    meta = FrameMeta(width, height, fps[0], fps[1], len(frames))
    return RawVideo(meta, np.stack(frames))


# --- RGV1 -------------------------------------------------------------------

def write_rgv(video: RawVideo, path) -> int:
    header = RGV_HEADER.pack(RGV_MAGIC, video.meta.width, video.meta.height,
                             video.meta.fps_num, video.meta.fps_den,
                             video.meta.frame_count)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(video.frames.tobytes())
    except OSError as exc:
        raise SinkFailure(f"cannot write {path}: {exc}") from exc
    return len(header) + video.nbytes


def read_rgv(path) -> RawVideo:
    with open(path, "rb") as fh:
        raw = fh.read(RGV_HEADER_SIZE)
        if len(raw) < RGV_HEADER_SIZE:
            raise BadSignature(f"{path}: too short for an RGV1 header")
        magic, width, height, fps_num, fps_den, count = RGV_HEADER.unpack(raw)
        if magic != RGV_MAGIC:
            raise BadSignature(f"{path}: bad magic {magic!r}")
        meta = FrameMeta(width, height, fps_num, fps_den, count)
        data = fh.read(count * meta.frame_bytes)
        if len(data) != count * meta.frame_bytes:
            raise TruncatedFrame(f"{path}: frame data short")
    frames = np.frombuffer(data, dtype=np.uint8).reshape(
        count, height, width)
    return RawVideo(meta, frames)


# --- random-access reader ---------------------------------------------------

class VideoReader:
    """Random access to frames of an RGV1 or Y4M file by index.

    Y4M files are indexed once at open time (frame markers may carry
    parameters, so offsets are discovered by scanning, not arithmetic).
    """

    def __init__(self, path):
        self.path = os.fspath(path)
        with open(self.path, "rb") as fh:
            magic = fh.read(9)
        if magic[:4] == RGV_MAGIC:
            self._format = "rgv"
            self._init_rgv()
        elif magic == Y4M_SIGNATURE:
            self._format = "y4m"
            self._init_y4m()
        else:
            raise BadSignature(f"{self.path}: neither RGV1 nor YUV4MPEG2")

    def _init_rgv(self):
        with open(self.path, "rb") as fh:
            raw = fh.read(RGV_HEADER_SIZE)
            if len(raw) < RGV_HEADER_SIZE:
                raise BadSignature(f"{self.path}: too short for RGV1")
            magic, w, h, fn, fd, count = RGV_HEADER.unpack(raw)
            self.meta = FrameMeta(w, h, fn, fd, count)
            fh.seek(0, os.SEEK_END)
            need = RGV_HEADER_SIZE + count * self.meta.frame_bytes
            if fh.tell() < need:
                raise TruncatedFrame(f"{self.path}: frame data short")
        self._offsets = [RGV_HEADER_SIZE + i * self.meta.frame_bytes
                         for i in range(count)]
        self._chroma = 0

    def _init_y4m(self):
        offsets = []
        file_size = os.path.getsize(self.path)
        with open(self.path, "rb") as fh:
            first = _read_line(fh)
            w, h, fn, fd, chroma = _parse_y4m_header(first)
            luma = w * h
            while True:
                marker = _read_line(fh)
                if marker == b"" and fh.read(1) == b"":
                    break
                if not marker.startswith(b"FRAME"):
                    raise HeaderSyntax(
                        f"expected FRAME marker, got {marker[:16]!r}")
                offsets.append(fh.tell())
                fh.seek(luma + chroma, os.SEEK_CUR)
                if fh.tell() > file_size:
                    raise TruncatedFrame(
                        f"frame {len(offsets) - 1}: data short")
        self.meta = FrameMeta(w, h, fn, fd, len(offsets))
        self._offsets = offsets
        self._chroma = chroma

    def read_range(self, start: int, stop: int) -> np.ndarray:
        """Frames [start, stop) stacked as (k, h, w)."""
        if not 0 <= start <= stop <= self.meta.frame_count:
            raise ValueError(f"range [{start}, {stop}) out of bounds")
        h, w = self.meta.height, self.meta.width
        out = np.empty((stop - start, h, w), dtype=np.uint8)
        with open(self.path, "rb") as fh:
            for k, i in enumerate(range(start, stop)):
                fh.seek(self._offsets[i])
                data = fh.read(self.meta.frame_bytes)
                if len(data) != self.meta.frame_bytes:
                    raise TruncatedFrame(f"frame {i}: data short")
                out[k] = np.frombuffer(data, dtype=np.uint8).reshape(h, w)
        return out

    def read_all(self) -> RawVideo:
        return RawVideo(self.meta, self.read_range(0, self.meta.frame_count))


def open_video(path) -> VideoReader:
    return VideoReader(path)


# --- synthetic corpora -------------------------------------------------------

CORPUS_KINDS = ("gradient", "noise", "constant", "checker")


def synth_corpus(kind: str, meta: FrameMeta, seed: int = 0) -> RawVideo:
    """Deterministic test sequences with known entropy character.

    gradient: horizontal ramp 0..255 across the width, shifted by the frame
      index (a 256-wide frame covers every byte value exactly once per row).
    noise: seeded uniform bytes, roughly 8 bits/symbol.
    constant: every pixel equals seed mod 256; 0 bits/symbol.
    checker: 8x8 blocks alternating 0 and 255, parity flipped per frame.
    """
    n, h, w = meta.frame_count, meta.height, meta.width
    if kind == "gradient":
        if w > 1:
            ramp = (np.arange(w, dtype=np.int64) * 255) // (w - 1)
        else:
            ramp = np.zeros(1, dtype=np.int64)
        t = np.arange(n, dtype=np.int64).reshape(n, 1, 1)
        frames = ((ramp.reshape(1, 1, w) + t) % 256).astype(np.uint8)
        frames = np.broadcast_to(frames, (n, h, w)).copy()
    elif kind == "noise":
        rng = np.random.default_rng(seed)
        frames = rng.integers(0, 256, size=(n, h, w), dtype=np.uint8)
    elif kind == "constant":
        frames = np.full((n, h, w), seed % 256, dtype=np.uint8)
    elif kind == "checker":
        y = np.arange(h).reshape(1, h, 1) // 8
        x = np.arange(w).reshape(1, 1, w) // 8
        t = np.arange(n).reshape(n, 1, 1)
        frames = np.where((x + y + t) % 2 == 0, 0, 255).astype(np.uint8)
    else:
        raise ValueError(f"unknown corpus kind {kind!r}")
    return RawVideo(meta, frames)
