"""Per-frame encode/decode: grayscale, chaotic XOR, Huffman, reshape.

Two stage orderings are supported:

* ``encrypt-then-compress`` ("etc"): XOR the pixels with the keystream,
  then build the Huffman model over the ciphertext.  This is the literal
  pipeline, kept for fidelity; whitened bytes do not compress, so expect
  about 8 bits per pixel.
* ``compress-then-encrypt`` ("cte", default): Huffman-code the plaintext,
  then XOR the packed payload bytes with the keystream (one keystream byte
  per payload byte).  This is the ordering that actually compresses.

The chaotic state persists across frames inside a sequence, so identical
frames never produce identical ciphertext.  A configurable burn-in discards
the first keystream bytes before frame 0; the decoder applies the same
discard.
"""

from dataclasses import dataclass

import numpy as np

from . import huffman
from .errors import MalformedFrame, PixelCountMismatch
from .huffman import BitStream, CodeTable
from .keystream import (ChaosKey, ChaosState, generate_keystream,
                        initial_state, skip_keystream)

ENCRYPT_THEN_COMPRESS = "encrypt-then-compress"
COMPRESS_THEN_ENCRYPT = "compress-then-encrypt"
ORDERS = (ENCRYPT_THEN_COMPRESS, COMPRESS_THEN_ENCRYPT)
ORDER_ALIASES = {
    "etc": ENCRYPT_THEN_COMPRESS,
    "cte": COMPRESS_THEN_ENCRYPT,
    ENCRYPT_THEN_COMPRESS: ENCRYPT_THEN_COMPRESS,
    COMPRESS_THEN_ENCRYPT: COMPRESS_THEN_ENCRYPT,
}

DEFAULT_BURN_IN = 64

# BT.601 luma weights; the conversion is floor(w.R + 0.5) style half-up
# rounding so every host produces the same byte.
_LUMA_R = 0.299
_LUMA_G = 0.587
_LUMA_B = 0.114


def normalize_order(order: str) -> str:
    try:
        return ORDER_ALIASES[order]
    except KeyError:
        raise ValueError(f"unknown pipeline order {order!r}") from None


@dataclass(frozen=True)
class FrameMeta:
    """Sequence geometry: dimensions, frame rate (rational), frame count."""

    width: int
    height: int
    fps_num: int = 25
    fps_den: int = 1
    frame_count: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"degenerate dimensions {self.width}x{self.height}")
        if self.fps_num < 1 or self.fps_den < 1:
            raise ValueError(f"bad frame rate {self.fps_num}/{self.fps_den}")
        if self.frame_count < 0:
            raise ValueError("negative frame count")

    @property
    def frame_bytes(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class EncodedFrame:
    """One frame's coded payload plus everything needed to invert it."""

    frame_index: int
    original_pixel_count: int
    code_lengths: bytes  # 256 entries, wire form of the Huffman table
    payload: BitStream
    pipeline_order: str

    def __post_init__(self):
        if len(self.code_lengths) != huffman.ALPHABET:
            raise ValueError("code_lengths must hold 256 entries")
        if self.pipeline_order not in ORDERS:
            raise ValueError(f"unknown order {self.pipeline_order!r}")

    @property
    def payload_bytes(self) -> int:
        return len(self.payload.payload)


def to_grayscale(rgb_frame) -> np.ndarray:
    """Interleaved 8-bit RGB -> BT.601 luma bytes, half-up rounding."""
    rgb = np.asarray(rgb_frame)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise MalformedFrame(f"expected (h, w, 3) RGB, got shape {rgb.shape}")
    if rgb.dtype != np.uint8:
        raise MalformedFrame(f"expected 8-bit samples, got dtype {rgb.dtype}")
    r = rgb[:, :, 0].astype(np.float64)
    g = rgb[:, :, 1].astype(np.float64)
    b = rgb[:, :, 2].astype(np.float64)
    luma = np.floor(_LUMA_R * r + _LUMA_G * g + _LUMA_B * b + 0.5)
    return np.clip(luma, 0.0, 255.0).astype(np.uint8)


def _flatten(frame) -> np.ndarray:
    data = np.asarray(frame)
    if data.dtype != np.uint8:
        raise MalformedFrame(f"frame must be uint8, got {data.dtype}")
    return np.ascontiguousarray(data.reshape(-1))


def encrypt_frame(frame, state: ChaosState,
                  key: ChaosKey) -> tuple[np.ndarray, ChaosState]:
    """XOR pixels with the keystream; consumes exactly one byte per pixel."""
    flat = _flatten(frame)
    ks, state = generate_keystream(key, state, flat.size)
    return flat ^ ks, state


def decrypt_frame(cipher, state: ChaosState,
                  key: ChaosKey) -> tuple[np.ndarray, ChaosState]:
    """Exact inverse of encrypt_frame (XOR is an involution)."""
    return encrypt_frame(cipher, state, key)


def encode_frame(frame, state: ChaosState, key: ChaosKey,
                 order: str = COMPRESS_THEN_ENCRYPT,
                 frame_index: int = 0) -> tuple[EncodedFrame, ChaosState]:
    order = normalize_order(order)
    flat = _flatten(frame)
    if order == ENCRYPT_THEN_COMPRESS:
        cipher, state = encrypt_frame(flat, state, key)
        hist = huffman.build_histogram(cipher)
        table = huffman.build_code_table(hist)
        payload = huffman.encode(cipher, table)
    else:
        hist = huffman.build_histogram(flat)
        table = huffman.build_code_table(hist)
        packed = huffman.encode(flat, table)
        raw = np.frombuffer(packed.payload, dtype=np.uint8)
        ks, state = generate_keystream(key, state, raw.size)
        payload = BitStream((raw ^ ks).tobytes(), packed.bit_length)
    enc = EncodedFrame(frame_index, flat.size, table.wire_bytes(), payload,
                       order)
    return enc, state


def decode_frame(enc: EncodedFrame, state: ChaosState, key: ChaosKey,
                 meta: FrameMeta) -> tuple[np.ndarray, ChaosState]:
    if enc.original_pixel_count != meta.frame_bytes:
        raise PixelCountMismatch(
            f"frame {enc.frame_index}: record says {enc.original_pixel_count} "
            f"pixels, metadata says {meta.frame_bytes}")
    table = CodeTable.from_lengths(enc.code_lengths)
    n = enc.original_pixel_count
    if enc.pipeline_order == ENCRYPT_THEN_COMPRESS:
        cipher = huffman.decode(enc.payload, table, n)
        flat, state = decrypt_frame(cipher, state, key)
    else:
        raw = np.frombuffer(enc.payload.payload, dtype=np.uint8)
        ks, state = generate_keystream(key, state, raw.size)
        clear = BitStream((raw ^ ks).tobytes(), enc.payload.bit_length)
        flat = huffman.decode(clear, table, n)
    return flat.reshape(meta.height, meta.width), state


def start_stream(key: ChaosKey, burn_in: int = DEFAULT_BURN_IN) -> ChaosState:
    """Fresh chaotic state with the initial low-entropy bytes discarded."""
    return skip_keystream(key, initial_state(key), burn_in)


def encode_sequence(frames, key: ChaosKey,
                    order: str = COMPRESS_THEN_ENCRYPT,
                    burn_in: int = DEFAULT_BURN_IN,
                    first_index: int = 0) -> tuple[list[EncodedFrame], ChaosState]:
    """Encode frames in order with one continuous keystream."""
    order = normalize_order(order)
    state = start_stream(key, burn_in)
    encoded = []
    for offset, frame in enumerate(frames):
        enc, state = encode_frame(frame, state, key, order,
                                  frame_index=first_index + offset)
        encoded.append(enc)
    return encoded, state


def decode_sequence(encoded, key: ChaosKey, meta: FrameMeta,
                    burn_in: int = DEFAULT_BURN_IN) -> tuple[np.ndarray, ChaosState]:
    """Invert encode_sequence; returns frames stacked (n, height, width)."""
    state = start_stream(key, burn_in)
    frames = np.empty((len(encoded), meta.height, meta.width), dtype=np.uint8)
    for i, enc in enumerate(encoded):
        frames[i], state = decode_frame(enc, state, key, meta)
    return frames, state
