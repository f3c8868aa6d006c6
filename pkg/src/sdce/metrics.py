"""Run assessment: fidelity, loss, entropy, avalanche, throughput, rate.

All metric functions are pure.  The avalanche protocol deserves a note:
under XOR stream encryption, flipping one plaintext bit flips exactly one
ciphertext bit before compression, so a meaningful avalanche number needs a
key perturbation.  The harness here flips the lowest mantissa bit of nu0,
re-encrypts, and compares the two ciphertext streams; a plaintext-bit
variant is provided as well, clearly separated, for the comparison's sake.
"""

from dataclasses import dataclass, fields
import csv
import math
import struct

import numpy as np

from . import pipeline
from .errors import (EmptyInput, LengthMismatch, NonPositiveProbability,
                     ShapeMismatch, ZeroDuration, ZeroInput)
from .keystream import ChaosKey

_POPCOUNT = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None],
                          axis=1).sum(axis=1).astype(np.int64)


@dataclass
class MetricsReport:
    """One row of assessment numbers; absent measurements stay None."""

    mse: float | None = None
    psnr: float | None = None
    pil: float | None = None
    entropy: float | None = None
    avalanche: float | None = None
    throughput_encode: float | None = None
    throughput_decode: float | None = None
    bpc: float | None = None
    compression_pct: float | None = None
    cel: float | None = None

    @classmethod
    def columns(cls) -> tuple:
        return tuple(f.name for f in fields(cls))

    def to_row(self) -> list:
        row = []
        for name in self.columns():
            value = getattr(self, name)
            if value is None:
                row.append("")
            elif math.isinf(value):
                row.append("inf")
            else:
                row.append(repr(float(value)))
        return row

    @classmethod
    def from_row(cls, row) -> "MetricsReport":
        values = {}
        for name, cell in zip(cls.columns(), row):
            values[name] = None if cell == "" else float(cell)
        return cls(**values)


def write_csv(path, reports) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(MetricsReport.columns())
        for report in reports:
            writer.writerow(report.to_row())


def read_csv(path) -> list:
    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != MetricsReport.columns():
            raise ValueError(f"unexpected CSV columns {header}")
        return [MetricsReport.from_row(row) for row in reader]


def _as_array(x) -> np.ndarray:
    if isinstance(x, (bytes, bytearray, memoryview)):
        return np.frombuffer(x, dtype=np.uint8)
    return np.asarray(x)


def mse(a, b) -> float:
    """Mean squared error over all samples."""
    a = _as_array(a)
    b = _as_array(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} differ")
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(a, b, max_value: float = 255.0) -> float:
    """10*log10(peak^2 / MSE) in dB; +inf for identical inputs."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10((max_value * max_value) / err)


def pil(input_bytes: int, decompressed_bytes: int) -> float:
    """Percentage of information loss between byte counts."""
    if input_bytes < 1:
        raise ZeroInput("input size must be >= 1 byte")
    return (input_bytes - decompressed_bytes) / input_bytes * 100.0


def entropy(data) -> float:
    """Shannon entropy in bits/symbol over the present byte values."""
    arr = _as_array(data).reshape(-1)
    if arr.size == 0:
        raise EmptyInput("entropy of empty data is undefined")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected bytes, got dtype {arr.dtype}")
    counts = np.bincount(arr, minlength=256)
    p = counts[counts > 0] / arr.size
    return float(-(p * np.log2(p)).sum())


def hamming_bits(a, b) -> int:
    a = _as_array(a).reshape(-1)
    b = _as_array(b).reshape(-1)
    if a.size != b.size:
        raise LengthMismatch(f"lengths {a.size} and {b.size} differ")
    return int(_POPCOUNT[np.bitwise_xor(a, b)].sum())


def avalanche(base_cipher, perturbed_cipher) -> float:
    """Percent of differing bits between two equal-length byte streams."""
    a = _as_array(base_cipher).reshape(-1)
    b = _as_array(perturbed_cipher).reshape(-1)
    if a.size != b.size:
        raise LengthMismatch(f"lengths {a.size} and {b.size} differ")
    if a.size == 0:
        raise EmptyInput("avalanche of empty streams is undefined")
    return hamming_bits(a, b) / (8.0 * a.size) * 100.0


def throughput(byte_count: int, seconds: float) -> float:
    """Decimal megabytes per second (1 MB = 1e6 bytes)."""
    if seconds <= 0:
        raise ZeroDuration(f"duration must be positive, got {seconds}")
    return byte_count / 1e6 / seconds


def bpc(compressed_bytes: int, input_bytes: int) -> float:
    """Output bits per input symbol: compressed/input * 8."""
    if input_bytes < 1:
        raise ZeroInput("input size must be >= 1 byte")
    return compressed_bytes / input_bytes * 8.0


def compression_pct(input_bytes: int, compressed_bytes: int) -> float:
    """(1 - compressed/input) * 100."""
    if input_bytes < 1:
        raise ZeroInput("input size must be >= 1 byte")
    return (1.0 - compressed_bytes / input_bytes) * 100.0


def categorical_entropy_loss(sent, received) -> float:
    """-sum_ij sent_ij * log10(received_ij) over matching matrices."""
    s = np.asarray(sent, dtype=np.float64)
    r = np.asarray(received, dtype=np.float64)
    if s.shape != r.shape:
        raise ShapeMismatch(f"shapes {s.shape} and {r.shape} differ")
    if np.any(r <= 0.0) or np.any(r > 1.0):
        raise NonPositiveProbability("received entries must lie in (0, 1]")
    return float(-(s * np.log10(r)).sum())


# --- avalanche measurement protocol ------------------------------------------

def flip_key_bit(key: ChaosKey, bit: int = 0) -> ChaosKey:
    """Flip one mantissa bit of nu0 (bit 0 = lowest-order)."""
    (pattern,) = struct.unpack("<Q", struct.pack("<d", key.nu0))
    flipped = struct.unpack("<d", struct.pack("<Q", pattern ^ (1 << bit)))[0]
    return ChaosKey(flipped, key.lam)


def cipher_stream(frames, key: ChaosKey, order: str,
                  burn_in: int = pipeline.DEFAULT_BURN_IN) -> bytes:
    """The encrypted byte stream a given key produces for these frames.

    For encrypt-then-compress this is the XORed pixel stream (the data the
    entropy stage then models); for compress-then-encrypt it is the XORed
    payload stream (what the container transports).  Both have key-independent
    length, which keeps perturbed runs comparable.
    """
    order = pipeline.normalize_order(order)
    if order == pipeline.ENCRYPT_THEN_COMPRESS:
        state = pipeline.start_stream(key, burn_in)
        parts = []
        for frame in frames:
            cipher, state = pipeline.encrypt_frame(frame, state, key)
            parts.append(cipher.tobytes())
        return b"".join(parts)
    encoded, _ = pipeline.encode_sequence(frames, key, order, burn_in)
    return b"".join(enc.payload.payload for enc in encoded)


def key_avalanche(frames, key: ChaosKey, order: str,
                  burn_in: int = pipeline.DEFAULT_BURN_IN,
                  bit: int = 0) -> float:
    """Avalanche percent from flipping one low-order key bit."""
    base = cipher_stream(frames, key, order, burn_in)
    perturbed = cipher_stream(frames, flip_key_bit(key, bit), order, burn_in)
    return avalanche(base, perturbed)


def plaintext_avalanche(frames, key: ChaosKey, order: str,
                        burn_in: int = pipeline.DEFAULT_BURN_IN) -> float:
    """Avalanche percent from flipping one bit of the first pixel.

    Streams can differ in length under compress-then-encrypt (the code
    changes); the comparison then covers the common prefix.
    """
    frames = np.asarray(frames)
    altered = frames.copy()
    altered.reshape(-1)[0] ^= 1
    base = cipher_stream(frames, key, order, burn_in)
    perturbed = cipher_stream(altered, key, order, burn_in)
    n = min(len(base), len(perturbed))
    return avalanche(base[:n], perturbed[:n])
