"""Logistic-map keystream: key validation, iteration, and byte emission.

The secret is a (nu0, lam) pair driving the recurrence nu' = lam*nu*(1-nu).
Every advance is evaluated in binary64 with a pinned operation order
(t1 = lam*nu; t2 = 1-nu; nu' = t1*t2) so two hosts produce bit-identical
orbits, which the decoder depends on.  Keystream bytes are
floor(nu * 1e8) mod 256, taken after each advance.

Keys are screened at validation time: a 1024-step burn-in must stay strictly
inside (0, 1) and never return to nu0.  This rejects seeds such as nu0=0.5
or nu0=0.75 at lam=4.0, for which the orbit collapses or pins to a fixed
point and the cipher degenerates.
"""

from dataclasses import dataclass
import hashlib
import struct

import numpy as np

from . import _kernels
from .errors import (DegenerateOrbit, KeyDerivationFailed, KeyFileError,
                     KeyOutOfRange)

LAMBDA_MIN = 3.57
LAMBDA_MAX = 4.0
SCREEN_ITERATIONS = 1024

# Derived per-chunk seeds are spread with the inverse golden ratio and kept
# away from the interval endpoints.
_PHI_INVERSE = 0.6180339887498949
_NU_MARGIN = 2.0 ** -20
_REHASH_STRIDE = 1 << 16
_DERIVE_ATTEMPTS = 8


@dataclass(frozen=True)
class ChaosKey:
    """Secret parameters: initial state nu0 in (0,1), control lam in [3.57, 4]."""

    nu0: float
    lam: float


@dataclass(frozen=True)
class ChaosState:
    """Current orbit value and how many advances produced it."""

    nu: float
    steps: int = 0


def initial_state(key: ChaosKey) -> ChaosState:
    return ChaosState(key.nu0, 0)


def validate_key(key: ChaosKey) -> ChaosKey:
    """Range-check the key and screen its orbit; returns the key unchanged.

    Raises KeyOutOfRange for parameters outside the chaotic regime and
    DegenerateOrbit when the 1024-step burn-in collapses, goes non-finite,
    or revisits nu0 (fixed point / short cycle).
    """
    nu0, lam = key.nu0, key.lam
    if not (0.0 < nu0 < 1.0):
        raise KeyOutOfRange(f"nu0 must be strictly inside (0, 1), got {nu0!r}")
    if not (LAMBDA_MIN <= lam <= LAMBDA_MAX):
        raise KeyOutOfRange(
            f"lambda must lie in [{LAMBDA_MIN}, {LAMBDA_MAX}], got {lam!r}")
    status, step = _kernels.logistic_screen(nu0, lam, SCREEN_ITERATIONS)
    if status == 1:
        raise DegenerateOrbit(
            f"orbit left (0, 1) at burn-in step {step + 1} for key {key}")
    if status == 2:
        raise DegenerateOrbit(
            f"orbit returned to nu0 at burn-in step {step + 1} for key {key}")
    return key


def advance(state: ChaosState, key: ChaosKey) -> ChaosState:
    """One logistic-map step in the pinned binary64 order."""
    t1 = key.lam * state.nu
    t2 = 1.0 - state.nu
    nu = t1 * t2
    if not (0.0 < nu < 1.0):
        raise DegenerateOrbit(
            f"advance produced {nu!r} at step {state.steps + 1}")
    return ChaosState(nu, state.steps + 1)


def keystream_byte(state: ChaosState) -> int:
    """Quantise the current state to a byte: floor(nu * 1e8) mod 256."""
    return int(state.nu * 1e8) % 256


def generate_keystream(key: ChaosKey, state: ChaosState,
                       n: int) -> tuple[np.ndarray, ChaosState]:
    """Emit n keystream bytes, advancing once per byte.

    Returns the bytes and the final state so a stream can continue across
    frames.  n = 0 returns an empty array and the state untouched.
    """
    out = np.empty(n, dtype=np.uint8)
    if n == 0:
        return out, state
    nu, err = _kernels.logistic_fill(state.nu, key.lam, out)
    if err >= 0:
        raise DegenerateOrbit(
            f"orbit left (0, 1) at step {state.steps + err + 1}")
    return out, ChaosState(nu, state.steps + n)


def skip_keystream(key: ChaosKey, state: ChaosState, n: int) -> ChaosState:
    """Advance n steps discarding output (burn-in before the first frame)."""
    if n == 0:
        return state
    nu, err = _kernels.logistic_skip(state.nu, key.lam, n)
    if err >= 0:
        raise DegenerateOrbit(
            f"orbit left (0, 1) at step {state.steps + err + 1}")
    return ChaosState(nu, state.steps + n)


def derive_chunk_key(master: ChaosKey, chunk_index: int) -> ChaosKey:
    """Deterministically derive an independent key for one chunk.

    nu0 is displaced along the golden-ratio sequence and clamped away from
    the endpoints; lam is kept.  A derived key that fails the orbit screen
    is re-hashed (index += 2**16) up to 8 times.
    """
    if chunk_index < 0:
        raise KeyDerivationFailed(f"chunk index must be >= 0, got {chunk_index}")
    for attempt in range(_DERIVE_ATTEMPTS):
        idx = chunk_index + attempt * _REHASH_STRIDE
        frac = (master.nu0 + (idx + 1) * _PHI_INVERSE) % 1.0
        nu0 = min(max(frac, _NU_MARGIN), 1.0 - _NU_MARGIN)
        candidate = ChaosKey(nu0, master.lam)
        try:
            return validate_key(candidate)
        except DegenerateOrbit:
            continue
    raise KeyDerivationFailed(
        f"no valid derived key for chunk {chunk_index} "
        f"after {_DERIVE_ATTEMPTS} attempts")


def key_fingerprint(key: ChaosKey) -> str:
    """Short stable hex fingerprint of the exact key bit patterns."""
    raw = struct.pack(">dd", key.nu0, key.lam)
    return hashlib.sha256(raw).hexdigest()[:16]


# --- key file format --------------------------------------------------------
# Two lines, each "name=<16 hex digits>" holding the big-endian binary64 bit
# pattern, so the exact double round-trips through text.

def dump_key(key: ChaosKey) -> str:
    nu0_hex = struct.pack(">d", key.nu0).hex()
    lam_hex = struct.pack(">d", key.lam).hex()
    return f"nu0={nu0_hex}\nlambda={lam_hex}\n"


def load_key(text: str) -> ChaosKey:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) != 2:
        raise KeyFileError(f"expected 2 key lines, found {len(lines)}")
    values = {}
    for line in lines:
        name, sep, hexval = line.partition("=")
        if sep != "=" or name not in ("nu0", "lambda") or len(hexval) != 16:
            raise KeyFileError(f"malformed key line: {line!r}")
        try:
            (values[name],) = struct.unpack(">d", bytes.fromhex(hexval))
        except ValueError as exc:
            raise KeyFileError(f"bad hex in key line: {line!r}") from exc
    if set(values) != {"nu0", "lambda"}:
        raise KeyFileError("key file must define nu0 and lambda exactly once")
    return ChaosKey(values["nu0"], values["lambda"])


def write_key_file(key: ChaosKey, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dump_key(key))


def read_key_file(path) -> ChaosKey:
    try:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    except OSError as exc:
        raise KeyFileError(f"cannot read key file {path}: {exc}") from exc
    return load_key(text)


def random_key(rng=None) -> ChaosKey:
    """Draw a validated key with nu0 in [0.1, 0.9] and lam in [3.9, 4.0]."""
    import random as _random

    if rng is None:
        rng = _random.Random()
    for _ in range(64):
        candidate = ChaosKey(rng.uniform(0.1, 0.9), rng.uniform(3.9, 4.0))
        try:
            return validate_key(candidate)
        except (KeyOutOfRange, DegenerateOrbit):
            continue
    raise KeyDerivationFailed("could not draw a valid random key")
