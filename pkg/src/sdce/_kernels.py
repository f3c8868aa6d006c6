"""Hot loops shared by the keystream and entropy-coding modules.

Each kernel is written as plain Python over numpy arrays and compiled with
numba when available.  The uncompiled function (``.py_func`` on the numba
dispatcher, or the function itself without numba) is the bit-exact reference:
tests assert both paths agree.  No kernel allocates; callers own the buffers.

Floating-point determinism matters here: the logistic-map recurrence is
evaluated in binary64 with a pinned operation order (t1 = lam*nu,
t2 = 1 - nu, nu' = t1*t2) so that encoder and decoder regenerate identical
keystreams on any host.  numba is used without fastmath, which preserves
IEEE-754 semantics and the written operation order.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@njit(cache=True, nogil=True)
def logistic_fill(nu, lam, out):
    """Advance the logistic map once per output byte.

    Byte i is floor(nu * 1e8) mod 256 of the state after i+1 advances.
    Returns (final nu, error index); error index is -1 on success, else the
    0-based advance at which the orbit left (0, 1) or went non-finite.
    """
    n = out.shape[0]
    for i in range(n):
        t1 = lam * nu
        t2 = 1.0 - nu
        nu = t1 * t2
        if not (nu > 0.0 and nu < 1.0):
            return nu, i
        out[i] = np.uint8(int(nu * 1e8) % 256)
    return nu, -1


@njit(cache=True, nogil=True)
def logistic_skip(nu, lam, n):
    """Advance the map n times without emitting bytes; same error contract."""
    for i in range(n):
        t1 = lam * nu
        t2 = 1.0 - nu
        nu = t1 * t2
        if not (nu > 0.0 and nu < 1.0):
            return nu, i
    return nu, -1


@njit(cache=True, nogil=True)
def logistic_screen(nu0, lam, iters):
    """Burn-in screen for key validation.

    Returns (status, step): status 0 = clean orbit, 1 = collapse to {0,1} or
    non-finite, 2 = orbit returned to nu0 (fixed point or short cycle).
    """
    nu = nu0
    for i in range(iters):
        t1 = lam * nu
        t2 = 1.0 - nu
        nu = t1 * t2
        if not (nu > 0.0 and nu < 1.0):
            return 1, i
        if nu == nu0:
            return 2, i
    return 0, -1


@njit(cache=True, nogil=True)
def pack_codes(symbols, codes, lengths, out):
    """Concatenate codewords MSB-first into out; final byte zero-padded.

    Returns (bytes written, error position); error position is -1 on
    success, else the index of the first symbol with a zero code length.
    """
    acc = np.int64(0)
    nbits = np.int64(0)
    pos = 0
    for k in range(symbols.shape[0]):
        s = symbols[k]
        width = np.int64(lengths[s])
        if width == 0:
            return pos, k
        acc = (acc << width) | np.int64(codes[s])
        nbits += width
        while nbits >= 8:
            nbits -= 8
            out[pos] = np.uint8((acc >> nbits) & 0xFF)
            pos += 1
        acc &= (np.int64(1) << nbits) - np.int64(1)
    if nbits > 0:
        out[pos] = np.uint8((acc << (8 - nbits)) & 0xFF)
        pos += 1
    return pos, -1


@njit(cache=True, nogil=True)
def unpack_codes(payload, bit_length, first_code, level_counts, level_offsets,
                 symbols, n, out):
    """Decode n canonical-code symbols from an MSB-first bitstream.

    Returns (bits consumed, status): 0 = ok, 1 = bits exhausted mid-symbol,
    2 = a prefix longer than 32 bits matched no codeword.
    """
    bitpos = np.int64(0)
    for k in range(n):
        code = np.int64(0)
        width = 0
        while True:
            if bitpos >= bit_length:
                return bitpos, 1
            bit = (payload[bitpos >> 3] >> (7 - (bitpos & 7))) & 1
            bitpos += 1
            code = (code << 1) | np.int64(bit)
            width += 1
            if width > 32:
                return bitpos, 2
            idx = code - first_code[width]
            if 0 <= idx < level_counts[width]:
                out[k] = symbols[level_offsets[width] + idx]
                break
    return bitpos, 0


_ALL_KERNELS = (logistic_fill, logistic_skip, logistic_screen, pack_codes,
                unpack_codes)


def reference(kernel):
    """Return the uncompiled Python version of a kernel."""
    return getattr(kernel, "py_func", kernel)


_warmed = False


def warm_up():
    """Force-compile every kernel on tiny inputs.

    Called once before worker pools fork so children inherit compiled code
    instead of paying JIT latency per process.
    """
    global _warmed
    if _warmed or not HAVE_NUMBA:
        _warmed = True
        return
    buf = np.empty(4, dtype=np.uint8)
    logistic_fill(0.6, 3.99, buf)
    logistic_skip(0.6, 3.99, 4)
    logistic_screen(0.6, 3.99, 4)
    codes = np.zeros(256, dtype=np.uint32)
    lengths = np.zeros(256, dtype=np.uint8)
    lengths[0] = 1
    out = np.zeros(1, dtype=np.uint8)
    pack_codes(np.zeros(2, dtype=np.uint8), codes, lengths, out)
    tables = np.zeros(33, dtype=np.int64)
    counts = np.zeros(33, dtype=np.int64)
    counts[1] = 1
    unpack_codes(out, 2, tables, counts, tables, np.zeros(1, dtype=np.uint8),
                 2, np.zeros(2, dtype=np.uint8))
    _warmed = True
