"""Joint chaotic encryption and Huffman compression for grayscale video.

The encoder XORs pixel data with a logistic-map keystream and entropy-codes
it per frame (in either stage order); the decoder regenerates the identical
keystream from the key alone and inverts both stages losslessly.  Large
inputs are split into frame-aligned chunks processed in parallel under
independently derived keys.
"""

from .errors import SdceError
from .huffman import (BitStream, CodeTable, SymbolHistogram, build_code_table,
                      build_histogram, decode, encode, mean_code_length,
                      total_bits)
from .keystream import (ChaosKey, ChaosState, advance, derive_chunk_key,
                        generate_keystream, initial_state, keystream_byte,
                        read_key_file, validate_key, write_key_file)
from .pipeline import (COMPRESS_THEN_ENCRYPT, DEFAULT_BURN_IN,
                       ENCRYPT_THEN_COMPRESS, EncodedFrame, FrameMeta,
                       decode_frame, decode_sequence, decrypt_frame,
                       encode_frame, encode_sequence, encrypt_frame,
                       to_grayscale)
from .video import RawVideo, open_video, parse_y4m, read_rgv, synth_corpus, write_rgv

__version__ = "0.1.0"

__all__ = [
    "SdceError",
    "BitStream", "CodeTable", "SymbolHistogram", "build_code_table",
    "build_histogram", "decode", "encode", "mean_code_length", "total_bits",
    "ChaosKey", "ChaosState", "advance", "derive_chunk_key",
    "generate_keystream", "initial_state", "keystream_byte", "read_key_file",
    "validate_key", "write_key_file",
    "COMPRESS_THEN_ENCRYPT", "DEFAULT_BURN_IN", "ENCRYPT_THEN_COMPRESS",
    "EncodedFrame", "FrameMeta", "decode_frame", "decode_sequence",
    "decrypt_frame", "encode_frame", "encode_sequence", "encrypt_frame",
    "to_grayscale",
    "RawVideo", "open_video", "parse_y4m", "read_rgv", "synth_corpus",
    "write_rgv",
    "__version__",
]
