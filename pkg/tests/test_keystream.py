import math
import struct

import numpy as np
import pytest

from conftest import GOLDEN_KEY, GOLDEN_KEYSTREAM_64, GOLDEN_STATE_64_HEX
from oracles import oracle_advance, oracle_keystream, oracle_orbit_screen

from sdce import _kernels
from sdce.errors import (DegenerateOrbit, KeyDerivationFailed, KeyFileError,
                         KeyOutOfRange)
from sdce.keystream import (ChaosKey, ChaosState, advance, derive_chunk_key,
                            dump_key, generate_keystream, initial_state,
                            key_fingerprint, keystream_byte, load_key,
                            random_key, read_key_file, skip_keystream,
                            validate_key, write_key_file)

CHI2_CRITICAL_255DOF_P001 = 330.52  # alpha = 0.001


def flip_low_bit(x: float) -> float:
    (bits,) = struct.unpack("<Q", struct.pack("<d", x))
    return struct.unpack("<d", struct.pack("<Q", bits ^ 1))[0]


class TestValidateKey:
    def test_collapse_seed_rejected(self):
        # 4 * 0.5 * 0.5 = 1.0, then the orbit is stuck at 0
        with pytest.raises(DegenerateOrbit):
            validate_key(ChaosKey(0.5, 4.0))

    def test_fixed_point_rejected(self):
        # 4 * 0.75 * 0.25 = 0.75 exactly in binary64
        with pytest.raises(DegenerateOrbit):
            validate_key(ChaosKey(0.75, 4.0))

    def test_golden_key_valid(self):
        assert validate_key(GOLDEN_KEY) == GOLDEN_KEY

    def test_golden_key_screen_matches_oracle(self):
        # independent high-precision screen over the same 1024 steps
        assert oracle_orbit_screen(0.6, 3.99, 1024) == "ok"

    def test_oracle_agrees_on_rejections(self):
        assert oracle_orbit_screen(0.5, 4.0, 1024) == "collapse"
        assert oracle_orbit_screen(0.75, 4.0, 1024) == "cycle"

    @pytest.mark.parametrize("nu0", [0.0, 1.0, -0.25, 1.5, float("nan")])
    def test_nu0_out_of_range(self, nu0):
        with pytest.raises(KeyOutOfRange):
            validate_key(ChaosKey(nu0, 3.99))

    @pytest.mark.parametrize("lam", [3.5, 3.5699, 4.0001, 0.0, float("nan")])
    def test_lambda_out_of_range(self, lam):
        with pytest.raises(KeyOutOfRange):
            validate_key(ChaosKey(0.6, lam))

    def test_boundary_lambdas_accepted(self):
        validate_key(ChaosKey(0.6, 3.57))
        validate_key(ChaosKey(0.6, 4.0))


class TestAdvance:
    def test_exact_binary64_case(self):
        # 4 * 0.6 * 0.4 is exactly representable
        state = advance(ChaosState(0.6), ChaosKey(0.6, 4.0))
        assert state.nu == 0.96
        assert state.steps == 1

    def test_derived_case_against_oracle(self):
        state = advance(ChaosState(0.96), ChaosKey(0.96, 4.0))
        expected = oracle_advance(0.96, 4.0)
        assert state.nu == expected
        # frozen from the oracle; decimal value prints as 0.1536...
        assert state.nu == float.fromhex("0x1.3a92a30553266p-3")
        assert abs(state.nu - 0.1536) < 1e-12

    def test_determinism_across_repeats(self):
        key = ChaosKey(0.6, 3.99)
        a = advance(advance(ChaosState(key.nu0), key), key)
        b = advance(advance(ChaosState(key.nu0), key), key)
        assert struct.pack("<d", a.nu) == struct.pack("<d", b.nu)

    def test_degenerate_advance_raises(self):
        with pytest.raises(DegenerateOrbit):
            advance(ChaosState(0.5), ChaosKey(0.5, 4.0))


class TestKeystreamByte:
    def test_documented_value(self):
        # floor(0.123456789e8) = 12345678; 12345678 - 48225*256 = 78
        assert keystream_byte(ChaosState(0.123456789)) == 78

    def test_multiple_of_256_maps_to_zero(self):
        nu = 256.0 / 1e8
        assert math.floor(nu * 1e8) == 256
        assert keystream_byte(ChaosState(nu)) == 0

    def test_matches_oracle_over_orbit(self):
        key = ChaosKey(0.6, 3.99)
        state = initial_state(key)
        expected, _ = oracle_keystream(key.nu0, key.lam, 32)
        got = []
        for _ in range(32):
            state = advance(state, key)
            got.append(keystream_byte(state))
        assert got == expected


class TestGenerateKeystream:
    def test_golden_vector_is_reproduced(self, golden_key):
        ks, state = generate_keystream(golden_key, initial_state(golden_key), 64)
        assert ks.tobytes() == GOLDEN_KEYSTREAM_64
        assert state.nu.hex() == GOLDEN_STATE_64_HEX
        assert state.steps == 64

    def test_golden_vector_rederives_from_oracle(self, golden_key):
        expected, nu_end = oracle_keystream(golden_key.nu0, golden_key.lam, 64)
        assert bytes(expected) == GOLDEN_KEYSTREAM_64
        assert nu_end.hex() == GOLDEN_STATE_64_HEX

    def test_zero_length(self, golden_key):
        state0 = initial_state(golden_key)
        ks, state = generate_keystream(golden_key, state0, 0)
        assert ks.size == 0
        assert state == state0

    def test_concatenation_property(self, golden_key):
        state0 = initial_state(golden_key)
        a, mid = generate_keystream(golden_key, state0, 1000)
        b, end = generate_keystream(golden_key, mid, 2345)
        whole, end2 = generate_keystream(golden_key, state0, 3345)
        assert np.array_equal(np.concatenate([a, b]), whole)
        assert end == end2

    def test_matches_single_step_walk(self, golden_key):
        ks, _ = generate_keystream(golden_key, initial_state(golden_key), 100)
        state = initial_state(golden_key)
        for i in range(100):
            state = advance(state, golden_key)
            assert ks[i] == keystream_byte(state)

    def test_skip_equals_generate_and_discard(self, golden_key):
        state0 = initial_state(golden_key)
        _, via_generate = generate_keystream(golden_key, state0, 777)
        via_skip = skip_keystream(golden_key, state0, 777)
        assert via_skip == via_generate

    def test_uniformity_chi_square(self, golden_key):
        state = skip_keystream(golden_key, initial_state(golden_key), 64)
        ks, _ = generate_keystream(golden_key, state, 1_000_000)
        counts = np.bincount(ks, minlength=256)
        expected = ks.size / 256.0
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < CHI2_CRITICAL_255DOF_P001

    def test_sensitivity_to_one_key_bit(self, golden_key):
        other = validate_key(ChaosKey(flip_low_bit(golden_key.nu0),
                                      golden_key.lam))
        n = 100_000
        a, _ = generate_keystream(golden_key, initial_state(golden_key), n)
        b, _ = generate_keystream(other, initial_state(other), n)
        diff = np.unpackbits(a[64:] ^ b[64:]).sum()
        assert diff / (8 * (n - 64)) >= 0.45

    def test_state_range_over_random_keys(self):
        # skip_keystream hard-errors if the orbit ever leaves (0, 1)
        rng = np.random.default_rng(20240817)
        checked = 0
        while checked < 1000:
            key = ChaosKey(rng.uniform(0.01, 0.99), rng.uniform(3.57, 4.0))
            try:
                validate_key(key)
            except DegenerateOrbit:
                continue
            state = skip_keystream(key, initial_state(key), 100_000)
            assert 0.0 < state.nu < 1.0
            checked += 1

    def test_kernel_matches_python_reference(self, golden_key):
        n = 10_000
        fast = np.empty(n, dtype=np.uint8)
        slow = np.empty(n, dtype=np.uint8)
        nu_fast, err_fast = _kernels.logistic_fill(
            golden_key.nu0, golden_key.lam, fast)
        nu_slow, err_slow = _kernels.reference(_kernels.logistic_fill)(
            golden_key.nu0, golden_key.lam, slow)
        assert err_fast == err_slow == -1
        assert nu_fast == nu_slow
        assert np.array_equal(fast, slow)

    def test_degenerate_propagates(self):
        key = ChaosKey(0.5, 4.0)  # not validated on purpose
        with pytest.raises(DegenerateOrbit):
            generate_keystream(key, initial_state(key), 16)

    def test_package_works_without_numba(self):
        # the import guard falls back to the pure-Python kernels
        import subprocess
        import sys

        code = (
            "import sys\n"
            "sys.modules['numba'] = None\n"
            "import numpy as np\n"
            "from sdce import _kernels\n"
            "assert not _kernels.HAVE_NUMBA\n"
            "from sdce.keystream import ChaosKey, initial_state, "
            "generate_keystream, validate_key\n"
            "key = validate_key(ChaosKey(0.6, 3.99))\n"
            "ks, _ = generate_keystream(key, initial_state(key), 64)\n"
            "print(ks.tobytes().hex())\n"
        )
        proc = subprocess.run([sys.executable, "-c", code],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.strip() == GOLDEN_KEYSTREAM_64.hex()


class TestDeriveChunkKey:
    def test_deterministic(self, golden_key):
        a = derive_chunk_key(golden_key, 17)
        b = derive_chunk_key(golden_key, 17)
        assert a == b

    def test_distinct_over_ten_thousand_indices(self, golden_key):
        seen = set()
        for index in range(10_000):
            derived = derive_chunk_key(golden_key, index)
            seen.add(struct.pack("<d", derived.nu0))
        assert len(seen) == 10_000

    def test_always_valid_or_raises(self, golden_key):
        for index in (0, 1, 255, 9999):
            derived = derive_chunk_key(golden_key, index)
            assert validate_key(derived) == derived
            assert derived.lam == golden_key.lam

    def test_negative_index_rejected(self, golden_key):
        with pytest.raises(KeyDerivationFailed):
            derive_chunk_key(golden_key, -1)

    def test_fingerprints_differ(self, golden_key):
        fps = {key_fingerprint(derive_chunk_key(golden_key, i))
               for i in range(32)}
        assert len(fps) == 32


class TestKeyFile:
    def test_round_trip_exact_bits(self, tmp_path):
        key = ChaosKey(float.fromhex("0x1.3333333333333p-1"), 3.99)
        path = tmp_path / "k.key"
        write_key_file(key, path)
        loaded = read_key_file(path)
        assert struct.pack("<d", loaded.nu0) == struct.pack("<d", key.nu0)
        assert struct.pack("<d", loaded.lam) == struct.pack("<d", key.lam)

    def test_file_format_shape(self):
        text = dump_key(ChaosKey(0.6, 3.99))
        lines = text.strip().split("\n")
        assert lines[0].startswith("nu0=") and len(lines[0]) == 4 + 16
        assert lines[1].startswith("lambda=") and len(lines[1]) == 7 + 16

    @pytest.mark.parametrize("text", [
        "",
        "nu0=zz\n",
        "nu0=3fe3333333333333\n",
        "nu0=3fe3333333333333\nlambda=xyz\n",
        "nu0=3fe3333333333333\nnu0=3fe3333333333333\n",
        "nu0=3fe333333333333\nlambda=400fef9db22d0e56\n",
    ])
    def test_malformed_files_rejected(self, text):
        with pytest.raises(KeyFileError):
            load_key(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(KeyFileError):
            read_key_file(tmp_path / "absent.key")


class TestRandomKey:
    def test_seeded_determinism(self):
        import random

        a = random_key(random.Random(7))
        b = random_key(random.Random(7))
        assert a == b

    def test_always_validates(self):
        import random

        for seed in range(25):
            key = random_key(random.Random(seed))
            assert validate_key(key) == key
            assert 0.1 <= key.nu0 <= 0.9
            assert 3.9 <= key.lam <= 4.0
