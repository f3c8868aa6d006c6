import math
import os
import re

import numpy as np
import pytest

from sdce.cli import main, parse_size, resolve_workers
from sdce.keystream import (load_key, random_key, read_key_file,
                            write_key_file)
from sdce.metrics import read_csv
from sdce.pipeline import FrameMeta
from sdce.video import read_rgv, synth_corpus, write_rgv


@pytest.fixture()
def keyfile(tmp_path, golden_key):
    path = tmp_path / "golden.key"
    write_key_file(golden_key, path)
    return str(path)


@pytest.fixture()
def noise_rgv(tmp_path):
    vid = synth_corpus("noise", FrameMeta(256, 256, 25, 1, 18), seed=77)
    path = tmp_path / "noise.rgv"
    write_rgv(vid, path)
    return str(path), vid


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParseHelpers:
    @pytest.mark.parametrize("text,expected", [
        ("1048576", 1048576),
        ("64MiB", 64 * 1024 * 1024),
        ("64M", 64 * 1024 * 1024),
        ("1MB", 10 ** 6),
        ("2g", 2 * 1024 ** 3),
        ("512k", 512 * 1024),
    ])
    def test_parse_size(self, text, expected):
        assert parse_size(text) == expected

    def test_parse_size_rejects_garbage(self):
        import argparse

        with pytest.raises(argparse.ArgumentTypeError):
            parse_size("lots")

    def test_env_overrides_flag(self, monkeypatch):
        monkeypatch.setenv("SDCE_WORKERS", "3")
        assert resolve_workers(8) == 3
        monkeypatch.delenv("SDCE_WORKERS")
        assert resolve_workers(8) == 8
        assert resolve_workers(None) >= 1


class TestKeygen:
    def test_same_seed_identical_files(self, tmp_path, capsys):
        a, b = tmp_path / "a.key", tmp_path / "b.key"
        assert main(["keygen", "--out", str(a), "--seed", "5"]) == 0
        assert main(["keygen", "--out", str(b), "--seed", "5"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_different_seeds_differ(self, tmp_path, capsys):
        a, b = tmp_path / "a.key", tmp_path / "b.key"
        main(["keygen", "--out", str(a), "--seed", "1"])
        main(["keygen", "--out", str(b), "--seed", "2"])
        assert a.read_bytes() != b.read_bytes()

    def test_generated_key_validates(self, tmp_path, capsys):
        path = tmp_path / "k.key"
        main(["keygen", "--out", str(path), "--seed", "11"])
        from sdce.keystream import validate_key

        key = read_key_file(path)
        assert validate_key(key) == key

    def test_thousand_seeds_collision_free(self):
        import random

        seen = set()
        for seed in range(1000):
            key = random_key(random.Random(seed))
            seen.add((key.nu0, key.lam))
        assert len(seen) == 1000


class TestEncodeDecode:
    def test_round_trip_via_cli(self, capsys, tmp_path, keyfile, noise_rgv):
        src, vid = noise_rgv
        enc_dir = str(tmp_path / "enc")
        code, out, err = run(capsys, "encode", src, "--key", keyfile,
                             "--out", enc_dir, "--chunk-size", "1MiB",
                             "--workers", "2")
        assert code == 0, err
        assert "throughput:" in out and "bpc:" in out
        code, out, err = run(capsys, "decode",
                             os.path.join(enc_dir, "manifest.txt"),
                             "--key", keyfile,
                             "--out", str(tmp_path / "back.rgv"))
        assert code == 0, err
        back = read_rgv(tmp_path / "back.rgv")
        assert np.array_equal(back.frames, vid.frames)

    def test_pgm_output_mode(self, capsys, tmp_path, keyfile):
        vid = synth_corpus("checker", FrameMeta(64, 64, 25, 1, 3), seed=0)
        src = tmp_path / "v.rgv"
        write_rgv(vid, src)
        enc_dir = str(tmp_path / "enc")
        assert run(capsys, "encode", str(src), "--key", keyfile, "--out",
                   enc_dir, "--chunk-size", "1MiB")[0] == 0
        code, out, err = run(capsys, "decode",
                             os.path.join(enc_dir, "manifest.txt"),
                             "--key", keyfile, "--pgm",
                             "--out", str(tmp_path / "frames"))
        assert code == 0, err
        files = sorted(os.listdir(tmp_path / "frames"))
        assert files == [f"frame_{i:06d}.pgm" for i in range(3)]

    def test_y4m_input(self, capsys, tmp_path, keyfile):
        from conftest import make_y4m

        rng = np.random.default_rng(8)
        frames = rng.integers(0, 256, size=(4, 32, 32), dtype=np.uint8)
        src = tmp_path / "v.y4m"
        src.write_bytes(make_y4m(32, 32, frames, colorspace="420"))
        enc_dir = str(tmp_path / "enc")
        assert run(capsys, "encode", str(src), "--key", keyfile,
                   "--out", enc_dir)[0] == 0
        assert run(capsys, "decode", os.path.join(enc_dir, "manifest.txt"),
                   "--key", keyfile,
                   "--out", str(tmp_path / "o.rgv"))[0] == 0
        assert np.array_equal(read_rgv(tmp_path / "o.rgv").frames, frames)

    def test_etc_order_noise_bpc_near_eight(self, capsys, tmp_path, keyfile,
                                            noise_rgv):
        src, _ = noise_rgv
        code, out, _ = run(capsys, "encode", src, "--key", keyfile,
                           "--out", str(tmp_path / "enc_etc"),
                           "--order", "etc", "--chunk-size", "1MiB")
        assert code == 0
        rate = float(re.search(r"bpc: ([0-9.]+)", out).group(1))
        assert 7.9 <= rate <= 8.1

    def test_cte_order_constant_bpc_low(self, capsys, tmp_path, keyfile):
        vid = synth_corpus("constant", FrameMeta(256, 256, 25, 1, 16),
                           seed=128)
        src = tmp_path / "c.rgv"
        write_rgv(vid, src)
        code, out, _ = run(capsys, "encode", str(src), "--key", keyfile,
                           "--out", str(tmp_path / "enc_c"),
                           "--order", "cte", "--chunk-size", "1MiB")
        assert code == 0
        rate = float(re.search(r"bpc: ([0-9.]+)", out).group(1))
        assert rate <= 1.2


class TestExitCodes:
    def test_missing_input_is_io_error(self, capsys, tmp_path, keyfile):
        code, _, err = run(capsys, "encode", str(tmp_path / "nope.rgv"),
                           "--key", keyfile, "--out", str(tmp_path / "e"))
        assert code == 4

    def test_garbage_input_is_parse_error(self, capsys, tmp_path, keyfile):
        bad = tmp_path / "bad.rgv"
        bad.write_bytes(b"this is not video data at all")
        code, _, err = run(capsys, "encode", str(bad), "--key", keyfile,
                           "--out", str(tmp_path / "e"))
        assert code == 2

    def test_bad_key_file_is_key_error(self, capsys, tmp_path, noise_rgv):
        src, _ = noise_rgv
        bad = tmp_path / "bad.key"
        bad.write_text("nu0=nothex\n")
        code, _, err = run(capsys, "encode", src, "--key", str(bad),
                           "--out", str(tmp_path / "e"))
        assert code == 3

    def test_out_of_range_key_is_key_error(self, capsys, tmp_path, noise_rgv):
        from sdce.keystream import ChaosKey, dump_key

        src, _ = noise_rgv
        bad = tmp_path / "oor.key"
        bad.write_text(dump_key(ChaosKey(0.6, 2.0)))
        code, _, err = run(capsys, "encode", src, "--key", str(bad),
                           "--out", str(tmp_path / "e"))
        assert code == 3

    def test_small_chunk_size_is_parse_error(self, capsys, tmp_path, keyfile,
                                             noise_rgv):
        src, _ = noise_rgv
        code, _, err = run(capsys, "encode", src, "--key", keyfile,
                           "--out", str(tmp_path / "e"),
                           "--chunk-size", "65536")
        assert code == 2

    def test_corrupt_chunk_decode_exit_5(self, capsys, tmp_path, keyfile,
                                         noise_rgv):
        src, _ = noise_rgv
        enc_dir = tmp_path / "enc"
        run(capsys, "encode", src, "--key", keyfile, "--out", str(enc_dir),
            "--chunk-size", "1MiB")
        chunk = enc_dir / "chunk_00000.sdce"
        blob = bytearray(chunk.read_bytes())
        blob[100] ^= 0xFF
        chunk.write_bytes(bytes(blob))
        code, _, err = run(capsys, "decode", str(enc_dir / "manifest.txt"),
                           "--key", keyfile,
                           "--out", str(tmp_path / "x.rgv"))
        assert code == 5
        assert "0" in err  # names the chunk

    def test_missing_chunk_decode_exit_5(self, capsys, tmp_path, keyfile,
                                         noise_rgv):
        src, _ = noise_rgv
        enc_dir = tmp_path / "enc2"
        run(capsys, "encode", src, "--key", keyfile, "--out", str(enc_dir),
            "--chunk-size", "1MiB")
        (enc_dir / "chunk_00001.sdce").unlink()
        code, _, err = run(capsys, "decode", str(enc_dir / "manifest.txt"),
                           "--key", keyfile,
                           "--out", str(tmp_path / "x.rgv"))
        assert code == 5
        assert "1" in err

    def test_metrics_shape_mismatch_exit_2(self, capsys, tmp_path):
        a = synth_corpus("noise", FrameMeta(16, 16, 25, 1, 2), seed=1)
        b = synth_corpus("noise", FrameMeta(8, 8, 25, 1, 2), seed=1)
        pa, pb = tmp_path / "a.rgv", tmp_path / "b.rgv"
        write_rgv(a, pa)
        write_rgv(b, pb)
        code, _, err = run(capsys, "metrics", "--original", str(pa),
                           "--decoded", str(pb))
        assert code == 2


class TestMetricsCommand:
    def test_self_comparison(self, capsys, tmp_path, noise_rgv):
        src, _ = noise_rgv
        report_path = tmp_path / "report.csv"
        code, out, _ = run(capsys, "metrics", "--original", src,
                           "--decoded", src, "--report", str(report_path))
        assert code == 0
        assert "psnr: inf" in out
        assert "pil: 0.0" in out
        (report,) = read_csv(report_path)
        assert report.psnr == math.inf
        assert report.pil == 0.0
        assert report.mse == 0.0

    def test_full_run_with_cipher(self, capsys, tmp_path, keyfile, noise_rgv):
        src, vid = noise_rgv
        enc_dir = str(tmp_path / "enc")
        run(capsys, "encode", src, "--key", keyfile, "--out", enc_dir,
            "--chunk-size", "1MiB")
        run(capsys, "decode", os.path.join(enc_dir, "manifest.txt"),
            "--key", keyfile, "--out", str(tmp_path / "back.rgv"))
        report_path = tmp_path / "r.csv"
        code, out, _ = run(capsys, "metrics", "--original", src,
                           "--decoded", str(tmp_path / "back.rgv"),
                           "--cipher", os.path.join(enc_dir, "manifest.txt"),
                           "--encode-seconds", "2.0",
                           "--decode-seconds", "1.0",
                           "--report", str(report_path))
        assert code == 0
        (report,) = read_csv(report_path)
        assert report.pil == 0.0
        assert report.psnr == math.inf
        assert report.entropy is not None and report.entropy >= 7.7
        assert report.bpc is not None and report.bpc > 7.9
        assert report.throughput_encode is not None
        assert report.throughput_decode is not None

    def test_wrong_key_checker_decodes_scrambled(self, capsys, tmp_path):
        # checker frames use 1-bit codes, so a wrong key still decodes
        # structurally in compress-then-encrypt order
        vid = synth_corpus("checker", FrameMeta(128, 128, 25, 1, 4), seed=0)
        src = tmp_path / "c.rgv"
        write_rgv(vid, src)
        k1, k2 = tmp_path / "a.key", tmp_path / "b.key"
        main(["keygen", "--out", str(k1), "--seed", "100"])
        main(["keygen", "--out", str(k2), "--seed", "200"])
        capsys.readouterr()
        enc_dir = str(tmp_path / "enc")
        assert run(capsys, "encode", str(src), "--key", str(k1), "--out",
                   enc_dir, "--order", "cte", "--chunk-size", "1MiB")[0] == 0
        code, _, err = run(capsys, "decode",
                           os.path.join(enc_dir, "manifest.txt"),
                           "--key", str(k2),
                           "--out", str(tmp_path / "scrambled.rgv"))
        assert code == 0, err
        report_path = tmp_path / "r.csv"
        code, out, _ = run(capsys, "metrics", "--original", str(src),
                           "--decoded", str(tmp_path / "scrambled.rgv"),
                           "--report", str(report_path))
        assert code == 0
        (report,) = read_csv(report_path)
        assert report.psnr < 10.0


class TestBench:
    def test_smoke_and_determinism(self, capsys, tmp_path, keyfile):
        args = ["bench", "--kind", "checker", "--width", "128", "--height",
                "128", "--frames", "8", "--key", keyfile,
                "--chunk-size", "1MiB", "--workers-list", "1,2",
                "--order", "both"]
        code, out1, _ = run(capsys, *args)
        assert code == 0
        code, out2, _ = run(capsys, *args)
        assert code == 0

        def stable_columns(text):
            rows = []
            for line in text.splitlines()[1:]:
                parts = line.split()
                if len(parts) == 8:
                    # workers, order, bpc, entropy, avalanches
                    rows.append((parts[0], parts[1], parts[4], parts[5],
                                 parts[6], parts[7]))
            return rows

        rows1, rows2 = stable_columns(out1), stable_columns(out2)
        assert rows1 and rows1 == rows2
        orders = {r[1] for r in rows1}
        assert orders == {"etc", "cte"}

    def test_report_csv(self, capsys, tmp_path, keyfile):
        report_path = tmp_path / "bench.csv"
        code, _, _ = run(capsys, "bench", "--kind", "constant", "--width",
                         "128", "--height", "128", "--frames", "8",
                         "--key", keyfile, "--chunk-size", "1MiB",
                         "--workers-list", "1",
                         "--report", str(report_path))
        assert code == 0
        (report,) = read_csv(report_path)
        assert report.bpc is not None and report.bpc <= 1.5
        assert report.entropy is not None
