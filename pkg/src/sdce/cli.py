"""Command-line front end: keygen, encode, decode, metrics, bench.

Exit codes are a stable contract:

    0  success
    2  input parse error / shape mismatch
    3  key error
    4  I/O error
    5  corrupt or incomplete container (message names chunk and frame)
    1  anything else

``SDCE_WORKERS`` in the environment overrides ``--workers``.
"""

import argparse
import os
import random
import sys
import tempfile

from . import chunks, container, metrics, pipeline, video
from .errors import (BadMagic, BadSignature, ChunkFailure, ChunkTooSmall,
                     CorruptRecord, DegenerateOrbit, HeaderSyntax,
                     KeyDerivationFailed, KeyFileError, KeyOutOfRange,
                     MalformedFrame, MissingChunk, PixelCountMismatch,
                     SdceError, ShapeMismatch, SinkFailure, TrailingBits,
                     Truncated, TruncatedFrame, TruncatedStream,
                     UnsupportedColorspace, UnsupportedVersion)
from .keystream import (key_fingerprint, random_key, read_key_file,
                        validate_key, write_key_file)

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_PARSE = 2
EXIT_KEY = 3
EXIT_IO = 4
EXIT_CORRUPT = 5

_PARSE_ERRORS = (BadSignature, HeaderSyntax, UnsupportedColorspace,
                 TruncatedFrame, MalformedFrame, ShapeMismatch, ChunkTooSmall)
_KEY_ERRORS = (KeyOutOfRange, DegenerateOrbit, KeyDerivationFailed,
               KeyFileError)
_CORRUPT_ERRORS = (BadMagic, UnsupportedVersion, CorruptRecord, Truncated,
                   MissingChunk, TruncatedStream, TrailingBits,
                   PixelCountMismatch)

MIN_CHUNK_SIZE = 1024 * 1024

_SIZE_SUFFIXES = {
    "k": 1024, "kib": 1024, "kb": 1000,
    "m": 1024 ** 2, "mib": 1024 ** 2, "mb": 1000 ** 2,
    "g": 1024 ** 3, "gib": 1024 ** 3, "gb": 1000 ** 3,
}


def parse_size(text: str) -> int:
    raw = text.strip().lower()
    for suffix in sorted(_SIZE_SUFFIXES, key=len, reverse=True):
        if raw.endswith(suffix):
            number = raw[: -len(suffix)].strip()
            if not number:
                raise argparse.ArgumentTypeError(f"bad size {text!r}")
            return int(float(number) * _SIZE_SUFFIXES[suffix])
    if not raw.isdigit():
        raise argparse.ArgumentTypeError(f"bad size {text!r}")
    return int(raw)


def resolve_workers(flag_value) -> int:
    env = os.environ.get("SDCE_WORKERS")
    if env is not None:
        return max(1, int(env))
    if flag_value is not None:
        return max(1, flag_value)
    return max(1, os.cpu_count() or 1)


def _load_video_any(path):
    """Read a video argument: RGV/Y4M file or a directory of PGMs."""
    if os.path.isdir(path):
        return video.read_pgm_sequence(path)
    return video.open_video(path).read_all()


def _sum_cipher_files(path):
    """Resolve --cipher: a manifest or a single .sdce file.

    Returns (total file bytes, concatenated record payload bytes).
    """
    with open(path, "rb") as fh:
        is_container = fh.read(4) == container.MAGIC
    paths = []
    if is_container:
        paths.append(path)
    else:
        base = os.path.dirname(os.path.abspath(path))
        for entry in chunks.read_manifest(path):
            paths.append(os.path.join(base, entry.filename))
    total = 0
    payloads = []
    for p in paths:
        total += os.path.getsize(p)
        _, records = container.read_container_file(p)
        payloads.extend(rec.payload for rec in records)
    return total, b"".join(payloads)


# --- subcommands -------------------------------------------------------------

def cmd_keygen(args) -> int:
    rng = random.Random(args.seed) if args.seed is not None else random.Random()
    key = random_key(rng)
    write_key_file(key, args.out)
    print(f"wrote {args.out} (fingerprint {key_fingerprint(key)})")
    return EXIT_OK


def cmd_encode(args) -> int:
    key = validate_key(read_key_file(args.key))
    workers = resolve_workers(args.workers)
    if args.chunk_size < MIN_CHUNK_SIZE:
        print(f"error: chunk size must be >= 1 MiB, got {args.chunk_size}",
              file=sys.stderr)
        return EXIT_PARSE
    summary = chunks.encode_chunked(
        args.input, key, args.out, order=args.order,
        chunk_size=args.chunk_size, workers=workers, burn_in=args.burn_in)
    rate = metrics.bpc(summary.output_bytes, summary.input_bytes)
    mbs = metrics.throughput(summary.output_bytes, summary.seconds)
    print(f"encoded {summary.meta.frame_count} frames "
          f"({summary.input_bytes} B) into {len(summary.results)} chunks "
          f"({summary.output_bytes} B) as {summary.order}")
    print(f"manifest: {summary.manifest_path}")
    print(f"throughput: {mbs:.2f} MB/s  bpc: {rate:.3f}  "
          f"compression: {metrics.compression_pct(summary.input_bytes, summary.output_bytes):.2f}%")
    return EXIT_OK


def cmd_decode(args) -> int:
    key = validate_key(read_key_file(args.key))
    workers = resolve_workers(args.workers)
    out_kind = "pgm" if args.pgm else "rgv"
    summary = chunks.decode_chunked(args.manifest, key, args.out,
                                    workers=workers, out_kind=out_kind)
    mbs = metrics.throughput(summary.output_bytes, summary.seconds)
    print(f"decoded {summary.meta.frame_count} frames "
          f"({summary.output_bytes} B) to {summary.out_target}")
    print(f"throughput: {mbs:.2f} MB/s")
    return EXIT_OK


def cmd_metrics(args) -> int:
    original = _load_video_any(args.original)
    decoded = _load_video_any(args.decoded)
    report = metrics.MetricsReport()
    report.mse = metrics.mse(original.frames, decoded.frames)
    report.psnr = metrics.psnr(original.frames, decoded.frames)
    report.pil = metrics.pil(original.nbytes, decoded.nbytes)
    if args.cipher:
        cipher_bytes, payload = _sum_cipher_files(args.cipher)
        report.entropy = metrics.entropy(payload)
        report.bpc = metrics.bpc(cipher_bytes, original.nbytes)
        report.compression_pct = metrics.compression_pct(
            original.nbytes, cipher_bytes)
        if args.cipher2:
            _, payload2 = _sum_cipher_files(args.cipher2)
            n = min(len(payload), len(payload2))
            report.avalanche = metrics.avalanche(payload[:n], payload2[:n])
    if args.encode_seconds and args.cipher:
        report.throughput_encode = metrics.throughput(cipher_bytes,
                                                      args.encode_seconds)
    if args.decode_seconds:
        report.throughput_decode = metrics.throughput(decoded.nbytes,
                                                      args.decode_seconds)
    for name in report.columns():
        value = getattr(report, name)
        shown = "-" if value is None else f"{value}"
        print(f"{name}: {shown}")
    if args.report:
        metrics.write_csv(args.report, [report])
        print(f"report: {args.report}")
    return EXIT_OK


def _bench_corpus(args, tmp_dir):
    if args.corpus:
        return args.corpus
    meta = pipeline.FrameMeta(args.width, args.height, 25, 1, args.frames)
    vid = video.synth_corpus(args.kind, meta, seed=args.seed)
    path = os.path.join(tmp_dir, f"bench_{args.kind}.rgv")
    video.write_rgv(vid, path)
    return path


def cmd_bench(args) -> int:
    key = validate_key(read_key_file(args.key)) if args.key else random_key(
        random.Random(args.seed))
    workers_list = [int(w) for w in args.workers_list.split(",")]
    orders = ([pipeline.ENCRYPT_THEN_COMPRESS, pipeline.COMPRESS_THEN_ENCRYPT]
              if args.order == "both" else [pipeline.normalize_order(args.order)])
    reports = []
    with tempfile.TemporaryDirectory() as tmp_dir:
        corpus_path = _bench_corpus(args, tmp_dir)
        reader = video.open_video(corpus_path)
        input_bytes = reader.meta.frame_count * reader.meta.frame_bytes
        sample = reader.read_range(
            0, min(reader.meta.frame_count,
                   max(1, (128 * 1024) // reader.meta.frame_bytes + 1)))
        header = (f"{'workers':>7}  {'order':<3}  {'enc MB/s':>9}  "
                  f"{'dec MB/s':>9}  {'bpc':>6}  {'entropy':>7}  "
                  f"{'aval key%':>9}  {'aval px%':>9}")
        print(header)
        for order in orders:
            short = "etc" if order == pipeline.ENCRYPT_THEN_COMPRESS else "cte"
            aval_key = metrics.key_avalanche(sample, key, order)
            aval_px = metrics.plaintext_avalanche(sample, key, order)
            for workers in workers_list:
                run_dir = os.path.join(tmp_dir, f"run_{short}_{workers}")
                summary = chunks.encode_chunked(
                    corpus_path, key, run_dir, order=order,
                    chunk_size=args.chunk_size, workers=workers)
                out_rgv = os.path.join(run_dir, "decoded.rgv")
                dec = chunks.decode_chunked(summary.manifest_path, key,
                                            out_rgv, workers=workers)
                payload = b"".join(
                    rec.payload
                    for res in summary.results
                    for rec in container.read_container_file(
                        os.path.join(run_dir, res.filename))[1])
                report = metrics.MetricsReport(
                    entropy=metrics.entropy(payload),
                    avalanche=aval_key,
                    throughput_encode=metrics.throughput(
                        summary.output_bytes, summary.seconds),
                    throughput_decode=metrics.throughput(
                        dec.output_bytes, dec.seconds),
                    bpc=metrics.bpc(summary.output_bytes, input_bytes),
                    compression_pct=metrics.compression_pct(
                        input_bytes, summary.output_bytes))
                reports.append(report)
                print(f"{workers:>7}  {short:<3}  "
                      f"{report.throughput_encode:>9.2f}  "
                      f"{report.throughput_decode:>9.2f}  "
                      f"{report.bpc:>6.3f}  {report.entropy:>7.4f}  "
                      f"{aval_key:>9.2f}  {aval_px:>9.4f}")
    if args.report:
        metrics.write_csv(args.report, reports)
        print(f"report: {args.report}")
    return EXIT_OK


# --- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdce",
        description="Chaotic-keystream encryption with Huffman compression "
                    "for grayscale video")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate and write a key file")
    p.add_argument("--out", required=True, help="key file path")
    p.add_argument("--seed", type=int, default=None,
                   help="deterministic generation seed")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encode", help="encode a video into chunked .sdce files")
    p.add_argument("input", help="input video (.rgv or .y4m)")
    p.add_argument("--key", required=True, help="key file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--order", default="cte", choices=["cte", "etc"],
                   help="compress-then-encrypt (default) or the literal "
                        "encrypt-then-compress")
    p.add_argument("--chunk-size", type=parse_size, default=chunks.DEFAULT_CHUNK_SIZE,
                   help="chunk size in bytes (suffixes K/M/G allowed), >= 1 MiB")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=pipeline.DEFAULT_BURN_IN)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode chunked .sdce files back to video")
    p.add_argument("manifest", help="manifest written by encode")
    p.add_argument("--key", required=True, help="key file")
    p.add_argument("--out", required=True,
                   help="output .rgv path (or directory with --pgm)")
    p.add_argument("--pgm", action="store_true",
                   help="emit a PGM image sequence instead of RGV")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("metrics", help="compute assessment metrics for a run")
    p.add_argument("--original", required=True)
    p.add_argument("--decoded", required=True)
    p.add_argument("--cipher", default=None,
                   help="encode output: manifest or a single .sdce file")
    p.add_argument("--cipher2", default=None,
                   help="second cipher for the avalanche column")
    p.add_argument("--encode-seconds", type=float, default=None)
    p.add_argument("--decode-seconds", type=float, default=None)
    p.add_argument("--report", default=None, help="CSV output path")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="benchmark over worker counts")
    p.add_argument("--corpus", default=None,
                   help="existing video; default builds a synthetic corpus")
    p.add_argument("--kind", default="noise", choices=video.CORPUS_KINDS)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--key", default=None, help="key file (default: seeded key)")
    p.add_argument("--order", default="cte", choices=["cte", "etc", "both"])
    p.add_argument("--chunk-size", type=parse_size, default=2 * 1024 * 1024)
    p.add_argument("--workers-list", default="1,2,4,8")
    p.add_argument("--report", default=None, help="CSV output path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ChunkFailure as exc:
        if args.command == "decode":
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CORRUPT
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _CORRUPT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE if args.command == "metrics" else EXIT_CORRUPT
    except _KEY_ERRORS as exc:
        print(f"key error: {exc}", file=sys.stderr)
        return EXIT_KEY
    except _PARSE_ERRORS as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SinkFailure as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SdceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
