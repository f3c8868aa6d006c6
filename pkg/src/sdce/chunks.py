"""Frame-aligned chunking and the parallel worker engine.

Large inputs are split into chunks of at most ``chunk_size`` bytes, rounded
down to whole frames so every chunk decodes independently.  Each chunk gets
its own derived key (see keystream.derive_chunk_key) and its own ``.sdce``
output file; a text manifest ties them together:

    <index> TAB <start>:<stop> TAB <filename> TAB <status> TAB <crc32-hex>

The CRC is over the whole chunk file, so any corruption is detected before
the chunk is decoded and is attributed to exactly that chunk.  Workers are
separate processes; they read their own slice of the input file and write
their own outputs, so results are byte-identical for any worker count.  One
failed chunk aborts the batch after in-flight work drains; completed chunk
files are kept and the manifest marks the incomplete ones.
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
import io
import os
import time
import zlib

from . import _kernels, container, pipeline, video
from .errors import ChunkFailure, ChunkTooSmall, MissingChunk, SdceError
from .keystream import ChaosKey, derive_chunk_key, key_fingerprint
from .pipeline import COMPRESS_THEN_ENCRYPT, DEFAULT_BURN_IN, FrameMeta

DEFAULT_CHUNK_SIZE = 64 * 1024 * 1024
MANIFEST_NAME = "manifest.txt"

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_SKIPPED = "skipped"


def chunk_file_name(index: int) -> str:
    return f"chunk_{index:05d}.sdce"


@dataclass(frozen=True)
class ChunkSpec:
    index: int
    frame_start: int
    frame_stop: int
    key_fingerprint: str = ""

    @property
    def frame_count(self) -> int:
        return self.frame_stop - self.frame_start


@dataclass(frozen=True)
class ChunkPlan:
    chunk_size: int
    frames_per_chunk: int
    chunks: tuple


@dataclass
class ChunkResult:
    index: int
    frame_start: int
    frame_stop: int
    filename: str
    status: str
    crc32: int | None = None
    file_bytes: int = 0
    payload_bytes: int = 0
    error: str | None = None


def plan_chunks(meta: FrameMeta, chunk_size: int = DEFAULT_CHUNK_SIZE,
                master_key: ChaosKey | None = None) -> ChunkPlan:
    """Partition [0, frame_count) into whole-frame chunks.

    Fingerprints of the per-chunk derived keys are recorded when the master
    key is supplied.
    """
    frame_bytes = meta.frame_bytes
    if chunk_size < frame_bytes:
        raise ChunkTooSmall(
            f"chunk size {chunk_size} smaller than one frame ({frame_bytes} B)")
    per_chunk = chunk_size // frame_bytes
    chunks = []
    start = 0
    index = 0
    while start < meta.frame_count:
        stop = min(start + per_chunk, meta.frame_count)
        fingerprint = ""
        if master_key is not None:
            fingerprint = key_fingerprint(derive_chunk_key(master_key, index))
        chunks.append(ChunkSpec(index, start, stop, fingerprint))
        start = stop
        index += 1
    return ChunkPlan(chunk_size, per_chunk, tuple(chunks))


# --- manifest ---------------------------------------------------------------

def write_manifest(path, results) -> None:
    lines = []
    for res in sorted(results, key=lambda r: r.index):
        crc = f"{res.crc32:08x}" if res.crc32 is not None else "-"
        lines.append(f"{res.index}\t{res.frame_start}:{res.frame_stop}\t"
                     f"{res.filename}\t{res.status}\t{crc}\n")
    with open(path, "w", encoding="ascii") as fh:
        fh.writelines(lines)


def read_manifest(path) -> list[ChunkResult]:
    entries = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise MissingChunk(f"{path}:{lineno}: malformed manifest line")
            index = int(parts[0])
            start_s, _, stop_s = parts[1].partition(":")
            crc = None if parts[4] == "-" else int(parts[4], 16)
            entries.append(ChunkResult(index, int(start_s), int(stop_s),
                                       parts[2], parts[3], crc))
    return sorted(entries, key=lambda e: e.index)


# --- worker tasks (module level so they pickle) ------------------------------

class _Crc32Sink:
    """File wrapper that folds every written byte into a running CRC."""

    def __init__(self, fh):
        self._fh = fh
        self.crc = 0

    def write(self, data):
        self.crc = zlib.crc32(data, self.crc)
        return self._fh.write(data)


def _encode_chunk_worker(task):
    (index, input_path, start, stop, nu0, lam, order, burn_in, out_path,
     fps_num, fps_den) = task
    try:
        key = derive_chunk_key(ChaosKey(nu0, lam), index)
        reader = video.open_video(input_path)
        frames = reader.read_range(start, stop)
        encoded, _ = pipeline.encode_sequence(frames, key, order, burn_in,
                                              first_index=start)
        header = container.ContainerHeader(
            reader.meta.width, reader.meta.height, fps_num, fps_den,
            stop - start, chunk_index=index, burn_in=burn_in, order=order)
        records = (container.FrameRecord.from_encoded(e) for e in encoded)
        with open(out_path, "wb") as fh:
            sink = _Crc32Sink(fh)
            file_bytes = container.write_container(header, records, sink)
        payload_bytes = sum(e.payload_bytes for e in encoded)
        return ("ok", index, {"crc": sink.crc & 0xFFFFFFFF,
                              "file_bytes": file_bytes,
                              "payload_bytes": payload_bytes})
    except Exception as exc:  # propagated as data; see process_parallel
        return ("failed", index, f"{type(exc).__name__}: {exc}")


def _decode_chunk_worker(task):
    (index, chunk_path, start, stop, nu0, lam, expected_crc,
     out_kind, out_target, width, height) = task
    try:
        with open(chunk_path, "rb") as fh:
            blob = fh.read()
        crc = zlib.crc32(blob) & 0xFFFFFFFF
        if expected_crc is not None and crc != expected_crc:
            raise SdceError(
                f"chunk file crc mismatch: manifest {expected_crc:08x}, "
                f"file {crc:08x}")
        header, records = container.read_container(io.BytesIO(blob))
        if header.chunk_index != index:
            raise SdceError(
                f"chunk file labeled {header.chunk_index}, expected {index}")
        if header.frame_count != stop - start:
            raise SdceError(
                f"chunk holds {header.frame_count} frames, manifest says "
                f"{stop - start}")
        if (width, height) != (header.width, header.height):
            raise SdceError(
                f"chunk geometry {header.width}x{header.height} != "
                f"{width}x{height}")
        key = derive_chunk_key(ChaosKey(nu0, lam), index)
        meta = pipeline.FrameMeta(header.width, header.height,
                                  header.fps_num, header.fps_den,
                                  header.frame_count)
        encoded = [rec.to_encoded(header.order) for rec in records]
        for offset, enc in enumerate(encoded):
            if enc.frame_index != start + offset:
                raise SdceError(
                    f"record {offset} carries frame index {enc.frame_index}, "
                    f"expected {start + offset}")
        frames, _ = pipeline.decode_sequence(encoded, key, meta,
                                             burn_in=header.burn_in)
        raw = frames.tobytes()
        if out_kind == "rgv":
            offset = video.RGV_HEADER_SIZE + start * meta.frame_bytes
            with open(out_target, "r+b") as fh:
                fh.seek(offset)
                fh.write(raw)
        elif out_kind == "pgm":
            for offset in range(frames.shape[0]):
                video.write_pgm(frames[offset], os.path.join(
                    out_target, video.pgm_name(start + offset)))
        else:
            raise SdceError(f"unknown output kind {out_kind!r}")
        return ("ok", index, {"raw_bytes": len(raw),
                              "frame_count": header.frame_count})
    except Exception as exc:
        return ("failed", index, f"{type(exc).__name__}: {exc}")


def _run_tasks(tasks, worker, workers: int):
    """Run task tuples on a process pool (inline when workers == 1).

    Returns {index: (status, index, detail)}.  On the first failure,
    not-yet-started tasks are cancelled while in-flight ones drain;
    cancelled tasks are simply absent from the result map.
    """
    if workers <= 1:
        results = {}
        for task in tasks:
            outcome = worker(task)
            results[outcome[1]] = outcome
            if outcome[0] != "ok":
                break
        return results
    _kernels.warm_up()  # children inherit compiled kernels on fork
    results = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, task) for task in tasks]
        failed = False
        for fut in as_completed(futures):
            if fut.cancelled():
                continue
            outcome = fut.result()
            results[outcome[1]] = outcome
            if outcome[0] != "ok" and not failed:
                failed = True
                for other in futures:
                    other.cancel()
    return results


def process_parallel(plan: ChunkPlan, source, master_key: ChaosKey,
                     workers: int = 1, stage: str = "encode", *,
                     out_dir=None, order: str = COMPRESS_THEN_ENCRYPT,
                     burn_in: int = DEFAULT_BURN_IN, fps=(25, 1),
                     manifest_entries=None, out_kind: str = "rgv",
                     out_target=None, geometry=None) -> list[ChunkResult]:
    """Run every chunk of the plan through the requested stage.

    Encode: ``source`` is the input video path, chunk files land in
    ``out_dir``.  Decode: ``source`` is the directory holding the chunk
    files, ``manifest_entries`` supplies names and CRCs, and decoded bytes
    go to ``out_target`` (an RGV file or a PGM directory).

    Outputs are ordered by chunk index and are bit-identical for any worker
    count.  The first failing chunk aborts the batch after in-flight chunks
    drain; a ChunkFailure naming that chunk is raised and the returned
    partial statuses are attached to it.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    order = pipeline.normalize_order(order)
    tasks = []
    if stage == "encode":
        if out_dir is None:
            raise ValueError("encode needs out_dir")
        for spec in plan.chunks:
            out_path = os.path.join(out_dir, chunk_file_name(spec.index))
            tasks.append((spec.index, os.fspath(source), spec.frame_start,
                          spec.frame_stop, master_key.nu0, master_key.lam,
                          order, burn_in, out_path, fps[0], fps[1]))
    elif stage == "decode":
        if out_target is None or geometry is None:
            raise ValueError("decode needs out_target and geometry")
        by_index = {e.index: e for e in (manifest_entries or [])}
        for spec in plan.chunks:
            entry = by_index.get(spec.index)
            filename = entry.filename if entry else chunk_file_name(spec.index)
            crc = entry.crc32 if entry else None
            tasks.append((spec.index, os.path.join(os.fspath(source), filename),
                          spec.frame_start, spec.frame_stop, master_key.nu0,
                          master_key.lam, crc, out_kind, out_target,
                          geometry[0], geometry[1]))
    else:
        raise ValueError(f"unknown stage {stage!r}")

    worker = _encode_chunk_worker if stage == "encode" else _decode_chunk_worker
    outcomes = _run_tasks(tasks, worker, workers)

    names = {e.index: e.filename for e in (manifest_entries or [])}
    results = []
    failure = None
    for spec in plan.chunks:
        filename = names.get(spec.index, chunk_file_name(spec.index))
        outcome = outcomes.get(spec.index)
        if outcome is None:
            results.append(ChunkResult(spec.index, spec.frame_start,
                                       spec.frame_stop, filename,
                                       STATUS_SKIPPED))
            continue
        status, _, detail = outcome
        if status == "ok":
            results.append(ChunkResult(
                spec.index, spec.frame_start, spec.frame_stop, filename,
                STATUS_OK, crc32=detail.get("crc"),
                file_bytes=detail.get("file_bytes", 0),
                payload_bytes=detail.get("payload_bytes", 0)))
        else:
            res = ChunkResult(spec.index, spec.frame_start, spec.frame_stop,
                              filename, STATUS_FAILED, error=detail)
            results.append(res)
            if failure is None:
                failure = res
    if failure is not None:
        if stage == "encode" and out_dir is not None:
            write_manifest(os.path.join(out_dir, MANIFEST_NAME), results)
        exc = ChunkFailure(
            f"chunk {failure.index} failed: {failure.error}",
            chunk_index=failure.index, cause=failure.error)
        exc.partial_results = results
        raise exc
    return results


def merge(results, destination, stage: str = "encode"):
    """Consolidate chunk outputs in index order.

    Encode: verifies every chunk is present and contiguous, then writes the
    manifest into ``destination`` (a directory).  Decode: verifies the
    decoded regions partition the frame range and returns the merged
    RawVideo read back from ``destination`` (an RGV path).
    """
    ordered = sorted(results, key=lambda r: r.index)
    expected_start = 0
    for i, res in enumerate(ordered):
        if res.index != i:
            raise MissingChunk(f"chunk {i} absent from results",
                               chunk_index=i)
        if res.status != STATUS_OK:
            raise MissingChunk(
                f"chunk {res.index} is {res.status}", chunk_index=res.index)
        if res.frame_start != expected_start:
            raise MissingChunk(
                f"chunk {res.index} starts at frame {res.frame_start}, "
                f"expected {expected_start}", chunk_index=res.index)
        expected_start = res.frame_stop
    if stage == "encode":
        manifest_path = os.path.join(os.fspath(destination), MANIFEST_NAME)
        write_manifest(manifest_path, ordered)
        return manifest_path
    if stage == "decode":
        return video.read_rgv(destination)
    raise ValueError(f"unknown stage {stage!r}")


# --- high-level drivers -------------------------------------------------------

@dataclass
class EncodeSummary:
    manifest_path: str
    results: list
    meta: FrameMeta
    order: str
    input_bytes: int
    output_bytes: int
    payload_bytes: int
    seconds: float


@dataclass
class DecodeSummary:
    out_target: str
    out_kind: str
    results: list
    meta: FrameMeta
    output_bytes: int
    seconds: float


def encode_chunked(input_path, master_key: ChaosKey, out_dir, *,
                   order: str = COMPRESS_THEN_ENCRYPT,
                   chunk_size: int = DEFAULT_CHUNK_SIZE,
                   workers: int = 1,
                   burn_in: int = DEFAULT_BURN_IN) -> EncodeSummary:
    """Encode a video file into per-chunk .sdce files plus a manifest."""
    reader = video.open_video(input_path)
    meta = reader.meta
    plan = plan_chunks(meta, chunk_size)
    os.makedirs(out_dir, exist_ok=True)
    started = time.perf_counter()
    results = process_parallel(plan, input_path, master_key, workers,
                               "encode", out_dir=out_dir, order=order,
                               burn_in=burn_in,
                               fps=(meta.fps_num, meta.fps_den))
    manifest_path = merge(results, out_dir, stage="encode")
    elapsed = time.perf_counter() - started
    return EncodeSummary(
        manifest_path=manifest_path, results=results, meta=meta, order=order,
        input_bytes=meta.frame_count * meta.frame_bytes,
        output_bytes=sum(r.file_bytes for r in results),
        payload_bytes=sum(r.payload_bytes for r in results),
        seconds=elapsed)


def decode_chunked(manifest_path, master_key: ChaosKey, out_target, *,
                   workers: int = 1, out_kind: str = "rgv") -> DecodeSummary:
    """Decode every chunk named by a manifest and merge frame order."""
    entries = read_manifest(manifest_path)
    chunk_dir = os.path.dirname(os.path.abspath(manifest_path))
    expected_index = 0
    expected_start = 0
    for entry in entries:
        if entry.status != STATUS_OK:
            raise MissingChunk(
                f"manifest marks chunk {entry.index} as {entry.status}",
                chunk_index=entry.index)
        if entry.index != expected_index or entry.frame_start != expected_start:
            raise MissingChunk(
                f"manifest is not contiguous at chunk {expected_index} "
                f"(frame {expected_start})", chunk_index=expected_index)
        expected_index += 1
        expected_start = entry.frame_stop
        if not os.path.exists(os.path.join(chunk_dir, entry.filename)):
            raise MissingChunk(f"chunk file {entry.filename} is missing",
                               chunk_index=entry.index)
    if not entries:
        raise MissingChunk("manifest lists no chunks")

    first = container.read_header_file(
        os.path.join(chunk_dir, entries[0].filename))
    total_frames = max(e.frame_stop for e in entries)
    meta = FrameMeta(first.width, first.height, first.fps_num, first.fps_den,
                     total_frames)
    plan = ChunkPlan(0, 0, tuple(
        ChunkSpec(e.index, e.frame_start, e.frame_stop) for e in entries))

    if out_kind == "rgv":
        header = video.RGV_HEADER.pack(
            video.RGV_MAGIC, meta.width, meta.height, meta.fps_num,
            meta.fps_den, meta.frame_count)
        with open(out_target, "wb") as fh:
            fh.write(header)
            fh.truncate(video.RGV_HEADER_SIZE +
                        meta.frame_count * meta.frame_bytes)
    elif out_kind == "pgm":
        os.makedirs(out_target, exist_ok=True)

    started = time.perf_counter()
    results = process_parallel(
        plan, chunk_dir, master_key, workers, "decode",
        manifest_entries=entries, out_kind=out_kind,
        out_target=os.fspath(out_target), geometry=(meta.width, meta.height))
    elapsed = time.perf_counter() - started
    return DecodeSummary(
        out_target=os.fspath(out_target), out_kind=out_kind, results=results,
        meta=meta, output_bytes=meta.frame_count * meta.frame_bytes,
        seconds=elapsed)


def decode_chunk_file(path, master_key: ChaosKey):
    """Decode one chunk container on its own (the per-chunk retry path)."""
    header, records = container.read_container_file(path)
    key = derive_chunk_key(master_key, header.chunk_index)
    meta = FrameMeta(header.width, header.height, header.fps_num,
                     header.fps_den, header.frame_count)
    encoded = [rec.to_encoded(header.order) for rec in records]
    frames, _ = pipeline.decode_sequence(encoded, key, meta,
                                         burn_in=header.burn_in)
    return header, frames
