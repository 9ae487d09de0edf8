"""Session recording and the 20 Hz time-aligned view.

A session carries five streams: one joint bus and four image streams
(two wrist cameras, two tactile super-image feeds). Joint-bus payloads are
22 little-endian float64 angles ordered [left arm x4, right arm x4,
left hand x7, right hand x7]; image payloads use the 16-byte tactile header.

Recording: one producer thread per source feeds a bounded queue; the caller's
thread runs a k-way merge on (timestamp, stream index) so the file is written
in a deterministic global timestamp order regardless of thread scheduling.
A stream whose inter-sample gap (or gap to the requested end of recording)
exceeds the stall timeout aborts the recording with StreamStalled; the file
is still finalized with its index footer first.

Alignment: the 20 Hz grid anchors at the latest first-sample timestamp across
streams. Each tick takes the nearest sample per stream (ties toward the
earlier sample); ticks where any stream's nearest sample is more than half a
period away are dropped and counted.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .container import ContainerReader, ContainerWriter, Record, StreamInfo
from .errors import DimensionMismatch, MissingStream, StreamStalled
from .tactile import unpack_image

JOINT_COUNT = 22
ARM_JOINTS = 8           # 2 arms x 4 DoF, indices [0:8]
HAND_JOINTS = 14         # 2 hands x 7 DoF, indices [8:22]

STREAM_KINDS = (
    "joint-bus",
    "wrist-cam-left",
    "wrist-cam-right",
    "tactile-left",
    "tactile-right",
)

# Extra stream in ALGN/EPIS files: per-step source timestamps (5 x u64).
ALIGN_META_STREAM = "align-meta"

DEFAULT_RATE_HZ = 20.0
STALL_TIMEOUT_S = 0.5
_QUEUE_DEPTH = 64
_WALL_TIMEOUT_S = 30.0  # guard against a hung producer thread


def pack_joints(angles: np.ndarray) -> bytes:
    q = np.asarray(angles, dtype="<f8")
    if q.shape != (JOINT_COUNT,):
        raise DimensionMismatch(f"joint vector must have {JOINT_COUNT} angles")
    return q.tobytes()


def unpack_joints(payload: bytes) -> np.ndarray:
    if len(payload) != JOINT_COUNT * 8:
        raise DimensionMismatch(
            f"joint payload is {len(payload)} bytes, expected {JOINT_COUNT * 8}")
    return np.frombuffer(payload, dtype="<f8").copy()


@dataclass(frozen=True)
class StreamSample:
    stream_id: str
    timestamp_ns: int
    payload: bytes


class SampleSource:
    """A stream producer: yields (timestamp ns, payload) in timestamp order."""

    stream_id: str
    kind: str

    def samples(self) -> Iterator[tuple[int, bytes]]:  # pragma: no cover
        raise NotImplementedError


@dataclass
class IterSource(SampleSource):
    """Adapter turning any iterable of (ts, payload) into a source."""

    stream_id: str
    kind: str
    items: Iterable[tuple[int, bytes]]

    def samples(self) -> Iterator[tuple[int, bytes]]:
        return iter(self.items)


@dataclass
class RecordSummary:
    path: Path
    sample_counts: dict[str, int]
    duration_s: float
    stalled: str | None = None


_SENTINEL = object()


def record(sources: Sequence[SampleSource], duration_s: float, path: str | Path,
           *, variant: str = "DEXOP-7", rate_hz: float = DEFAULT_RATE_HZ,
           stall_timeout_s: float = STALL_TIMEOUT_S,
           meta: dict | None = None) -> RecordSummary:
    """Drain all sources into a session file; finalize the footer no matter what."""
    ids = [s.stream_id for s in sources]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate stream ids")
    streams = [StreamInfo(index=i, id=s.stream_id, kind=s.kind)
               for i, s in enumerate(sources)]
    full_meta = {"variant": variant, "rate_hz": rate_hz}
    full_meta.update(meta or {})

    queues = [queue.Queue(maxsize=_QUEUE_DEPTH) for _ in sources]

    def pump(src: SampleSource, q: queue.Queue):
        try:
            for ts, payload in src.samples():
                q.put((ts, payload))
        finally:
            q.put(_SENTINEL)

    threads = [threading.Thread(target=pump, args=(s, q), daemon=True)
               for s, q in zip(sources, queues)]
    for t in threads:
        t.start()

    stall_ns = int(stall_timeout_s * 1e9)
    counts = {s.stream_id: 0 for s in sources}
    last_ts: dict[int, int] = {}
    stalled: str | None = None
    first_ts: int | None = None
    end_ns: int | None = None

    heads: list[object] = []
    for q in queues:
        try:
            heads.append(q.get(timeout=_WALL_TIMEOUT_S))
        except queue.Empty:
            heads.append(_SENTINEL)

    writer = ContainerWriter(path, "SESS", streams, full_meta)
    try:
        while True:
            live = [(h[0], i) for i, h in enumerate(heads) if h is not _SENTINEL]
            if not live:
                break
            ts, i = min(live)
            head = heads[i]
            if first_ts is None:
                first_ts = ts
                end_ns = first_ts + int(duration_s * 1e9)
            if ts >= end_ns:
                heads[i] = _SENTINEL  # beyond the recording window: stop this stream
                continue
            prev = last_ts.get(i)
            if prev is not None and ts < prev:
                raise ValueError(
                    f"stream {sources[i].stream_id!r} delivered decreasing "
                    f"timestamps ({ts} after {prev})")
            if stalled is None:
                if prev is not None and ts - prev > stall_ns:
                    stalled = sources[i].stream_id
            writer.add(i, ts, head[1])
            counts[sources[i].stream_id] += 1
            last_ts[i] = ts
            try:
                heads[i] = queues[i].get(timeout=_WALL_TIMEOUT_S)
            except queue.Empty:
                heads[i] = _SENTINEL
        if stalled is None and end_ns is not None:
            for i, src in enumerate(sources):
                tail = last_ts.get(i)
                if tail is None or end_ns - tail > stall_ns:
                    stalled = src.stream_id
                    break
    finally:
        writer.close()
        for t in threads:
            t.join(timeout=1.0)

    if stalled is not None:
        raise StreamStalled(stalled)
    return RecordSummary(path=Path(path), sample_counts=counts,
                         duration_s=duration_s)


# -----------------------------------------------------------------------------
# alignment
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class AlignedStep:
    timestamp_ns: int
    joints: np.ndarray                       # 22 angles, rad
    wrist: tuple[np.ndarray, np.ndarray]     # left, right HxWx3 uint8
    tactile: tuple[np.ndarray, np.ndarray]   # left, right super-images
    source_ts: dict[str, int]                # per stream kind

    def __post_init__(self):
        if self.joints.shape != (JOINT_COUNT,):
            raise DimensionMismatch(
                f"aligned step needs {JOINT_COUNT} joints, got {self.joints.shape}")
        skew = max(abs(t - self.timestamp_ns) for t in self.source_ts.values())
        object.__setattr__(self, "_max_skew_ns", skew)

    @property
    def max_skew_ns(self) -> int:
        return self._max_skew_ns


@dataclass
class AlignmentResult:
    steps: list[AlignedStep]
    dropped: int
    rate_hz: float
    raw: list[dict[str, Record]] = field(default_factory=list)  # kept for --out


def _nearest(ts_list: list[int], t: int, start: int) -> tuple[int, int]:
    """Index of the sample nearest t, ties toward the earlier sample.

    ``start`` is a monotone cursor (grid timestamps only move forward).
    """
    i = start
    n = len(ts_list)
    while i + 1 < n and ts_list[i + 1] < t:
        i += 1
    # candidates: i (<= t, or first) and i+1 (> t)
    if i + 1 < n and abs(ts_list[i + 1] - t) < abs(ts_list[i] - t):
        return i + 1, i
    return i, i


def align(source: ContainerReader | str | Path, rate_hz: float = DEFAULT_RATE_HZ,
          keep_payloads: bool = False) -> AlignmentResult:
    """Produce the time-aligned step sequence from a recorded session."""
    reader = source if isinstance(source, ContainerReader) else ContainerReader(source)
    by_kind: dict[str, list[Record]] = {}
    for s in reader.streams:
        if s.kind in STREAM_KINDS:
            by_kind[s.kind] = reader.stream_records(s.id)
    missing = [k for k in STREAM_KINDS if k not in by_kind or not by_kind[k]]
    if missing:
        raise MissingStream(f"session lacks stream(s): {', '.join(missing)}")

    ts_lists = {k: [r.timestamp_ns for r in by_kind[k]] for k in STREAM_KINDS}
    t0 = max(ts[0] for ts in ts_lists.values())
    t_end = min(ts[-1] for ts in ts_lists.values())
    period = 1e9 / rate_hz
    half = int(period / 2)

    steps: list[AlignedStep] = []
    raw: list[dict[str, Record]] = []
    dropped = 0
    cursors = {k: 0 for k in STREAM_KINDS}
    k_tick = 0
    while True:
        t = t0 + int(round(k_tick * period))
        if t > t_end + half:
            break
        k_tick += 1
        chosen: dict[str, Record] = {}
        ok = True
        for kind in STREAM_KINDS:
            idx, cursor = _nearest(ts_lists[kind], t, cursors[kind])
            cursors[kind] = cursor
            rec = by_kind[kind][idx]
            if abs(rec.timestamp_ns - t) > half:
                ok = False
                break
            chosen[kind] = rec
        if not ok:
            dropped += 1
            continue
        joints = unpack_joints(chosen["joint-bus"].payload)
        _, _, wl = unpack_image(chosen["wrist-cam-left"].payload)
        _, _, wr = unpack_image(chosen["wrist-cam-right"].payload)
        _, _, tl = unpack_image(chosen["tactile-left"].payload)
        _, _, tr = unpack_image(chosen["tactile-right"].payload)
        steps.append(AlignedStep(
            timestamp_ns=t, joints=joints, wrist=(wl, wr), tactile=(tl, tr),
            source_ts={k: chosen[k].timestamp_ns for k in STREAM_KINDS}))
        if keep_payloads:
            raw.append(chosen)
    return AlignmentResult(steps=steps, dropped=dropped, rate_hz=rate_hz, raw=raw)


def write_aligned(result: AlignmentResult, path: str | Path, *,
                  variant: str = "DEXOP-7", meta: dict | None = None) -> None:
    """Persist an aligned view: the five streams re-timestamped onto the grid
    (payload bytes copied verbatim) plus an align-meta stream of source
    timestamps. Requires align(..., keep_payloads=True)."""
    if len(result.raw) != len(result.steps):
        raise ValueError("write_aligned needs align(..., keep_payloads=True)")
    streams = [StreamInfo(index=i, id=k, kind=k) for i, k in enumerate(STREAM_KINDS)]
    streams.append(StreamInfo(index=len(STREAM_KINDS), id=ALIGN_META_STREAM,
                              kind=ALIGN_META_STREAM))
    full_meta = {"variant": variant, "rate_hz": result.rate_hz,
                 "dropped_ticks": result.dropped}
    full_meta.update(meta or {})
    with ContainerWriter(path, "ALGN", streams, full_meta) as w:
        for step, chosen in zip(result.steps, result.raw):
            for i, kind in enumerate(STREAM_KINDS):
                w.add(i, step.timestamp_ns, chosen[kind].payload)
            src = b"".join(step.source_ts[k].to_bytes(8, "little")
                           for k in STREAM_KINDS)
            w.add(len(STREAM_KINDS), step.timestamp_ns, src)


def read_aligned(path: str | Path) -> AlignmentResult:
    """Load an ALGN file back into step form (grid timestamps are record ts)."""
    reader = ContainerReader(path)
    if reader.section != "ALGN":
        raise MissingStream(f"{path} is a {reader.section} file, expected ALGN")
    by_kind = {k: reader.stream_records(k) for k in STREAM_KINDS}
    meta_recs = reader.stream_records(ALIGN_META_STREAM)
    steps = []
    raw = []
    for i, meta_rec in enumerate(meta_recs):
        chosen = {k: by_kind[k][i] for k in STREAM_KINDS}
        src = {k: int.from_bytes(meta_rec.payload[j * 8:(j + 1) * 8], "little")
               for j, k in enumerate(STREAM_KINDS)}
        joints = unpack_joints(chosen["joint-bus"].payload)
        _, _, wl = unpack_image(chosen["wrist-cam-left"].payload)
        _, _, wr = unpack_image(chosen["wrist-cam-right"].payload)
        _, _, tl = unpack_image(chosen["tactile-left"].payload)
        _, _, tr = unpack_image(chosen["tactile-right"].payload)
        steps.append(AlignedStep(
            timestamp_ns=meta_rec.timestamp_ns, joints=joints, wrist=(wl, wr),
            tactile=(tl, tr), source_ts=src))
        raw.append(chosen)
    return AlignmentResult(steps=steps,
                           dropped=int(reader.meta.get("dropped_ticks", 0)),
                           rate_hz=float(reader.meta.get("rate_hz", DEFAULT_RATE_HZ)),
                           raw=raw)
