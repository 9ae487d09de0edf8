"""Chunked binary container for sessions, aligned sessions, and episodes.

Layout (little-endian throughout; byte-exact spec in docs/FORMAT.md):

    header : [magic "PRXS"][version u16][section 4B ascii][meta_len u32]
             [meta JSON utf-8][header_crc32 u32 over all preceding bytes]
    chunks : repeated [payload_len u32][payload_crc32 u32][payload]
             payload = records [stream u8][timestamp u64][len u32][bytes...]
    footer : [payload][footer_len u32][footer_crc32 u32][magic "PRXE"]
             payload = [stream_count u8] then per stream:
                       [stream u8][sample_count u32][drop_count u32]
                       sample_count x ([timestamp u64][chunk_off u64][rec_off u32])

Chunks hold up to 64 KiB of records; a single record larger than the cap gets
its own oversized chunk (full-resolution tactile super-images exceed 64 KiB).
``chunk_off`` is the absolute file offset of the chunk's length field and
``rec_off`` the record's offset inside the decoded chunk payload.

Readers locate the footer through the fixed 12-byte trailer at EOF. A file
whose trailer is missing (hard crash) can still be scanned sequentially; the
reader flags it as ``recovered``.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .errors import (
    BadMagic,
    CorruptChunk,
    CorruptIndex,
    IoFailure,
    VersionUnsupported,
)

MAGIC = b"PRXS"
TRAILER_MAGIC = b"PRXE"
FORMAT_VERSION = 1
CHUNK_CAP = 64 * 1024
SECTIONS = ("SESS", "ALGN", "EPIS")

_RECORD_HEAD = struct.Struct("<BQI")
_CHUNK_HEAD = struct.Struct("<II")
_TRAILER = struct.Struct("<II4s")
_INDEX_ENTRY = struct.Struct("<QQI")
_STREAM_HEAD = struct.Struct("<BII")


@dataclass(frozen=True)
class StreamInfo:
    index: int
    id: str
    kind: str


@dataclass
class Record:
    stream: int
    timestamp_ns: int
    payload: bytes


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def _header_bytes(section: str, meta: dict) -> bytes:
    if section not in SECTIONS:
        raise ValueError(f"unknown section {section!r}")
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    head = MAGIC + struct.pack("<H", FORMAT_VERSION) + section.encode("ascii") \
        + struct.pack("<I", len(blob)) + blob
    return head + struct.pack("<I", zlib.crc32(head))


class ContainerWriter:
    """Sequencer-side writer: records in, chunked checksummed file out.

    Always finalizes the index footer on close, including after errors, so
    early-stopped recordings stay readable.
    """

    def __init__(self, path: str | Path, section: str, streams: Sequence[StreamInfo],
                 meta: dict | None = None):
        self.path = Path(path)
        self.streams = list(streams)
        full_meta = dict(meta or {})
        full_meta["section"] = section
        full_meta["streams"] = [
            {"index": s.index, "id": s.id, "kind": s.kind} for s in self.streams]
        try:
            self._fh = open(self.path, "wb")
            self._fh.write(_header_bytes(section, full_meta))
        except OSError as e:
            raise IoFailure(str(e)) from e
        self._chunk: list[bytes] = []
        self._chunk_size = 0
        self._index: dict[int, list[tuple[int, int, int]]] = {s.index: [] for s in self.streams}
        self._pending: list[tuple[int, int, int]] = []  # (stream, ts, rec_off)
        self._drops: dict[int, int] = {s.index: 0 for s in self.streams}
        self._closed = False

    def add(self, stream: int, timestamp_ns: int, payload: bytes) -> None:
        if stream not in self._index:
            raise ValueError(f"stream index {stream} not declared")
        rec = _RECORD_HEAD.pack(stream, timestamp_ns, len(payload)) + payload
        if self._chunk_size and self._chunk_size + len(rec) > CHUNK_CAP:
            self._flush_chunk()
        self._pending.append((stream, timestamp_ns, self._chunk_size))
        self._chunk.append(rec)
        self._chunk_size += len(rec)
        if self._chunk_size >= CHUNK_CAP:
            self._flush_chunk()

    def add_drops(self, stream: int, n: int) -> None:
        self._drops[stream] = self._drops.get(stream, 0) + n

    def _flush_chunk(self) -> None:
        if not self._chunk:
            return
        payload = b"".join(self._chunk)
        try:
            chunk_off = self._fh.tell()
            self._fh.write(_CHUNK_HEAD.pack(len(payload), zlib.crc32(payload)))
            self._fh.write(payload)
        except OSError as e:
            raise IoFailure(str(e)) from e
        for stream, ts, rec_off in self._pending:
            self._index[stream].append((ts, chunk_off, rec_off))
        self._chunk = []
        self._chunk_size = 0
        self._pending = []

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._flush_chunk()
            footer = bytearray()
            footer.append(len(self.streams))
            for s in self.streams:
                entries = self._index[s.index]
                footer += _STREAM_HEAD.pack(s.index, len(entries), self._drops[s.index])
                for ts, chunk_off, rec_off in entries:
                    footer += _INDEX_ENTRY.pack(ts, chunk_off, rec_off)
            self._fh.write(bytes(footer))
            self._fh.write(_TRAILER.pack(len(footer), zlib.crc32(bytes(footer)),
                                         TRAILER_MAGIC))
            self._fh.close()
        except OSError as e:
            raise IoFailure(str(e)) from e

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


@dataclass
class StreamIndex:
    sample_count: int
    drop_count: int
    entries: list[tuple[int, int, int]] = field(default_factory=list)  # ts, chunk, rec


class ContainerReader:
    """Random-access reader over the chunk index (or a sequential rescan when
    the footer is missing and ``require_index`` is off)."""

    def __init__(self, path: str | Path, require_index: bool = False):
        self.path = Path(path)
        try:
            self._data = self.path.read_bytes()
        except OSError as e:
            raise IoFailure(str(e)) from e
        self._parse_header()
        self.recovered = False
        try:
            self._parse_footer()
        except CorruptIndex:
            if require_index:
                raise
            self.recovered = True
            self._rescan()
        self._chunk_cache: tuple[int, bytes] | None = None

    # -- header ---------------------------------------------------------------

    def _parse_header(self) -> None:
        d = self._data
        if len(d) < 14 or d[:4] != MAGIC:
            raise BadMagic(f"{self.path}: not a PRXS container")
        self.version = struct.unpack_from("<H", d, 4)[0]
        if self.version != FORMAT_VERSION:
            raise VersionUnsupported(f"format version {self.version} unsupported")
        self.section = d[6:10].decode("ascii", errors="replace")
        if self.section not in SECTIONS:
            raise BadMagic(f"unknown section tag {self.section!r}")
        meta_len = struct.unpack_from("<I", d, 10)[0]
        end = 14 + meta_len
        if len(d) < end + 4:
            raise BadMagic("truncated header")
        if struct.unpack_from("<I", d, end)[0] != zlib.crc32(d[:end]):
            raise BadMagic("header checksum mismatch")
        self.meta = json.loads(d[14:end].decode())
        self.streams = [StreamInfo(s["index"], s["id"], s["kind"])
                        for s in self.meta.get("streams", [])]
        self._chunks_start = end + 4

    # -- footer / index --------------------------------------------------------

    def _parse_footer(self) -> None:
        d = self._data
        if len(d) < self._chunks_start + _TRAILER.size:
            raise CorruptIndex("no room for trailer")
        flen, fcrc, magic = _TRAILER.unpack_from(d, len(d) - _TRAILER.size)
        if magic != TRAILER_MAGIC:
            raise CorruptIndex("index trailer magic missing")
        fstart = len(d) - _TRAILER.size - flen
        if fstart < self._chunks_start:
            raise CorruptIndex("footer length inconsistent with file size")
        footer = d[fstart:len(d) - _TRAILER.size]
        if zlib.crc32(footer) != fcrc:
            raise CorruptIndex("footer checksum mismatch")
        self._chunks_end = fstart
        self.index: dict[int, StreamIndex] = {}
        off = 0
        try:
            n_streams = footer[0]
            off = 1
            for _ in range(n_streams):
                sid, count, drops = _STREAM_HEAD.unpack_from(footer, off)
                off += _STREAM_HEAD.size
                entries = []
                for _ in range(count):
                    entries.append(_INDEX_ENTRY.unpack_from(footer, off))
                    off += _INDEX_ENTRY.size
                self.index[sid] = StreamIndex(sample_count=count, drop_count=drops,
                                              entries=entries)
        except (IndexError, struct.error) as e:
            raise CorruptIndex(f"malformed footer: {e}") from e

    def _rescan(self) -> None:
        """Rebuild the index by scanning chunks up to the first damage."""
        self.index = {s.index: StreamIndex(0, 0) for s in self.streams}
        self._chunks_end = len(self._data)
        for chunk_off, payload in self._iter_chunks(stop_on_error=True):
            for rec_off, rec in _iter_chunk_records(payload):
                entry = (rec.timestamp_ns, chunk_off, rec_off)
                self.index.setdefault(rec.stream, StreamIndex(0, 0))
                si = self.index[rec.stream]
                si.entries.append(entry)
                si.sample_count += 1

    # -- chunk access ----------------------------------------------------------

    def _iter_chunks(self, stop_on_error: bool = False) -> Iterator[tuple[int, bytes]]:
        d = self._data
        pos = self._chunks_start
        end = getattr(self, "_chunks_end", len(d))
        while pos + _CHUNK_HEAD.size <= end:
            length, crc = _CHUNK_HEAD.unpack_from(d, pos)
            body_start = pos + _CHUNK_HEAD.size
            if body_start + length > end:
                if stop_on_error:
                    return
                raise CorruptChunk(f"chunk at offset {pos} truncated")
            payload = d[body_start:body_start + length]
            if zlib.crc32(payload) != crc:
                if stop_on_error:
                    return
                raise CorruptChunk(f"chunk at offset {pos} fails CRC-32")
            yield pos, payload
            pos = body_start + length
        if pos != end and not stop_on_error:
            raise CorruptChunk(f"dangling {end - pos} bytes after last chunk")

    def _chunk_payload(self, chunk_off: int) -> bytes:
        if self._chunk_cache and self._chunk_cache[0] == chunk_off:
            return self._chunk_cache[1]
        d = self._data
        if chunk_off + _CHUNK_HEAD.size > len(d):
            raise CorruptChunk(f"chunk offset {chunk_off} out of range")
        length, crc = _CHUNK_HEAD.unpack_from(d, chunk_off)
        body = d[chunk_off + _CHUNK_HEAD.size:chunk_off + _CHUNK_HEAD.size + length]
        if len(body) != length or zlib.crc32(body) != crc:
            raise CorruptChunk(f"chunk at offset {chunk_off} fails CRC-32")
        self._chunk_cache = (chunk_off, body)
        return body

    # -- records ---------------------------------------------------------------

    def iter_records(self) -> Iterator[Record]:
        """All records in file order (the writer interleaves by timestamp)."""
        for _, payload in self._iter_chunks():
            for _, rec in _iter_chunk_records(payload):
                yield rec

    def stream_info(self, stream_id: str) -> StreamInfo:
        for s in self.streams:
            if s.id == stream_id:
                return s
        raise KeyError(stream_id)

    def stream_records(self, stream_id: str) -> list[Record]:
        info = self.stream_info(stream_id)
        si = self.index.get(info.index)
        if si is None:
            return []
        out = []
        for ts, chunk_off, rec_off in si.entries:
            payload = self._chunk_payload(chunk_off)
            rec = _record_at(payload, rec_off)
            if rec.stream != info.index or rec.timestamp_ns != ts:
                raise CorruptIndex(
                    f"index entry ({stream_id}, ts={ts}) does not match its record")
            out.append(rec)
        return out

    def sample_counts(self) -> dict[str, int]:
        return {s.id: self.index.get(s.index, StreamIndex(0, 0)).sample_count
                for s in self.streams}

    def drop_counts(self) -> dict[str, int]:
        return {s.id: self.index.get(s.index, StreamIndex(0, 0)).drop_count
                for s in self.streams}

    # -- validation -------------------------------------------------------------

    def validate(self) -> list[CheckResult]:
        checks = [CheckResult("magic", True), CheckResult("version", True),
                  CheckResult("header-crc", True)]
        chunk_count = 0
        record_count = 0
        chunk_err = ""
        try:
            for _, payload in self._iter_chunks():
                chunk_count += 1
                for _ in _iter_chunk_records(payload):
                    record_count += 1
        except CorruptChunk as e:
            chunk_err = str(e)
        checks.append(CheckResult(
            "chunk-crc", not chunk_err,
            chunk_err or f"{chunk_count} chunks, {record_count} records"))
        checks.append(CheckResult(
            "index-footer", not self.recovered,
            "recovered by sequential scan" if self.recovered else "present"))
        indexed = sum(si.sample_count for si in self.index.values())
        coverage_ok = not chunk_err and not self.recovered and indexed == record_count
        detail = f"{indexed} indexed vs {record_count} stored"
        if not chunk_err and not self.recovered:
            try:
                for s in self.streams:
                    self.stream_records(s.id)
            except (CorruptChunk, CorruptIndex) as e:
                coverage_ok = False
                detail = str(e)
        checks.append(CheckResult("index-coverage", coverage_ok, detail))
        return checks


def _iter_chunk_records(payload: bytes) -> Iterator[tuple[int, Record]]:
    off = 0
    n = len(payload)
    while off < n:
        if off + _RECORD_HEAD.size > n:
            raise CorruptChunk("record header crosses chunk boundary")
        stream, ts, length = _RECORD_HEAD.unpack_from(payload, off)
        start = off + _RECORD_HEAD.size
        if start + length > n:
            raise CorruptChunk("record payload crosses chunk boundary")
        yield off, Record(stream=stream, timestamp_ns=ts,
                          payload=payload[start:start + length])
        off = start + length


def _record_at(payload: bytes, rec_off: int) -> Record:
    for off, rec in _iter_chunk_records(payload[rec_off:]):
        if off == 0:
            return rec
    raise CorruptChunk("empty record slot")
