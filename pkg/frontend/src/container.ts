// PRXS container parsing, implemented against docs/FORMAT.md in the parent
// repository. All integers little-endian; timestamps are u64 nanoseconds and
// surface as BigInt.

import { BinaryReader } from "./binaryReader.js";
import { crc32 } from "./crc32.js";
import { BadMagic, CorruptChunk, CorruptIndex, VersionUnsupported } from "./errors.js";

export const MAGIC = "PRXS";
export const TRAILER_MAGIC = "PRXE";
export const FORMAT_VERSION = 1;

const HEADER_FIXED = 14; // magic + version + section + meta_len
const TRAILER_LEN = 12; // footer_len + footer_crc + "PRXE"
const RECORD_HEAD = 13; // stream u8 + ts u64 + len u32

export interface StreamInfo {
  index: number;
  id: string;
  kind: string;
}

export interface IndexEntry {
  timestampNs: bigint;
  chunkOffset: number;
  recordOffset: number;
}

export interface StreamIndex {
  sampleCount: number;
  dropCount: number;
  entries: IndexEntry[];
}

export interface Record {
  stream: number;
  timestampNs: bigint;
  payload: Uint8Array;
}

export interface ImagePayload {
  sensor: number;
  height: number;
  width: number;
  timestampNs: bigint;
  data: Uint8Array; // h * w * 3 bytes, row-major RGB
}

export class Container {
  readonly version: number;
  readonly section: string;
  readonly meta: Readonly<globalThis.Record<string, unknown>>;
  readonly streams: StreamInfo[];
  readonly index: Map<number, StreamIndex>;

  private readonly data: Uint8Array;
  private chunkCache: { offset: number; payload: Uint8Array } | null = null;

  constructor(data: Uint8Array, source = "<buffer>") {
    this.data = data;
    if (data.length < HEADER_FIXED || new TextDecoder("ascii").decode(data.subarray(0, 4)) !== MAGIC) {
      throw new BadMagic(`${source}: not a PRXS container`);
    }
    const r = new BinaryReader(data);
    r.seek(4);
    this.version = r.readUint16LE();
    if (this.version !== FORMAT_VERSION) {
      throw new VersionUnsupported(`${source}: format version ${this.version} unsupported`);
    }
    this.section = r.readAscii(4);
    const metaLen = r.readUint32LE();
    const headerEnd = HEADER_FIXED + metaLen;
    if (data.length < headerEnd + 4) {
      throw new BadMagic(`${source}: truncated header`);
    }
    const metaJson = r.readUtf8(metaLen);
    const headerCrc = r.readUint32LE();
    if (headerCrc !== crc32(data.subarray(0, headerEnd))) {
      throw new BadMagic(`${source}: header checksum mismatch`);
    }
    this.meta = JSON.parse(metaJson);
    const streams = (this.meta["streams"] ?? []) as Array<{
      index: number;
      id: string;
      kind: string;
    }>;
    this.streams = streams.map((s) => ({ index: s.index, id: s.id, kind: s.kind }));
    this.index = this.parseFooter(headerEnd + 4, source);
  }

  private parseFooter(chunksStart: number, source: string): Map<number, StreamIndex> {
    const d = this.data;
    if (d.length < chunksStart + TRAILER_LEN) {
      throw new CorruptIndex(`${source}: no room for index trailer`);
    }
    const tr = new BinaryReader(d);
    tr.seek(d.length - TRAILER_LEN);
    const footerLen = tr.readUint32LE();
    const footerCrc = tr.readUint32LE();
    if (tr.readAscii(4) !== TRAILER_MAGIC) {
      throw new CorruptIndex(`${source}: index trailer magic missing`);
    }
    const footerStart = d.length - TRAILER_LEN - footerLen;
    if (footerStart < chunksStart) {
      throw new CorruptIndex(`${source}: footer length inconsistent with file size`);
    }
    const footer = d.subarray(footerStart, d.length - TRAILER_LEN);
    if (crc32(footer) !== footerCrc) {
      throw new CorruptIndex(`${source}: footer checksum mismatch`);
    }
    const index = new Map<number, StreamIndex>();
    try {
      const fr = new BinaryReader(footer);
      const streamCount = fr.readUint8();
      for (let s = 0; s < streamCount; s++) {
        const stream = fr.readUint8();
        const sampleCount = fr.readUint32LE();
        const dropCount = fr.readUint32LE();
        const entries: IndexEntry[] = [];
        for (let i = 0; i < sampleCount; i++) {
          entries.push({
            timestampNs: fr.readUint64LE(),
            chunkOffset: Number(fr.readUint64LE()),
            recordOffset: fr.readUint32LE(),
          });
        }
        index.set(stream, { sampleCount, dropCount, entries });
      }
    } catch (e) {
      throw new CorruptIndex(`${source}: malformed footer: ${e}`);
    }
    return index;
  }

  streamById(id: string): StreamInfo {
    const info = this.streams.find((s) => s.id === id);
    if (info === undefined) {
      throw new CorruptIndex(`stream ${id} not declared in header`);
    }
    return info;
  }

  sampleCounts(): globalThis.Record<string, number> {
    const out: globalThis.Record<string, number> = {};
    for (const s of this.streams) {
      out[s.id] = this.index.get(s.index)?.sampleCount ?? 0;
    }
    return out;
  }

  dropCounts(): globalThis.Record<string, number> {
    const out: globalThis.Record<string, number> = {};
    for (const s of this.streams) {
      out[s.id] = this.index.get(s.index)?.dropCount ?? 0;
    }
    return out;
  }

  private chunkPayload(chunkOffset: number): Uint8Array {
    if (this.chunkCache && this.chunkCache.offset === chunkOffset) {
      return this.chunkCache.payload;
    }
    const d = this.data;
    if (chunkOffset + 8 > d.length) {
      throw new CorruptChunk(`chunk offset ${chunkOffset} out of range`);
    }
    const r = new BinaryReader(d);
    r.seek(chunkOffset);
    const length = r.readUint32LE();
    const crc = r.readUint32LE();
    if (chunkOffset + 8 + length > d.length) {
      throw new CorruptChunk(`chunk at offset ${chunkOffset} truncated`);
    }
    const payload = d.subarray(chunkOffset + 8, chunkOffset + 8 + length);
    if (crc32(payload) !== crc) {
      throw new CorruptChunk(`chunk at offset ${chunkOffset} fails CRC-32`);
    }
    this.chunkCache = { offset: chunkOffset, payload };
    return payload;
  }

  recordAt(entry: IndexEntry): Record {
    const payload = this.chunkPayload(entry.chunkOffset);
    if (entry.recordOffset + RECORD_HEAD > payload.length) {
      throw new CorruptChunk(`record offset ${entry.recordOffset} outside its chunk`);
    }
    const r = new BinaryReader(payload);
    r.seek(entry.recordOffset);
    const stream = r.readUint8();
    const timestampNs = r.readUint64LE();
    const length = r.readUint32LE();
    if (entry.recordOffset + RECORD_HEAD + length > payload.length) {
      throw new CorruptChunk(`record payload crosses its chunk boundary`);
    }
    if (timestampNs !== entry.timestampNs) {
      throw new CorruptIndex(`index entry timestamp does not match its record`);
    }
    return { stream, timestampNs, payload: r.readBytes(length) };
  }
}

export function parseJoints(payload: Uint8Array, expected = 22): Float64Array {
  if (payload.length !== expected * 8) {
    throw new CorruptChunk(`joint payload is ${payload.length} bytes, expected ${expected * 8}`);
  }
  // copy to guarantee alignment for the Float64Array view
  const copy = payload.slice();
  return new Float64Array(copy.buffer, 0, expected);
}

export function parseImage(payload: Uint8Array): ImagePayload {
  if (payload.length < 16) {
    throw new CorruptChunk("image payload shorter than its 16-byte header");
  }
  const r = new BinaryReader(payload);
  const sensor = r.readUint8();
  const height = r.readUint16LE();
  const width = r.readUint16LE();
  const timestampNs = r.readUint64LE();
  r.readBytes(3); // reserved
  const expected = 16 + height * width * 3;
  if (payload.length !== expected) {
    throw new CorruptChunk(`image payload length ${payload.length}, expected ${expected}`);
  }
  return { sensor, height, width, timestampNs, data: payload.subarray(16) };
}
