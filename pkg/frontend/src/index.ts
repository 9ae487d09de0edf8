export { BinaryReader } from "./binaryReader.js";
export { crc32 } from "./crc32.js";
export { BadMagic, CorruptChunk, CorruptIndex, VersionUnsupported } from "./errors.js";
export {
  Container,
  FORMAT_VERSION,
  MAGIC,
  parseImage,
  parseJoints,
} from "./container.js";
export type { ImagePayload, IndexEntry, Record, StreamInfo } from "./container.js";
export { ACTION_STREAM, LoaderHandle, STEP_STREAMS, open, openBuffer } from "./loader.js";
export type { Metadata, Step } from "./loader.js";
