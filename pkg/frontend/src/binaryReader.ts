export class BinaryReader {
  private readonly view: DataView;
  private readonly bytes: Uint8Array;
  private pos = 0;

  constructor(data: Uint8Array) {
    this.view = new DataView(data.buffer, data.byteOffset, data.byteLength);
    this.bytes = data;
  }

  get position(): number {
    return this.pos;
  }

  get length(): number {
    return this.view.byteLength;
  }

  seek(offset: number): void {
    this.pos = offset;
  }

  readUint8(): number {
    const val = this.view.getUint8(this.pos);
    this.pos += 1;
    return val;
  }

  readUint16LE(): number {
    const val = this.view.getUint16(this.pos, true);
    this.pos += 2;
    return val;
  }

  readUint32LE(): number {
    const val = this.view.getUint32(this.pos, true);
    this.pos += 4;
    return val;
  }

  readUint64LE(): bigint {
    const val = this.view.getBigUint64(this.pos, true);
    this.pos += 8;
    return val;
  }

  readBytes(length: number): Uint8Array {
    const slice = this.bytes.subarray(this.pos, this.pos + length);
    this.pos += length;
    return slice;
  }

  readAscii(length: number): string {
    return new TextDecoder("ascii").decode(this.readBytes(length));
  }

  readUtf8(length: number): string {
    return new TextDecoder().decode(this.readBytes(length));
  }
}
