export class BadMagic extends Error {
  constructor(message: string) {
    super(message);
    this.name = "BadMagic";
  }
}

export class VersionUnsupported extends Error {
  constructor(message: string) {
    super(message);
    this.name = "VersionUnsupported";
  }
}

export class CorruptIndex extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CorruptIndex";
  }
}

export class CorruptChunk extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CorruptChunk";
  }
}
