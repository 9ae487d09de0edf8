// Read-only bindings over aligned-session (ALGN) and episode (EPIS) files,
// for feeding training pipelines. Raw sessions (SESS) open for metadata but
// carry no grid-aligned steps.

import { readFileSync } from "node:fs";

import {
  Container,
  ImagePayload,
  parseImage,
  parseJoints,
} from "./container.js";

export const STEP_STREAMS = [
  "joint-bus",
  "wrist-cam-left",
  "wrist-cam-right",
  "tactile-left",
  "tactile-right",
] as const;

export const ACTION_STREAM = "action";

export interface Step {
  timestampNs: bigint;
  joints: Float64Array; // 22 angles, rad
  wrist: [ImagePayload, ImagePayload];
  tactile: [ImagePayload, ImagePayload];
  /** present in EPIS files: 8 arm deltas + 14 absolute hand targets */
  action: Float64Array | null;
}

/** Header metadata in the exact shape of `periop inspect --format jsonl`. */
export interface Metadata {
  magic: string;
  version: number;
  section: string;
  variant: string | null;
  rate_hz: number | null;
  streams: Array<{ index: number; id: string; kind: string }>;
  sample_counts: Record<string, number>;
  drop_counts: Record<string, number>;
  recovered: boolean;
}

export class LoaderHandle {
  readonly metadata: Metadata;

  private readonly container: Container;
  private cursor = 0;
  private readonly stepCount: number;

  constructor(container: Container) {
    this.container = container;
    this.metadata = {
      magic: "PRXS",
      version: container.version,
      section: container.section,
      variant: (container.meta["variant"] as string | undefined) ?? null,
      rate_hz: (container.meta["rate_hz"] as number | undefined) ?? null,
      streams: container.streams.map((s) => ({ index: s.index, id: s.id, kind: s.kind })),
      sample_counts: container.sampleCounts(),
      drop_counts: container.dropCounts(),
      recovered: false,
    };
    if (this.isAligned) {
      const joint = container.streamById("joint-bus");
      this.stepCount = container.index.get(joint.index)?.sampleCount ?? 0;
    } else {
      this.stepCount = 0;
    }
  }

  get isAligned(): boolean {
    return this.container.section === "ALGN" || this.container.section === "EPIS";
  }

  get length(): number {
    return this.stepCount;
  }

  /** Next grid-aligned step, or null at end of stream. */
  nextStep(): Step | null {
    if (!this.isAligned) {
      throw new Error(
        `${this.container.section} files carry raw samples, not aligned steps; ` +
          "align the session first",
      );
    }
    if (this.cursor >= this.stepCount) {
      return null;
    }
    const i = this.cursor++;
    const rec = (id: string) => {
      const info = this.container.streamById(id);
      const entry = this.container.index.get(info.index)!.entries[i];
      return this.container.recordAt(entry);
    };
    const joint = rec("joint-bus");
    const step: Step = {
      timestampNs: joint.timestampNs,
      joints: parseJoints(joint.payload.subarray(0, 176)),
      wrist: [
        parseImage(rec("wrist-cam-left").payload),
        parseImage(rec("wrist-cam-right").payload),
      ],
      tactile: [
        parseImage(rec("tactile-left").payload),
        parseImage(rec("tactile-right").payload),
      ],
      action: null,
    };
    if (this.container.section === "EPIS") {
      step.action = parseJoints(rec(ACTION_STREAM).payload);
    }
    return step;
  }

  rewind(): void {
    this.cursor = 0;
  }

  *steps(): Generator<Step> {
    this.rewind();
    for (;;) {
      const step = this.nextStep();
      if (step === null) {
        return;
      }
      yield step;
    }
  }
}

export function open(path: string): LoaderHandle {
  return new LoaderHandle(new Container(new Uint8Array(readFileSync(path)), path));
}

export function openBuffer(data: Uint8Array, source = "<buffer>"): LoaderHandle {
  return new LoaderHandle(new Container(data, source));
}
