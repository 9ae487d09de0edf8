"""Deterministic synthetic stream sources for desk-scale recordings.

No hardware drivers live here: sources are iterator objects pre-stamped with
a virtual capture clock (ns from 0), so a given seed yields a byte-identical
session file. The joint source runs its hand angles through the encoder wire
round trip (angle -> 12-bit count -> angle), so recorded values carry the real
quantization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import wire
from .hand_model import load_model
from .session import ARM_JOINTS, JOINT_COUNT, SampleSource, pack_joints
from .tactile import pack_image, super_image, synth_press, DISTAL_SENSORS


def _timestamps(rng: np.random.Generator, duration_s: float, rate_hz: float,
                jitter_ms: float) -> list[int]:
    period_ns = 1e9 / rate_hz
    n = int(round(duration_s * rate_hz))
    jitter_ns = jitter_ms * 1e6
    ts = []
    for k in range(n):
        j = rng.uniform(-jitter_ns, jitter_ns) if jitter_ms > 0 else 0.0
        ts.append(max(0, int(round(k * period_ns + j))))
    return ts


@dataclass
class SyntheticJointSource(SampleSource):
    """22-angle waveform: sinusoidal arms, in-limit hand joints, encoder-quantized."""

    seed: int
    duration_s: float
    rate_hz: float = 20.0
    jitter_ms: float = 0.0
    variant: str = "DEXOP-7"
    stream_id: str = "joint-bus"
    kind: str = "joint-bus"

    def samples(self) -> Iterator[tuple[int, bytes]]:
        rng = np.random.default_rng(self.seed)
        ts = _timestamps(rng, self.duration_s, self.rate_hz, self.jitter_ms)
        model = load_model(self.variant)
        lo = np.array([j.limits[0] for j in model.joints])
        hi = np.array([j.limits[1] for j in model.joints])
        mid, amp = (lo + hi) / 2.0, 0.45 * (hi - lo)
        arm_phase = rng.uniform(0, 2 * math.pi, ARM_JOINTS)
        hand_phase = rng.uniform(0, 2 * math.pi, 2 * model.dof)
        arm_freq = rng.uniform(0.1, 0.5, ARM_JOINTS)
        hand_freq = rng.uniform(0.2, 0.8, 2 * model.dof)
        spec = wire.EncoderSpec()
        for t in ts:
            sec = t / 1e9
            q = np.zeros(JOINT_COUNT)
            q[:ARM_JOINTS] = 0.6 * np.sin(2 * math.pi * arm_freq * sec + arm_phase)
            # two hands share the model; phases differ per hand
            both = np.concatenate([
                mid + amp * np.sin(2 * math.pi * hand_freq[:model.dof] * sec
                                   + hand_phase[:model.dof]),
                mid + amp * np.sin(2 * math.pi * hand_freq[model.dof:] * sec
                                   + hand_phase[model.dof:]),
            ])
            # encoder wire round trip: quantize to 12-bit counts
            both = np.array([
                wire.count_to_radians(wire.radians_to_count(v, spec), spec)
                for v in both])
            q[ARM_JOINTS:] = both
            yield t, pack_joints(q)


@dataclass
class SyntheticCameraSource(SampleSource):
    """Wrist camera: gradient background with a seeded moving dot."""

    seed: int
    duration_s: float
    stream_id: str
    sensor: str               # "wrist-left" | "wrist-right"
    rate_hz: float = 20.0
    jitter_ms: float = 0.0
    height: int = 120
    width: int = 160

    def __post_init__(self):
        self.kind = self.stream_id

    def samples(self) -> Iterator[tuple[int, bytes]]:
        rng = np.random.default_rng(self.seed)
        ts = _timestamps(rng, self.duration_s, self.rate_hz, self.jitter_ms)
        h, w = self.height, self.width
        base = np.linspace(0, 160, w, dtype=np.uint8)[None, :, None]
        base = np.broadcast_to(base, (h, w, 3)).copy()
        for k, t in enumerate(ts):
            img = base.copy()
            r = int((math.sin(k / 9.0) * 0.4 + 0.5) * (h - 8)) + 4
            c = int((math.cos(k / 7.0) * 0.4 + 0.5) * (w - 8)) + 4
            img[r - 3:r + 3, c - 3:c + 3] = [255, 64, 32]
            noise = rng.integers(0, 6, size=(h, w, 3), dtype=np.uint8)
            img = np.clip(img.astype(np.int16) + noise, 0, 255).astype(np.uint8)
            yield t, pack_image(self.sensor, t, img)


@dataclass
class SyntheticTactileSource(SampleSource):
    """Per-hand super-image feed built from three synthetic distal presses."""

    seed: int
    duration_s: float
    stream_id: str
    hand: str                 # "left" | "right"
    rate_hz: float = 20.0
    jitter_ms: float = 0.0
    height: int = 120
    width: int = 160

    def __post_init__(self):
        self.kind = self.stream_id

    def samples(self) -> Iterator[tuple[int, bytes]]:
        rng = np.random.default_rng(self.seed)
        ts = _timestamps(rng, self.duration_s, self.rate_hz, self.jitter_ms)
        h, w = self.height, self.width
        for k, t in enumerate(ts):
            frames = []
            for fi, sensor in enumerate(DISTAL_SENSORS):
                force = max(0.0, 12.0 * math.sin(2 * math.pi * k / 50.0 + fi))
                point = (h / 2 + 0.2 * h * math.sin(k / 11.0 + fi),
                         w / 2 + 0.2 * w * math.cos(k / 13.0 + fi))
                frames.append(synth_press(sensor, point, force,
                                          seed=self.seed * 1000 + k * 10 + fi,
                                          height=h, width=w, timestamp_ns=t))
            sup = super_image(frames, hand=self.hand)
            yield t, pack_image(f"super-{self.hand}", t, sup.image)


@dataclass
class FileReplaySource(SampleSource):
    """Replays one stream of an existing session file, sample for sample."""

    path: str
    stream_id: str
    kind: str = ""

    def __post_init__(self):
        if not self.kind:
            self.kind = self.stream_id

    def samples(self) -> Iterator[tuple[int, bytes]]:
        from .container import ContainerReader

        reader = ContainerReader(self.path)
        for rec in reader.stream_records(self.stream_id):
            yield rec.timestamp_ns, rec.payload


def replay_sources(path: str) -> list[SampleSource]:
    """One FileReplaySource per stream of a recorded session."""
    from .container import ContainerReader

    reader = ContainerReader(path)
    return [FileReplaySource(path=str(path), stream_id=s.id, kind=s.kind)
            for s in reader.streams]


def make_synthetic_sources(seed: int, duration_s: float, rate_hz: float = 20.0,
                           jitter_ms: float = 0.0, height: int = 120,
                           width: int = 160,
                           variant: str = "DEXOP-7") -> list[SampleSource]:
    """The full five-stream set for one recording, with derived per-stream seeds."""
    seeds = np.random.SeedSequence(seed).generate_state(5)
    return [
        SyntheticJointSource(seed=int(seeds[0]), duration_s=duration_s,
                             rate_hz=rate_hz, jitter_ms=jitter_ms, variant=variant),
        SyntheticCameraSource(seed=int(seeds[1]), duration_s=duration_s,
                              stream_id="wrist-cam-left", sensor="wrist-left",
                              rate_hz=rate_hz, jitter_ms=jitter_ms,
                              height=height, width=width),
        SyntheticCameraSource(seed=int(seeds[2]), duration_s=duration_s,
                              stream_id="wrist-cam-right", sensor="wrist-right",
                              rate_hz=rate_hz, jitter_ms=jitter_ms,
                              height=height, width=width),
        SyntheticTactileSource(seed=int(seeds[3]), duration_s=duration_s,
                               stream_id="tactile-left", hand="left",
                               rate_hz=rate_hz, jitter_ms=jitter_ms,
                               height=height, width=width),
        SyntheticTactileSource(seed=int(seeds[4]), duration_s=duration_s,
                               stream_id="tactile-right", hand="right",
                               rate_hz=rate_hz, jitter_ms=jitter_ms,
                               height=height, width=width),
    ]
