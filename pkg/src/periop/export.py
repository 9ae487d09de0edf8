"""Action-labeled training episodes and the training-time augmentations.

Action convention per step t (n steps total, horizon k, index clamped to the
final step so the last delta is exactly zero):

    arm delta[t]   = arm(min(t + k, n-1)) - arm(t)      8 values
    hand target[t] = hand(min(t + 1, n-1))              14 values (absolute)

Augmentations (all deterministic for a given seed; the input episode is never
mutated):
    * per wrist image: brightness scale 1+b and hue rotation h, with b, h
      drawn uniform in [-jitter, +jitter] (hue as a fraction of the circle);
    * per step, with the configured probability: uniform joint noise added to
      the eight arm *state* angles (action targets untouched);
    * per wrist image: dropout to a zero image with the configured probability.

RNG draw order is frozen (documented in the code) so parallel episode
pipelines with per-episode seeds are order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from .container import ContainerReader, ContainerWriter, StreamInfo
from .errors import BadHorizon, InvalidConfig, MissingStream, TooShort
from .session import (
    ALIGN_META_STREAM,
    ARM_JOINTS,
    AlignedStep,
    JOINT_COUNT,
    STREAM_KINDS,
    pack_joints,
    unpack_joints,
)
from .tactile import pack_image, unpack_image

SOURCE_TAGS = ("perioperation", "teleoperation")

ACTION_STREAM = "action"


@dataclass(frozen=True)
class Episode:
    steps: tuple[AlignedStep, ...]
    arm_deltas: np.ndarray      # n x 8, rad
    hand_targets: np.ndarray    # n x 14, rad (absolute next-step)
    source_tag: str
    task_id: str = ""
    horizon: int = 1

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        n = len(self.steps)
        if self.arm_deltas.shape != (n, ARM_JOINTS) or \
                self.hand_targets.shape != (n, JOINT_COUNT - ARM_JOINTS):
            raise BadHorizon(
                f"action arrays must be {n}x{ARM_JOINTS} and {n}x{JOINT_COUNT - ARM_JOINTS}")
        if self.source_tag not in SOURCE_TAGS:
            raise InvalidConfig(f"source tag must be one of {SOURCE_TAGS}")

    @property
    def duration_s(self) -> float:
        return (self.steps[-1].timestamp_ns - self.steps[0].timestamp_ns) / 1e9

    def actions(self) -> np.ndarray:
        """n x 22 matrix: [8 arm deltas | 14 hand absolutes] per step."""
        return np.hstack([self.arm_deltas, self.hand_targets])


def export_episode(aligned: Sequence[AlignedStep], horizon: int = 1,
                   source_tag: str = "perioperation", task_id: str = "") -> Episode:
    """Label an aligned step sequence with arm-delta / hand-absolute targets."""
    steps = tuple(aligned)
    n = len(steps)
    if n < 2:
        raise TooShort(f"need at least 2 aligned steps, got {n}")
    if horizon < 1:
        raise BadHorizon(f"chunk horizon must be >= 1, got {horizon}")
    joints = np.stack([s.joints for s in steps])
    arm = joints[:, :ARM_JOINTS]
    hand = joints[:, ARM_JOINTS:]
    idx_k = np.minimum(np.arange(n) + horizon, n - 1)
    idx_1 = np.minimum(np.arange(n) + 1, n - 1)
    return Episode(steps=steps, arm_deltas=arm[idx_k] - arm,
                   hand_targets=hand[idx_1], source_tag=source_tag,
                   task_id=task_id, horizon=horizon)


@dataclass(frozen=True)
class AugmentConfig:
    color_jitter: float = 0.1        # brightness and hue bound
    joint_noise_deg: float = 10.0    # arm-state noise bound
    joint_noise_prob: float = 0.1
    wrist_dropout_prob: float = 0.3
    seed: int = 0

    def __post_init__(self):
        for name in ("joint_noise_prob", "wrist_dropout_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1], got {v}")
        for name in ("color_jitter", "joint_noise_deg"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be >= 0")


def _jitter_image(img: np.ndarray, brightness: float, hue: float) -> np.ndarray:
    if brightness == 0.0 and hue == 0.0:
        return img
    rgb = img.astype(np.float64) / 255.0
    rgb = np.clip(rgb * (1.0 + brightness), 0.0, 1.0)
    if hue != 0.0:
        hsv = rgb_to_hsv(rgb)
        hsv[..., 0] = (hsv[..., 0] + hue) % 1.0
        rgb = hsv_to_rgb(hsv)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def augment(episode: Episode, config: AugmentConfig) -> Episode:
    """Apply the training augmentations; timestamps, tactile images, and
    action targets pass through untouched."""
    rng = np.random.default_rng(config.seed)
    noise_bound = config.joint_noise_deg * math.pi / 180.0
    new_steps = []
    # Draw order per step: joint-noise coin (+8 noise values when it hits),
    # then per wrist image: brightness, hue, dropout coin.
    for step in episode.steps:
        joints = step.joints.copy()
        if rng.random() < config.joint_noise_prob:
            joints[:ARM_JOINTS] += rng.uniform(-noise_bound, noise_bound, ARM_JOINTS)
        wrist = []
        for img in step.wrist:
            b = rng.uniform(-config.color_jitter, config.color_jitter) \
                if config.color_jitter > 0 else 0.0
            h = rng.uniform(-config.color_jitter, config.color_jitter) \
                if config.color_jitter > 0 else 0.0
            out = _jitter_image(img, b, h)
            if rng.random() < config.wrist_dropout_prob:
                out = np.zeros_like(img)
            wrist.append(out)
        new_steps.append(AlignedStep(
            timestamp_ns=step.timestamp_ns, joints=joints,
            wrist=(wrist[0], wrist[1]), tactile=step.tactile,
            source_ts=dict(step.source_ts)))
    return Episode(steps=tuple(new_steps), arm_deltas=episode.arm_deltas.copy(),
                   hand_targets=episode.hand_targets.copy(),
                   source_tag=episode.source_tag, task_id=episode.task_id,
                   horizon=episode.horizon)


# -----------------------------------------------------------------------------
# episode container I/O (EPIS section; same record layout as ALGN plus actions)
# -----------------------------------------------------------------------------

def write_episode(episode: Episode, path: str | Path, *,
                  variant: str = "DEXOP-7", rate_hz: float = 20.0) -> None:
    streams = [StreamInfo(index=i, id=k, kind=k) for i, k in enumerate(STREAM_KINDS)]
    streams.append(StreamInfo(index=5, id=ACTION_STREAM, kind=ACTION_STREAM))
    streams.append(StreamInfo(index=6, id=ALIGN_META_STREAM, kind=ALIGN_META_STREAM))
    meta = {
        "variant": variant,
        "rate_hz": rate_hz,
        "source_tag": episode.source_tag,
        "task_id": episode.task_id,
        "horizon": episode.horizon,
        "duration_s": episode.duration_s,
    }
    sensors = {"wrist-cam-left": "wrist-left", "wrist-cam-right": "wrist-right",
               "tactile-left": "super-left", "tactile-right": "super-right"}
    actions = episode.actions()
    with ContainerWriter(path, "EPIS", streams, meta) as w:
        for i, step in enumerate(episode.steps):
            t = step.timestamp_ns
            w.add(0, t, pack_joints(step.joints))
            for si, kind in enumerate(STREAM_KINDS[1:], start=1):
                img = {"wrist-cam-left": step.wrist[0],
                       "wrist-cam-right": step.wrist[1],
                       "tactile-left": step.tactile[0],
                       "tactile-right": step.tactile[1]}[kind]
                w.add(si, t, pack_image(sensors[kind], step.source_ts[kind], img))
            w.add(5, t, actions[i].astype("<f8").tobytes())
            src = b"".join(step.source_ts[k].to_bytes(8, "little")
                           for k in STREAM_KINDS)
            w.add(6, t, src)


def read_episode(path: str | Path) -> Episode:
    reader = ContainerReader(path)
    if reader.section != "EPIS":
        raise MissingStream(f"{path} is a {reader.section} file, expected EPIS")
    by_kind = {k: reader.stream_records(k) for k in STREAM_KINDS}
    action_recs = reader.stream_records(ACTION_STREAM)
    meta_recs = reader.stream_records(ALIGN_META_STREAM)
    steps = []
    actions = []
    for i, rec in enumerate(by_kind["joint-bus"]):
        src = {k: int.from_bytes(meta_recs[i].payload[j * 8:(j + 1) * 8], "little")
               for j, k in enumerate(STREAM_KINDS)}
        _, _, wl = unpack_image(by_kind["wrist-cam-left"][i].payload)
        _, _, wr = unpack_image(by_kind["wrist-cam-right"][i].payload)
        _, _, tl = unpack_image(by_kind["tactile-left"][i].payload)
        _, _, tr = unpack_image(by_kind["tactile-right"][i].payload)
        steps.append(AlignedStep(timestamp_ns=rec.timestamp_ns,
                                 joints=unpack_joints(rec.payload),
                                 wrist=(wl, wr), tactile=(tl, tr), source_ts=src))
        actions.append(np.frombuffer(action_recs[i].payload, dtype="<f8"))
    act = np.stack(actions)
    return Episode(steps=tuple(steps), arm_deltas=act[:, :ARM_JOINTS].copy(),
                   hand_targets=act[:, ARM_JOINTS:].copy(),
                   source_tag=str(reader.meta.get("source_tag", "perioperation")),
                   task_id=str(reader.meta.get("task_id", "")),
                   horizon=int(reader.meta.get("horizon", 1)))
