"""Tactile frames, delta images, per-hand super-images, contact summaries, and
the synthetic press generator used for desk-scale testing.

Images are H x W x 3 uint8 arrays. Delta images store signed differences as
offset-128 bytes with saturation (128 = no change), computed per channel.
Super-images concatenate the thumb/index/middle distal frames horizontally,
in that fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, OutOfBounds, SensorMismatch, WrongSensorSet

DEFAULT_H, DEFAULT_W = 120, 160

DISTAL_SENSORS = ("thumb-distal", "index-distal", "middle-distal")

SENSOR_IDS = DISTAL_SENSORS + (
    "proximal-thumb", "proximal-index", "proximal-middle", "proximal-ring", "palm",
)

# Wire codes for the 16-byte image header (docs/FORMAT.md). Super-images and
# wrist cameras share the header format with their own codes.
SENSOR_CODES = {
    "thumb-distal": 0,
    "index-distal": 1,
    "middle-distal": 2,
    "proximal-thumb": 3,
    "proximal-index": 4,
    "proximal-middle": 5,
    "proximal-ring": 6,
    "palm": 7,
    "wrist-left": 16,
    "wrist-right": 17,
    "super-left": 24,
    "super-right": 25,
}
SENSOR_BY_CODE = {v: k for k, v in SENSOR_CODES.items()}

IMAGE_HEADER_LEN = 16

# Synthetic press constants: documented, arbitrary calibration.
SYNTH_BASE_LEVEL = 32
SYNTH_COUNTS_PER_N = 3.0
SYNTH_SIGMA_BASE_PX = 8.0
SYNTH_SIGMA_PER_N = 0.15
SYNTH_NOISE_COUNTS = 2


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise DimensionMismatch(f"image must be HxWx3 uint8, got {img.shape} {img.dtype}")
    out = img.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TactileFrame:
    sensor: str
    timestamp_ns: int
    image: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "image", _check_image(self.image))


@dataclass(frozen=True)
class SuperImage:
    hand: str            # "left" | "right"
    timestamp_ns: int
    image: np.ndarray    # H x 3W x 3

    def __post_init__(self):
        object.__setattr__(self, "image", _check_image(self.image))


@dataclass(frozen=True)
class DeltaImage:
    sensor: str
    reference_ns: int
    current_ns: int
    image: np.ndarray    # offset-128 encoding

    def __post_init__(self):
        object.__setattr__(self, "image", _check_image(self.image))


@dataclass(frozen=True)
class ContactSummary:
    count: int
    centroid: tuple[float, float] | None  # (row, col), intensity-weighted
    activation: float                     # mean |pixel - 128| over the mask
    mask: np.ndarray

    @property
    def in_contact(self) -> bool:
        return self.count > 0


def delta(current: TactileFrame, initial: TactileFrame) -> DeltaImage:
    """Per-pixel, per-channel saturating difference: clamp(cur - init + 128)."""
    if current.sensor != initial.sensor:
        raise SensorMismatch(f"{current.sensor!r} vs {initial.sensor!r}")
    if current.image.shape != initial.image.shape:
        raise DimensionMismatch(
            f"{current.image.shape} vs {initial.image.shape}")
    diff = current.image.astype(np.int16) - initial.image.astype(np.int16) + 128
    return DeltaImage(sensor=current.sensor,
                      reference_ns=initial.timestamp_ns,
                      current_ns=current.timestamp_ns,
                      image=np.clip(diff, 0, 255).astype(np.uint8))


def super_image(frames: Sequence[TactileFrame], hand: str) -> SuperImage:
    """Concatenate the three distal frames of one hand, thumb|index|middle."""
    by_sensor = {f.sensor: f for f in frames}
    if len(frames) != 3 or set(by_sensor) != set(DISTAL_SENSORS):
        raise WrongSensorSet(
            f"need exactly {DISTAL_SENSORS}, got {sorted(f.sensor for f in frames)}")
    ordered = [by_sensor[s] for s in DISTAL_SENSORS]
    shape = ordered[0].image.shape
    for f in ordered[1:]:
        if f.image.shape != shape:
            raise DimensionMismatch(f"{f.sensor}: {f.image.shape} != {shape}")
    img = np.concatenate([f.image for f in ordered], axis=1)
    return SuperImage(hand=hand, timestamp_ns=max(f.timestamp_ns for f in ordered),
                      image=img)


def split_super_image(sup: SuperImage) -> list[TactileFrame]:
    """Inverse of super_image: recover the three constituent frames."""
    w = sup.image.shape[1] // 3
    return [TactileFrame(sensor=s, timestamp_ns=sup.timestamp_ns,
                         image=sup.image[:, i * w:(i + 1) * w])
            for i, s in enumerate(DISTAL_SENSORS)]


def contact_summary(delta_img: DeltaImage, threshold: int = 12) -> ContactSummary:
    """Threshold the delta magnitude and summarize the activated region.

    The mask marks pixels where any channel deviates from 128 by more than
    ``threshold``; the centroid weights pixels by their mean absolute
    deviation. An empty mask yields a no-contact summary.
    """
    mag = np.abs(delta_img.image.astype(np.int16) - 128)
    mask = np.any(mag > threshold, axis=2)
    count = int(np.count_nonzero(mask))
    if count == 0:
        return ContactSummary(count=0, centroid=None, activation=0.0, mask=mask)
    weights = mag.mean(axis=2)[mask]
    rows, cols = np.nonzero(mask)
    wsum = float(weights.sum())
    centroid = (float((rows * weights).sum() / wsum),
                float((cols * weights).sum() / wsum))
    activation = float(weights.mean())
    return ContactSummary(count=count, centroid=centroid,
                          activation=activation, mask=mask)


def synth_press(sensor: str, point_px: tuple[float, float], force_n: float,
                seed: int, height: int = DEFAULT_H, width: int = DEFAULT_W,
                timestamp_ns: int = 0) -> TactileFrame:
    """Synthetic tactile frame: Gaussian blob on a noisy baseline.

    Peak amplitude min(255, round(3 * force)), sigma 8 px + 0.15 px/N, plus
    seeded uniform +/-2 count noise. force = 0 reproduces the noise-only
    baseline for the same seed.
    """
    if sensor not in SENSOR_CODES:
        raise WrongSensorSet(f"unknown sensor {sensor!r}")
    if force_n < 0:
        raise ValueError("force must be >= 0")
    row, col = point_px
    if not (0 <= row < height and 0 <= col < width):
        raise OutOfBounds(f"point {point_px} outside {height}x{width} image")
    rng = np.random.default_rng(seed)
    noise = rng.integers(-SYNTH_NOISE_COUNTS, SYNTH_NOISE_COUNTS + 1,
                         size=(height, width, 3)).astype(np.int16)
    img = np.full((height, width, 3), SYNTH_BASE_LEVEL, dtype=np.int16) + noise
    if force_n > 0:
        amp = min(255.0, float(round(SYNTH_COUNTS_PER_N * force_n)))
        sigma = SYNTH_SIGMA_BASE_PX + SYNTH_SIGMA_PER_N * force_n
        rr = np.arange(height, dtype=float)[:, None] - row
        cc = np.arange(width, dtype=float)[None, :] - col
        blob = amp * np.exp(-(rr * rr + cc * cc) / (2.0 * sigma * sigma))
        img = img + np.rint(blob).astype(np.int16)[:, :, None]
    return TactileFrame(sensor=sensor, timestamp_ns=timestamp_ns,
                        image=np.clip(img, 0, 255).astype(np.uint8))


# -----------------------------------------------------------------------------
# serialization: 16-byte header + raw planes (shared with wrist images)
# -----------------------------------------------------------------------------

def pack_image(sensor: str, timestamp_ns: int, image: np.ndarray) -> bytes:
    """[sensor u8][H u16][W u16][timestamp u64][reserved 3B] + H*W*3 bytes."""
    code = SENSOR_CODES.get(sensor)
    if code is None:
        raise WrongSensorSet(f"unknown sensor {sensor!r}")
    h, w = image.shape[:2]
    header = bytes([code]) + h.to_bytes(2, "little") + w.to_bytes(2, "little") \
        + int(timestamp_ns).to_bytes(8, "little") + b"\x00\x00\x00"
    return header + np.ascontiguousarray(image, dtype=np.uint8).tobytes()


def unpack_image(payload: bytes) -> tuple[str, int, np.ndarray]:
    """Inverse of pack_image. Returns (sensor id, timestamp ns, image)."""
    if len(payload) < IMAGE_HEADER_LEN:
        raise DimensionMismatch("image payload shorter than its header")
    code = payload[0]
    h = int.from_bytes(payload[1:3], "little")
    w = int.from_bytes(payload[3:5], "little")
    ts = int.from_bytes(payload[5:13], "little")
    sensor = SENSOR_BY_CODE.get(code)
    if sensor is None:
        raise WrongSensorSet(f"unknown sensor code {code}")
    expect = IMAGE_HEADER_LEN + h * w * 3
    if len(payload) != expect:
        raise DimensionMismatch(f"image payload length {len(payload)} != {expect}")
    img = np.frombuffer(payload, dtype=np.uint8, offset=IMAGE_HEADER_LEN)
    return sensor, ts, img.reshape(h, w, 3).copy()


def pack_frame(frame: TactileFrame) -> bytes:
    return pack_image(frame.sensor, frame.timestamp_ns, frame.image)


def unpack_frame(payload: bytes) -> TactileFrame:
    sensor, ts, img = unpack_image(payload)
    return TactileFrame(sensor=sensor, timestamp_ns=ts, image=img)
