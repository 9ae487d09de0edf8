"""Encoder bus wire protocol: framing, CRC-8, and count <-> angle conversion.

Frame layout (6 bytes, little-endian fields; bit-exact spec in docs/FORMAT.md):

    [0] sync 0xAA
    [1] joint id (u8)
    [2] count bits 0-7
    [3] bits 0-3: count bits 8-11; bits 4-7: reserved, must be 0
    [4] sequence (u8 rolling counter)
    [5] CRC-8 over bytes 0-4 (poly 0x07, init 0x00, MSB first, no reflection)

The parser scans for the sync byte and accepts a candidate only if the CRC
matches and the reserved nibble is zero; anything else is skipped with a
resync. A candidate with fewer than 6 bytes remaining is left unconsumed so a
later call with more data can finish it (prefix safety).

The 12-bit encoders quantize a revolution into 4096 counts; one LSB is
2*pi/4096 ~= 1.534e-3 rad.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CountOutOfRange

SYNC = 0xAA
FRAME_LEN = 6
COUNTS = 4096
LSB_RAD = 2.0 * math.pi / COUNTS
TWO_PI = 2.0 * math.pi

_CRC8_POLY = 0x07


def _make_crc8_table(poly: int) -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return table


_CRC8_TABLE = _make_crc8_table(_CRC8_POLY)


def crc8(data: bytes, init: int = 0x00) -> int:
    crc = init
    for b in data:
        crc = _CRC8_TABLE[crc ^ b]
    return crc


@dataclass(frozen=True)
class EncoderFrame:
    joint_id: int
    count: int
    sequence: int

    def __post_init__(self):
        if not 0 <= self.count < COUNTS:
            raise CountOutOfRange(f"count {self.count} outside [0, {COUNTS})")
        if not 0 <= self.joint_id <= 0xFF or not 0 <= self.sequence <= 0xFF:
            raise CountOutOfRange("joint id and sequence must fit in a byte")


@dataclass
class ParserDiagnostics:
    resyncs: int = 0
    crc_failures: int = 0
    bytes_consumed: int = 0


def encode_frame(frame: EncoderFrame) -> bytes:
    body = bytes([
        SYNC,
        frame.joint_id,
        frame.count & 0xFF,
        (frame.count >> 8) & 0x0F,
        frame.sequence,
    ])
    return body + bytes([crc8(body)])


def _try_frame(data: bytes, i: int) -> EncoderFrame | None:
    """Validate the 6-byte candidate at offset i (sync already matched)."""
    if data[i + 3] & 0xF0:
        return None
    if crc8(data[i:i + 5]) != data[i + 5]:
        return None
    return EncoderFrame(joint_id=data[i + 1],
                        count=data[i + 2] | ((data[i + 3] & 0x0F) << 8),
                        sequence=data[i + 4])


def parse_encoder_frames(data: bytes) -> tuple[list[EncoderFrame], ParserDiagnostics]:
    """One-pass scan: extract valid frames, report resyncs and CRC failures.

    Corruption is never fatal. ``bytes_consumed`` stops before an incomplete
    trailing candidate so streamed input can be re-fed with its continuation.
    """
    frames: list[EncoderFrame] = []
    diag = ParserDiagnostics()
    n = len(data)
    i = 0
    skipping = False
    while i < n:
        if data[i] != SYNC:
            j = data.find(SYNC, i + 1)
            if not skipping:
                diag.resyncs += 1
                skipping = True
            i = j if j >= 0 else n
            continue
        if i + FRAME_LEN > n:
            break  # incomplete candidate: leave for the next feed
        frame = _try_frame(data, i)
        if frame is None:
            diag.crc_failures += 1
            if not skipping:
                diag.resyncs += 1
                skipping = True
            i += 1
            continue
        frames.append(frame)
        skipping = False
        i += FRAME_LEN
    diag.bytes_consumed = i
    return frames, diag


# -----------------------------------------------------------------------------
# count <-> angle
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class EncoderSpec:
    zero_offset: int = 0   # count reading at the zero angle
    sign: int = 1          # +1 or -1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise CountOutOfRange("sign must be +1 or -1")
        if not 0 <= self.zero_offset < COUNTS:
            raise CountOutOfRange(f"zero offset {self.zero_offset} outside [0, {COUNTS})")


def wrap_pi(x: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(x, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


def count_to_radians(count: int, spec: EncoderSpec = EncoderSpec()) -> float:
    """angle = sign * ((count - offset) mod 4096) * LSB, wrapped to (-pi, pi]."""
    if not 0 <= count < COUNTS:
        raise CountOutOfRange(f"count {count} outside [0, {COUNTS})")
    ticks = (count - spec.zero_offset) % COUNTS
    return wrap_pi(spec.sign * ticks * LSB_RAD)


def radians_to_count(theta: float, spec: EncoderSpec = EncoderSpec()) -> int:
    """Nearest encoder count for an angle; exact inverse of count_to_radians."""
    return (spec.sign * round(theta / LSB_RAD) + spec.zero_offset) % COUNTS
