import math

import numpy as np
import pytest

from periop.errors import CountOutOfRange
from periop.wire import (
    COUNTS,
    FRAME_LEN,
    LSB_RAD,
    SYNC,
    EncoderFrame,
    EncoderSpec,
    count_to_radians,
    crc8,
    encode_frame,
    parse_encoder_frames,
    radians_to_count,
    wrap_pi,
)


def reference_scan(data: bytes):
    """Byte-by-byte oracle parser, written independently of the library scan."""
    frames = []
    i = 0
    n = len(data)
    while i < n:
        if data[i] != SYNC or i + FRAME_LEN > n:
            i += 1
            continue
        window = data[i:i + FRAME_LEN]
        crc = 0
        for byte in window[:5]:
            crc ^= byte
            for _ in range(8):
                crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        if crc == window[5] and (window[3] & 0xF0) == 0:
            frames.append((window[1], window[2] | ((window[3] & 0x0F) << 8), window[4]))
            i += FRAME_LEN
        else:
            i += 1
    return frames


def make_buffer(frames):
    return b"".join(encode_frame(f) for f in frames)


THREE = [EncoderFrame(1, 100, 0), EncoderFrame(2, 2048, 1), EncoderFrame(3, 4095, 2)]


# ------------------------------------------------------------------ parser ----

def test_crc8_known_vector():
    # CRC-8/SMBUS check value: crc8(b"123456789") == 0xF4
    assert crc8(b"123456789") == 0xF4


def test_wellformed_buffer_parses_clean():
    frames, diag = parse_encoder_frames(make_buffer(THREE))
    assert [(f.joint_id, f.count, f.sequence) for f in frames] == \
        [(1, 100, 0), (2, 2048, 1), (3, 4095, 2)]
    assert diag.resyncs == 0
    assert diag.crc_failures == 0
    assert diag.bytes_consumed == 18


def test_single_flipped_payload_bit_drops_one_frame():
    buf = bytearray(make_buffer(THREE))
    buf[8] ^= 0x04  # inside frame 2's count byte
    frames, diag = parse_encoder_frames(bytes(buf))
    assert len(frames) == 2
    assert diag.crc_failures == 1


def test_every_single_bit_corruption_rejected():
    frame = EncoderFrame(5, 1234, 7)
    buf = encode_frame(frame)
    for bit in range(len(buf) * 8):
        corrupted = bytearray(buf)
        corrupted[bit // 8] ^= 1 << (bit % 8)
        frames, _ = parse_encoder_frames(bytes(corrupted))
        assert frames == [], f"bit {bit} corruption was accepted"


def test_fuzz_matches_reference_scanner():
    rng = np.random.default_rng(101)
    noise = rng.integers(0, 256, 10_000, dtype=np.uint8).tobytes()
    frames, _ = parse_encoder_frames(noise)
    assert [(f.joint_id, f.count, f.sequence) for f in frames] == reference_scan(noise)


def test_fuzz_mixed_frames_and_garbage():
    rng = np.random.default_rng(103)
    parts = []
    for k in range(200):
        parts.append(encode_frame(EncoderFrame(int(rng.integers(0, 22)),
                                               int(rng.integers(0, COUNTS)),
                                               k % 256)))
        if rng.random() < 0.4:
            parts.append(rng.integers(0, 256, rng.integers(1, 9),
                                      dtype=np.uint8).tobytes())
    buf = b"".join(parts)
    frames, diag = parse_encoder_frames(buf)
    assert [(f.joint_id, f.count, f.sequence) for f in frames] == reference_scan(buf)
    assert len(frames) >= 200  # every written frame must survive; garbage may add


def test_prefix_safety():
    rng = np.random.default_rng(107)
    buf = make_buffer(THREE) + rng.integers(0, 256, 40, dtype=np.uint8).tobytes() \
        + make_buffer([EncoderFrame(9, 9, 9)])
    whole, _ = parse_encoder_frames(buf)
    for cut in range(len(buf) + 1):
        part, diag = parse_encoder_frames(buf[:cut])
        assert part == whole[:len(part)]
        assert diag.bytes_consumed <= cut
        # re-feeding the unconsumed tail plus the rest completes the parse
        rest, _ = parse_encoder_frames(buf[diag.bytes_consumed:])
        assert part + rest == whole


def test_incomplete_tail_left_unconsumed():
    buf = make_buffer(THREE)[:-2]  # last frame truncated
    frames, diag = parse_encoder_frames(buf)
    assert len(frames) == 2
    assert diag.bytes_consumed == 12


# --------------------------------------------------------------- counts ----

def test_count_zero_is_zero_angle():
    assert count_to_radians(0) == 0.0


def test_quarter_revolution():
    assert count_to_radians(1024) == pytest.approx(math.pi / 2, abs=1e-15)


def test_lsb_matches_stated_resolution():
    assert LSB_RAD == 2 * math.pi / 4096
    # two significant figures: 1.5e-3 rad
    assert float(f"{LSB_RAD:.1e}") == 1.5e-3


def test_roundtrip_exhaustive_all_counts():
    for spec in (EncoderSpec(), EncoderSpec(zero_offset=100),
                 EncoderSpec(sign=-1), EncoderSpec(zero_offset=3000, sign=-1)):
        for count in range(COUNTS):
            assert radians_to_count(count_to_radians(count, spec), spec) == count


def test_quantization_bound_random_angles():
    rng = np.random.default_rng(109)
    spec = EncoderSpec(zero_offset=37, sign=-1)
    for theta in rng.uniform(-4 * math.pi, 4 * math.pi, 2000):
        decoded = count_to_radians(radians_to_count(theta, spec), spec)
        err = abs(math.remainder(decoded - wrap_pi(theta), 2 * math.pi))
        assert err <= math.pi / COUNTS + 1e-15


def test_count_out_of_range():
    with pytest.raises(CountOutOfRange):
        count_to_radians(4096)
    with pytest.raises(CountOutOfRange):
        count_to_radians(-1)
    with pytest.raises(CountOutOfRange):
        EncoderFrame(1, 4096, 0)


def test_wrap_pi_boundaries():
    assert wrap_pi(math.pi) == math.pi
    assert wrap_pi(-math.pi) == math.pi
    assert wrap_pi(3 * math.pi) == math.pi
    assert wrap_pi(0.0) == 0.0
