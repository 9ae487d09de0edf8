import numpy as np
import pytest

from periop.errors import DimensionMismatch, OutOfBounds, SensorMismatch, WrongSensorSet
from periop.tactile import (
    DISTAL_SENSORS,
    DeltaImage,
    TactileFrame,
    contact_summary,
    delta,
    pack_frame,
    pack_image,
    split_super_image,
    super_image,
    synth_press,
    unpack_frame,
    unpack_image,
)


def frame(sensor="index-distal", value=30, h=24, w=32, ts=0):
    return TactileFrame(sensor=sensor, timestamp_ns=ts,
                        image=np.full((h, w, 3), value, dtype=np.uint8))


def random_frame(rng, sensor="index-distal", h=24, w=32, ts=0):
    return TactileFrame(sensor=sensor, timestamp_ns=ts,
                        image=rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


# ------------------------------------------------------------------- delta ----

def test_delta_identical_frames_uniform_128():
    d = delta(frame(value=77), frame(value=77))
    assert np.all(d.image == 128)


def test_delta_uniform_offset():
    d = delta(frame(value=60), frame(value=50))
    assert np.all(d.image == 138)


def test_delta_matches_scalar_saturating_oracle():
    rng = np.random.default_rng(3)
    cur, ini = random_frame(rng), random_frame(rng)
    d = delta(cur, ini)
    for _ in range(200):  # spot-check pixels against a scalar loop
        r = rng.integers(cur.image.shape[0])
        c = rng.integers(cur.image.shape[1])
        ch = rng.integers(3)
        expect = int(cur.image[r, c, ch]) - int(ini.image[r, c, ch]) + 128
        expect = max(0, min(255, expect))
        assert d.image[r, c, ch] == expect
    # and fully, vectorized independently
    full = np.clip(cur.image.astype(int) - ini.image.astype(int) + 128, 0, 255)
    assert np.array_equal(d.image, full.astype(np.uint8))


def test_delta_antisymmetric_where_unsaturated():
    rng = np.random.default_rng(5)
    a, b = random_frame(rng), random_frame(rng)
    ab, ba = delta(a, b).image.astype(int), delta(b, a).image.astype(int)
    unsat = (ab > 0) & (ab < 255) & (ba > 0) & (ba < 255)
    assert np.all((ab + ba)[unsat] == 256)


def test_delta_sensor_and_dimension_checks():
    with pytest.raises(SensorMismatch):
        delta(frame(sensor="index-distal"), frame(sensor="thumb-distal"))
    with pytest.raises(DimensionMismatch):
        delta(frame(h=24), frame(h=22))


# ------------------------------------------------------------- super image ----

def test_super_image_dimensions_and_order():
    frames = [frame(sensor=s, value=10 * (i + 1), h=120, w=160, ts=i)
              for i, s in enumerate(DISTAL_SENSORS)]
    sup = super_image(frames, hand="left")
    assert sup.image.shape == (120, 480, 3)
    assert sup.timestamp_ns == max(f.timestamp_ns for f in frames)
    assert np.all(sup.image[:, :160] == 10)     # thumb block first
    assert np.all(sup.image[:, 160:320] == 20)  # index
    assert np.all(sup.image[:, 320:] == 30)     # middle


def test_super_image_accepts_any_input_order():
    rng = np.random.default_rng(7)
    frames = {s: random_frame(rng, sensor=s) for s in DISTAL_SENSORS}
    sup = super_image([frames["middle-distal"], frames["thumb-distal"],
                       frames["index-distal"]], hand="right")
    w = frames["thumb-distal"].image.shape[1]
    assert np.array_equal(sup.image[:, :w], frames["thumb-distal"].image)


def test_super_image_slices_recover_originals():
    rng = np.random.default_rng(11)
    frames = [random_frame(rng, sensor=s) for s in DISTAL_SENSORS]
    sup = super_image(frames, hand="left")
    for original, piece in zip(frames, split_super_image(sup)):
        assert np.array_equal(original.image, piece.image)
        assert original.sensor == piece.sensor


def test_super_image_wrong_set_and_shape():
    with pytest.raises(WrongSensorSet):
        super_image([frame(), frame(sensor="thumb-distal"), frame(sensor="palm")],
                    hand="left")
    with pytest.raises(DimensionMismatch):
        super_image([frame(sensor="thumb-distal", h=22),
                     frame(sensor="index-distal"),
                     frame(sensor="middle-distal")], hand="left")


# --------------------------------------------------------- contact summary ----

def delta_of(img):
    return DeltaImage(sensor="index-distal", reference_ns=0, current_ns=1, image=img)


def test_summary_uniform_128_no_contact():
    s = contact_summary(delta_of(np.full((24, 32, 3), 128, dtype=np.uint8)))
    assert s.count == 0 and s.centroid is None and not s.in_contact
    assert s.activation == 0.0


def test_summary_threshold_255_never_contacts():
    rng = np.random.default_rng(13)
    img = rng.integers(0, 256, (24, 32, 3), dtype=np.uint8)
    s = contact_summary(delta_of(img), threshold=255)
    assert s.count == 0


def test_summary_centroid_matches_weighted_mean_oracle():
    h, w = 120, 160
    rr, cc = np.mgrid[0:h, 0:w].astype(float)
    blob = 90.0 * np.exp(-((rr - 60) ** 2 + (cc - 80) ** 2) / (2 * 6.0 ** 2))
    img = np.clip(128 + blob, 0, 255).astype(np.uint8)[:, :, None].repeat(3, axis=2)
    s = contact_summary(delta_of(img), threshold=12)
    assert s.count > 0
    assert abs(s.centroid[0] - 60) < 1.0
    assert abs(s.centroid[1] - 80) < 1.0
    # independent weighted-mean oracle over the same mask definition
    mag = np.abs(img.astype(int) - 128).mean(axis=2)
    mask = np.any(np.abs(img.astype(int) - 128) > 12, axis=2)
    exp_r = (rr[mask] * mag[mask]).sum() / mag[mask].sum()
    exp_c = (cc[mask] * mag[mask]).sum() / mag[mask].sum()
    assert s.centroid[0] == pytest.approx(exp_r, abs=1e-9)
    assert s.centroid[1] == pytest.approx(exp_c, abs=1e-9)


def test_summary_translation_equivariance():
    h, w = 120, 160
    rr, cc = np.mgrid[0:h, 0:w].astype(float)

    def blob_at(r0, c0):
        blob = 90.0 * np.exp(-((rr - r0) ** 2 + (cc - c0) ** 2) / (2 * 5.0 ** 2))
        return np.clip(128 + blob, 0, 255).astype(np.uint8)[:, :, None].repeat(3, 2)

    a = contact_summary(delta_of(blob_at(40, 50)))
    b = contact_summary(delta_of(blob_at(52, 71)))
    assert abs((b.centroid[0] - a.centroid[0]) - 12) < 1.0
    assert abs((b.centroid[1] - a.centroid[1]) - 21) < 1.0


# ------------------------------------------------------------- synth press ----

def test_synth_force_zero_equals_baseline():
    a = synth_press("index-distal", (60, 80), 0.0, seed=9)
    b = synth_press("index-distal", (60, 80), 0.0, seed=9)
    assert np.array_equal(a.image, b.image)
    c = synth_press("index-distal", (20, 20), 0.0, seed=9)
    assert np.array_equal(a.image, c.image)  # no blob at zero force


def test_synth_deterministic_per_seed():
    a = synth_press("index-distal", (60, 80), 20.0, seed=4)
    b = synth_press("index-distal", (60, 80), 20.0, seed=4)
    assert np.array_equal(a.image, b.image)
    c = synth_press("index-distal", (60, 80), 20.0, seed=5)
    assert not np.array_equal(a.image, c.image)


def test_synth_out_of_bounds_and_negative_force():
    with pytest.raises(OutOfBounds):
        synth_press("index-distal", (130, 80), 5.0, seed=0)
    with pytest.raises(ValueError):
        synth_press("index-distal", (60, 80), -1.0, seed=0)


def test_synth_press_closed_loop_centroid_grid():
    """contact_summary(delta(press, baseline)) localizes within 2 px, F >= 5 N."""
    for force in (5.0, 12.0, 30.0):
        for r0 in (40, 60, 80):
            for c0 in (50, 80, 110):
                press = synth_press("index-distal", (r0, c0), force, seed=17)
                base = synth_press("index-distal", (r0, c0), 0.0, seed=23)
                s = contact_summary(delta(press, base))
                assert s.in_contact
                assert abs(s.centroid[0] - r0) <= 2.0
                assert abs(s.centroid[1] - c0) <= 2.0


# ----------------------------------------------------------- serialization ----

def test_image_pack_roundtrip():
    rng = np.random.default_rng(29)
    f = random_frame(rng, sensor="middle-distal", ts=123456789)
    payload = pack_frame(f)
    assert len(payload) == 16 + f.image.size
    g = unpack_frame(payload)
    assert g.sensor == f.sensor
    assert g.timestamp_ns == f.timestamp_ns
    assert np.array_equal(g.image, f.image)


def test_image_header_fields():
    img = np.zeros((2, 3, 3), dtype=np.uint8)
    payload = pack_image("palm", 7, img)
    assert payload[0] == 7          # palm sensor code
    assert payload[1:3] == (2).to_bytes(2, "little")
    assert payload[3:5] == (3).to_bytes(2, "little")
    assert payload[5:13] == (7).to_bytes(8, "little")
    sensor, ts, out = unpack_image(payload)
    assert sensor == "palm" and ts == 7 and out.shape == (2, 3, 3)


def test_unpack_rejects_bad_length():
    img = np.zeros((2, 3, 3), dtype=np.uint8)
    payload = pack_image("palm", 7, img)
    with pytest.raises(DimensionMismatch):
        unpack_image(payload[:-1])
