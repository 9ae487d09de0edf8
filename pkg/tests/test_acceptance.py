"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s or look at captured output on failure).

Tolerances are pinned here and nowhere else; property checks use independent
oracles (circle-geometry bisection, finite differences, reference byte
scanner, brute-force matchers) rather than the implementation under test.
"""

import json
import math
import time

import numpy as np

from periop import cli, linkage, wire
from periop.contact_torque import ContactWrench, joint_torques
from periop.container import ContainerReader
from periop.errors import BadMagic, CorruptChunk, CorruptIndex
from periop.export import AugmentConfig, augment, export_episode
from periop.hand_model import (
    JointState,
    contact_jacobian,
    contact_point_world,
    load_model,
    random_state,
)
from periop.hand_model import Contact
from periop.metrics import Trial, format_rate, mix_manifest, normalized_success, throughput
from periop.session import AlignedStep, align, record
from periop.sources import make_synthetic_sources

DEG = math.pi / 180.0


def report(name: str, ok: bool, detail: str = ""):
    print(f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


# -------------------------------------------------------------------------
# A1: parallelogram identity sweep, 0.01 rad steps, < 1e-9, < 1 s
# -------------------------------------------------------------------------

def test_a01_parallelogram_identity():
    geom = linkage.parallelogram(crank=0.045, ground=0.060)
    rng_info = linkage.grashof_check(geom)
    assert rng_info.assemblable.full
    start = time.perf_counter()
    thetas = np.arange(-math.pi + 0.005, math.pi, 0.01)
    rows = linkage.sweep(geom, thetas, initial_hint=thetas[0])
    worst = max(abs(phi - theta) for theta, phi, _ in rows)
    elapsed = time.perf_counter() - start
    report("parallelogram-identity", worst < 1e-9 and elapsed < 1.0,
           f"max|phi-theta|={worst:.3g}, {elapsed:.3f}s, {len(rows)} angles")


# -------------------------------------------------------------------------
# A2: four-bar vs bisection oracle, 500 geometries x 50 angles, < 30 s
# -------------------------------------------------------------------------

def _oracle_roots(g, a, b, c, psi):
    """Two closure roots from circle geometry + bisection (independent path).

    |A - B(phi)|^2 = d^2 + c^2 - 2 d c cos(phi - alpha) is monotone in
    phi - alpha on [0, pi], so each half-arc brackets exactly one root.
    """
    ax, ay = a * math.cos(psi), a * math.sin(psi)
    dx, dy = ax - g, ay
    d = math.hypot(dx, dy)
    alpha = math.atan2(dy, dx)

    def f(phi):
        return math.hypot(g + c * math.cos(phi) - ax, c * math.sin(phi) - ay) - b

    roots = []
    for lo, hi in ((alpha, alpha + math.pi), (alpha - math.pi, alpha)):
        flo, fhi = f(lo), f(hi)
        if flo == 0.0:
            roots.append(lo)
            continue
        if fhi == 0.0:
            roots.append(hi)
            continue
        if flo * fhi > 0:
            continue
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            if flo * fm <= 0:
                hi = mid
            else:
                lo, flo = mid, fm
        roots.append(0.5 * (lo + hi))
    return roots


def test_a02_fourbar_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    n_geoms = 0
    worst_err = 0.0
    worst_res = 0.0
    while n_geoms < 500:
        g, a, b, c = rng.uniform(0.02, 0.25, 4)
        # independent assemblability window from the triangle inequalities
        cos_hi = (a * a + g * g - (b - c) ** 2) / (2 * a * g)
        cos_lo = (a * a + g * g - (b + c) ** 2) / (2 * a * g)
        cos_lo, cos_hi = max(cos_lo, -1.0), min(cos_hi, 1.0)
        if cos_lo >= cos_hi - 1e-3:
            continue
        n_geoms += 1
        span = cos_hi - cos_lo
        cos_vals = rng.uniform(cos_lo + 0.02 * span, cos_hi - 0.02 * span, 50)
        geom = linkage.FourBarGeometry(ground=g, input_link=a, coupler=b,
                                       output_link=c)
        for cv in cos_vals:
            psi = math.acos(cv) * (1 if rng.random() < 0.5 else -1)
            phi = linkage.solve_fourbar(geom, psi)
            res = linkage.closure_residual(geom, psi, phi)
            roots = _oracle_roots(g, a, b, c, psi)
            err = min(abs(math.remainder(phi - r, 2 * math.pi)) for r in roots)
            worst_err = max(worst_err, err)
            worst_res = max(worst_res, res)
    elapsed = time.perf_counter() - start
    report("fourbar-oracle-equivalence",
           worst_err < 1e-8 and worst_res < 1e-10 and elapsed < 30.0,
           f"err={worst_err:.3g}, residual={worst_res:.3g}, {elapsed:.1f}s")


# -------------------------------------------------------------------------
# A3: Jacobian vs central differences over 1000 random states
# -------------------------------------------------------------------------

def test_a03_jacobian_correctness():
    rng = np.random.default_rng(77)
    worst = 0.0
    structure_ok = True
    per_variant = (334, 333, 333)
    h = 1e-6
    for variant, n in zip(("DEXOP-7", "DEXOP-9", "DEXOP-12"), per_variant):
        model = load_model(variant)
        fingers = [f.name for f in model.fingers]
        for _ in range(n):
            state = random_state(model, rng, margin=0.02)
            finger = fingers[rng.integers(len(fingers))]
            phalanx = ("proximal", "distal")[rng.integers(2)]
            contact = Contact(finger=finger, phalanx=phalanx,
                              point=rng.uniform(-0.02, 0.04, 3))
            jac = contact_jacobian(model, state, contact)
            q = state.angles
            for k in range(model.dof):
                qp, qm = q.copy(), q.copy()
                qp[k] += h
                qm[k] -= h
                col = (contact_point_world(model, JointState(angles=qp), contact)
                       - contact_point_world(model, JointState(angles=qm), contact)) / (2 * h)
                rel = np.abs(jac[:, k] - col) / np.maximum(np.abs(col), 1e-3)
                worst = max(worst, float(rel.max()))
            # distal-column-zero structure, exact
            idx = model.finger_joint_indices(finger)
            inactive = [i for i in range(model.dof) if i not in idx]
            if phalanx == "proximal" and len(idx) > 1:
                inactive.append(idx[-1])
            if np.any(jac[:, inactive] != 0.0):
                structure_ok = False
    report("jacobian-correctness", worst < 1e-6 and structure_ok,
           f"max rel err={worst:.3g}, zero-structure={'exact' if structure_ok else 'BROKEN'}")


# -------------------------------------------------------------------------
# A4: virtual-work consistency over 1000 random (state, contacts, dq)
# -------------------------------------------------------------------------

def test_a04_virtual_work():
    rng = np.random.default_rng(88)
    model = load_model("DEXOP-12")
    fingers = [f.name for f in model.fingers]
    worst = 0.0
    for _ in range(1000):
        state = random_state(model, rng)
        contacts = []
        for _ in range(int(rng.integers(1, 4))):
            contacts.append(ContactWrench(
                finger=fingers[rng.integers(len(fingers))],
                phalanx=("proximal", "distal")[rng.integers(2)],
                point=rng.uniform(-0.02, 0.04, 3),
                force=rng.uniform(-10, 10, 3)))
        tau = joint_torques(model, state, contacts).torques
        dq = rng.normal(size=model.dof)
        dq *= 1e-6 / np.linalg.norm(dq)
        lhs = sum(float(c.force @ (contact_jacobian(model, state, c.contact) @ dq))
                  for c in contacts)
        worst = max(worst, abs(lhs - float(tau @ dq)))
    report("virtual-work", worst < 1e-9, f"max |F.Jdq - tau.dq|={worst:.3g}")


# -------------------------------------------------------------------------
# A5: observability decomposition, exact to 1e-12
# -------------------------------------------------------------------------

def test_a05_observability_decomposition():
    rng = np.random.default_rng(99)
    model = load_model("DEXOP-9")
    fingers = [f.name for f in model.fingers]
    worst = 0.0
    for _ in range(200):
        state = random_state(model, rng)
        contacts = [ContactWrench(
            finger=fingers[rng.integers(len(fingers))],
            phalanx=("proximal", "distal")[rng.integers(2)],
            point=rng.uniform(-0.02, 0.04, 3),
            force=rng.uniform(-10, 10, 3)) for _ in range(4)]
        observed, hidden = contacts[:2], contacts[2:]
        tau_true = joint_torques(model, state, contacts).torques
        tau_est = joint_torques(model, state, observed).torques
        hidden_sum = sum(
            contact_jacobian(model, state, c.contact).T @ (model.palm.rotation @ c.force)
            for c in hidden)
        worst = max(worst, float(np.max(np.abs((tau_est - tau_true) + hidden_sum))))
    report("observability-decomposition", worst < 1e-12, f"max err={worst:.3g}")


# -------------------------------------------------------------------------
# A6: encoder quantization
# -------------------------------------------------------------------------

def test_a06_encoder_quantization():
    spec = wire.EncoderSpec(zero_offset=123, sign=-1)
    roundtrip_ok = all(
        wire.radians_to_count(wire.count_to_radians(c, s), s) == c
        for s in (wire.EncoderSpec(), spec) for c in range(wire.COUNTS))
    rng = np.random.default_rng(4096)
    worst = 0.0
    for theta in rng.uniform(-4 * math.pi, 4 * math.pi, 100_000):
        decoded = wire.count_to_radians(wire.radians_to_count(theta, spec), spec)
        err = abs(math.remainder(decoded - wire.wrap_pi(theta), 2 * math.pi))
        worst = max(worst, err)
    lsb_ok = (wire.LSB_RAD == 2 * math.pi / 4096
              and float(f"{wire.LSB_RAD:.1e}") == 1.5e-3)
    report("encoder-quantization",
           roundtrip_ok and worst <= math.pi / 4096 + 1e-15 and lsb_ok,
           f"roundtrip={'exact' if roundtrip_ok else 'BROKEN'}, "
           f"max err={worst:.6g} <= {math.pi/4096:.6g}, LSB={wire.LSB_RAD:.4e}")


# -------------------------------------------------------------------------
# A7: wire parser robustness (1 MB fuzz + exhaustive single-bit corruption)
# -------------------------------------------------------------------------

def _reference_scan(data: bytes):
    frames = []
    i, n = 0, len(data)
    while i < n:
        if data[i] != wire.SYNC or i + 6 > n:
            i += 1
            continue
        w = data[i:i + 6]
        crc = 0
        for byte in w[:5]:
            crc ^= byte
            for _ in range(8):
                crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        if crc == w[5] and (w[3] & 0xF0) == 0:
            frames.append((w[1], w[2] | ((w[3] & 0x0F) << 8), w[4]))
            i += 6
        else:
            i += 1
    return frames


def test_a07_wire_parser_robustness():
    rng = np.random.default_rng(7007)
    parts = []
    size = 0
    k = 0
    while size < 1_000_000:
        if rng.random() < 0.5:
            chunk = wire.encode_frame(wire.EncoderFrame(
                int(rng.integers(0, 22)), int(rng.integers(0, 4096)), k % 256))
            k += 1
        else:
            chunk = rng.integers(0, 256, int(rng.integers(1, 40)),
                                 dtype=np.uint8).tobytes()
        parts.append(chunk)
        size += len(chunk)
    buf = b"".join(parts)
    frames, _ = wire.parse_encoder_frames(buf)
    got = [(f.joint_id, f.count, f.sequence) for f in frames]
    fuzz_ok = got == _reference_scan(buf)

    frame = wire.encode_frame(wire.EncoderFrame(7, 3001, 42))
    corrupt_ok = True
    for bit in range(48):
        mutated = bytearray(frame)
        mutated[bit // 8] ^= 1 << (bit % 8)
        accepted, _ = wire.parse_encoder_frames(bytes(mutated))
        if accepted:
            corrupt_ok = False
    report("wire-parser-robustness", fuzz_ok and corrupt_ok,
           f"fuzz({len(buf)} B)={'match' if fuzz_ok else 'MISMATCH'}, "
           f"single-bit={'all rejected' if corrupt_ok else 'ACCEPTED SOME'}")


# -------------------------------------------------------------------------
# A8: session round-trip, alignment window, truncation detection
# -------------------------------------------------------------------------

def test_a08_session_roundtrip(tmp_path):
    path = tmp_path / "ten.prxs"
    record(make_synthetic_sources(seed=808, duration_s=10.0, jitter_ms=10.0,
                                  height=24, width=32),
           10.0, path)
    reader = ContainerReader(path)
    byte_ok = True
    for src in make_synthetic_sources(seed=808, duration_s=10.0, jitter_ms=10.0,
                                      height=24, width=32):
        expect = list(src.samples())
        got = [(r.timestamp_ns, r.payload) for r in reader.stream_records(src.stream_id)]
        byte_ok = byte_ok and got == expect

    result = align(path, rate_hz=20.0)
    skew_ok = all(s.max_skew_ns <= 25_000_000 for s in result.steps)
    count_ok = len(result.steps) >= 195  # ~200 ticks minus edge effects

    data = path.read_bytes()
    rng = np.random.default_rng(88)
    header_end = 14 + int.from_bytes(data[10:14], "little") + 4
    detected = 0
    cuts = 20
    for cut in rng.integers(header_end, len(data) - 1, cuts):
        bad = tmp_path / "cut.prxs"
        bad.write_bytes(data[:int(cut)])
        try:
            checks = ContainerReader(bad).validate()
            if not all(c.ok for c in checks):
                detected += 1
        except (BadMagic, CorruptIndex, CorruptChunk):
            detected += 1
    report("session-roundtrip",
           byte_ok and skew_ok and count_ok and detected == cuts,
           f"bytes={'identical' if byte_ok else 'DIFFER'}, "
           f"steps={len(result.steps)}, skews<=25ms={skew_ok}, "
           f"truncation {detected}/{cuts} detected")


# -------------------------------------------------------------------------
# A9: workspace fixture through the CLI
# -------------------------------------------------------------------------

def test_a09_workspace_fixture(capsys):
    code = cli.main(["model", "workspace", "--model", "DEXOP-7",
                     "--format", "jsonl"])
    out = capsys.readouterr().out
    rows = {r["kind"]: r for r in map(json.loads, out.strip().splitlines())}
    ranges = (rows["MCP-flexion"]["range_deg"], rows["PIP"]["range_deg"],
              rows["TM-flexion"]["range_deg"], rows["TM-abduction"]["range_deg"],
              rows["IP"]["range_deg"])
    speeds = (rows["MCP-flexion"]["max_speed_rad_s"], rows["PIP"]["max_speed_rad_s"],
              rows["TM-flexion"]["max_speed_rad_s"],
              rows["TM-abduction"]["max_speed_rad_s"], rows["IP"]["max_speed_rad_s"])
    ok = (code == 0 and ranges == (110, 105, 75, 90, 65)
          and speeds == (35, 15, 17, 12, 9))
    report("workspace-fixture", ok, f"ranges={ranges}, speeds={speeds}")


# -------------------------------------------------------------------------
# A10: metrics fixtures
# -------------------------------------------------------------------------

def test_a10_metrics_fixtures():
    perfect = normalized_success((1, 1, 1, 1, 1, 1)) == 1.0
    formatted = format_rate(0.513, 0.032) == "0.513±0.032"
    over_cap = throughput([Trial(True, 190.0), Trial(True, 20.0)])
    cap_ok = over_cap.reclassified == 1 and over_cap.successes == 1
    m200 = mix_manifest((0, 0.0), (200, 85.0))
    m_mix = mix_manifest((160, 31.0), (40, 85.0))
    t200_ok = abs(m200.total_minutes - 283.3) <= 0.05
    mix_ok = abs(m_mix.total_minutes - 139.3) <= 0.5
    report("metrics-fixtures", perfect and formatted and cap_ok and t200_ok and mix_ok,
           f"norm={perfect}, fmt={formatted}, cap={cap_ok}, "
           f"200teleop={m200.total_minutes:.2f}min, mix={m_mix.total_minutes:.2f}min")


# -------------------------------------------------------------------------
# A11: augmentation statistics over 1e5 steps, bitwise determinism
# -------------------------------------------------------------------------

def test_a11_augmentation_statistics():
    n = 100_000
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (2, 2, 3), dtype=np.uint8)
    timg = rng.integers(0, 256, (2, 6, 3), dtype=np.uint8)
    src_ts = {k: 0 for k in ("joint-bus", "wrist-cam-left", "wrist-cam-right",
                             "tactile-left", "tactile-right")}
    steps = [AlignedStep(timestamp_ns=k * 50_000_000, joints=np.zeros(22),
                         wrist=(img, img), tactile=(timg, timg),
                         source_ts=src_ts) for k in range(n)]
    episode = export_episode(steps)
    cfg = AugmentConfig(seed=20240)
    out1 = augment(episode, cfg)
    out2 = augment(episode, cfg)

    noise_rate = sum(1 for s in out1.steps if np.any(s.joints[:8] != 0)) / n
    max_pert = max(np.abs(s.joints[:8]).max() for s in out1.steps)
    drop_rate = sum(int(np.all(s.wrist[i] == 0)) for s in out1.steps
                    for i in (0, 1)) / (2 * n)
    identical = all(
        np.array_equal(a.joints, b.joints)
        and np.array_equal(a.wrist[0], b.wrist[0])
        and np.array_equal(a.wrist[1], b.wrist[1])
        for a, b in zip(out1.steps, out2.steps))
    ok = (0.098 <= noise_rate <= 0.102 and max_pert <= 10 * DEG + 1e-12
          and 0.294 <= drop_rate <= 0.306 and identical)
    report("augmentation-statistics", ok,
           f"noise rate={noise_rate:.4f}, max={max_pert/DEG:.3f} deg, "
           f"dropout={drop_rate:.4f}, deterministic={identical}")


# -------------------------------------------------------------------------
# A12: export inverse and chunked-delta oracle
# -------------------------------------------------------------------------

def test_a12_export_inverse():
    rng = np.random.default_rng(1212)
    n = 200
    q = rng.normal(0, 0.5, (n, 22))
    src_ts = {k: 0 for k in ("joint-bus", "wrist-cam-left", "wrist-cam-right",
                             "tactile-left", "tactile-right")}
    img = rng.integers(0, 256, (2, 2, 3), dtype=np.uint8)
    timg = rng.integers(0, 256, (2, 6, 3), dtype=np.uint8)
    steps = [AlignedStep(timestamp_ns=k * 50_000_000, joints=q[k],
                         wrist=(img, img), tactile=(timg, timg),
                         source_ts=src_ts) for k in range(n)]
    ep1 = export_episode(steps, horizon=1)
    recon = q[0, :8] + np.vstack([np.zeros(8),
                                  np.cumsum(ep1.arm_deltas[:-1], axis=0)])
    inverse_err = float(np.max(np.abs(recon - q[:, :8])))

    k5 = 5
    ep5 = export_episode(steps, horizon=k5)
    oracle = np.stack([q[min(t + k5, n - 1), :8] - q[t, :8] for t in range(n)])
    chunk_exact = np.array_equal(ep5.arm_deltas, oracle)
    report("export-inverse", inverse_err < 1e-12 and chunk_exact,
           f"reconstruction err={inverse_err:.3g}, chunked={'exact' if chunk_exact else 'DIFFERS'}")
