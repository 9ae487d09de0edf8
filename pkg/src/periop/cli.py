"""Command-line entry point.

All subcommands are non-interactive and emit machine-readable output (CSV by
default, ``--format jsonl`` for line-delimited JSON). Reporting commands
accept ``--figure <path.png>`` to render a matplotlib figure to a file
alongside the delimited output. Seeds are explicit wherever randomness
exists, so identical argv + inputs produce byte-identical stdout.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv as _csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import container, contact_torque, export, linkage, metrics, session, sources, tactile
from .config import linkage_from_config, load_config, model_from_config, resolve_model
from .errors import PeriopError
from .hand_model import JointState, workspace_report

DEG = math.pi / 180.0


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        s = f"{x:.6f}".rstrip("0").rstrip(".")
        return s if s not in ("", "-") else "0"
    return str(x)


def emit(rows: list[dict], fmt: str, out=None) -> None:
    out = out or sys.stdout
    if not rows:
        return
    if fmt == "jsonl":
        for row in rows:
            out.write(json.dumps(row) + "\n")
    else:
        fields = list(rows[0].keys())
        out.write(",".join(fields) + "\n")
        for row in rows:
            out.write(",".join(_fmt(row[f]) for f in fields) + "\n")


def _out_path(p: str) -> Path:
    """Relative output paths land under PRX_DATA_DIR when it is set."""
    path = Path(p)
    root = os.environ.get("PRX_DATA_DIR")
    if root and not path.is_absolute():
        path = Path(root) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _add_format(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")


def _geometry_from_args(args) -> linkage.FourBarGeometry:
    if getattr(args, "parallelogram", False):
        return linkage.parallelogram()
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        model = model_from_config(cfg)
        link = linkage_from_config(cfg, model)
        if not getattr(args, "stage", None):
            raise PeriopError("--config needs --stage <finger:index>")
        finger, _, idx = args.stage.partition(":")
        try:
            stage = link.stages[finger][int(idx or 0)]
        except (KeyError, IndexError, ValueError):
            raise PeriopError(f"no stage {args.stage!r} in {args.config}") from None
        if stage.geometry is None:
            raise PeriopError(f"stage {args.stage!r} is coaxial (no four-bar geometry)")
        return stage.geometry
    if not args.lengths_mm:
        raise PeriopError("provide --lengths-mm g,a,b,c, --parallelogram, or --config")
    vals = [float(v) for v in args.lengths_mm.split(",")]
    if len(vals) != 4:
        raise PeriopError("--lengths-mm expects 4 comma-separated values")
    off_in = off_out = 0.0
    if getattr(args, "offsets_deg", None):
        offs = [float(v) for v in args.offsets_deg.split(",")]
        if len(offs) != 2:
            raise PeriopError("--offsets-deg expects 2 comma-separated values")
        off_in, off_out = offs[0] * DEG, offs[1] * DEG
    return linkage.FourBarGeometry(
        ground=vals[0] / 1000.0, input_link=vals[1] / 1000.0,
        coupler=vals[2] / 1000.0, output_link=vals[3] / 1000.0,
        input_offset=off_in, output_offset=off_out,
        branch=getattr(args, "branch", "open"))


# -----------------------------------------------------------------------------
# model
# -----------------------------------------------------------------------------

def cmd_model_info(args) -> int:
    model = resolve_model(args.model)
    rows = []
    for f in model.fingers:
        for j in f.joints:
            rows.append({
                "variant": model.variant, "dof": model.dof, "finger": f.name,
                "joint": j.id, "kind": j.kind,
                "min_deg": round(math.degrees(j.limits[0]), 9),
                "max_deg": round(math.degrees(j.limits[1]), 9),
                "max_speed_rad_s": j.max_speed,
                "proximal_mm": f.proximal_len * 1000.0,
                "distal_mm": f.distal_len * 1000.0,
            })
    emit(rows, args.format)
    return 0


def cmd_model_workspace(args) -> int:
    model = resolve_model(args.model)
    rows = [{
        "joint": r.joint_id, "kind": r.kind, "min_deg": r.min_deg,
        "max_deg": r.max_deg, "range_deg": r.range_deg,
        "max_speed_rad_s": r.max_speed,
    } for r in workspace_report(model)]
    emit(rows, args.format)
    if args.figure:
        from .report import save_workspace_figure
        save_workspace_figure(workspace_report(model), _out_path(args.figure))
    return 0


# -----------------------------------------------------------------------------
# linkage
# -----------------------------------------------------------------------------

def cmd_linkage_sweep(args) -> int:
    geom = _geometry_from_args(args)
    start, stop, step = args.start_deg, args.stop_deg, args.step_deg
    if step <= 0 or stop < start:
        raise PeriopError("need step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    thetas = [(start + k * step) * DEG for k in range(n)]
    hint = args.initial_phi_deg * DEG if args.initial_phi_deg is not None else None
    rows_raw = linkage.sweep(geom, thetas, initial_hint=hint)
    rows = [{"theta_deg": t / DEG, "phi_deg": p / DEG, "ratio": r}
            for t, p, r in rows_raw]
    emit(rows, args.format)
    if args.figure:
        from .report import save_sweep_figure
        save_sweep_figure([(r["theta_deg"], r["phi_deg"], r["ratio"]) for r in rows],
                          _out_path(args.figure))
    return 0


def cmd_linkage_solve(args) -> int:
    geom = _geometry_from_args(args)
    theta = args.theta_deg * DEG
    phi = linkage.solve_fourbar(geom, theta)
    try:
        ratio = linkage.mechanical_advantage(geom, theta)
    except PeriopError:
        ratio = math.nan
    grashof = linkage.grashof_check(geom)
    emit([{
        "theta_deg": args.theta_deg, "phi_deg": phi / DEG, "ratio": ratio,
        "classification": grashof.classification,
        "residual_m": linkage.closure_residual(geom, theta, phi),
    }], args.format)
    return 0


# -----------------------------------------------------------------------------
# torque
# -----------------------------------------------------------------------------

def _read_contacts(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(_csv.DictReader(fh))


def _wrenches(rows: list[dict]) -> list[contact_torque.ContactWrench]:
    out = []
    for r in rows:
        out.append(contact_torque.ContactWrench(
            finger=r["finger"], phalanx=r["phalanx"],
            point=np.array([float(r["px"]), float(r["py"]), float(r["pz"])]),
            force=np.array([float(r["fx"]), float(r["fy"]), float(r["fz"])])))
    return out


def cmd_torque_estimate(args) -> int:
    model = resolve_model(args.model)
    wrenches = _wrenches(_read_contacts(args.contacts))
    result = session.align(args.session, rate_hz=args.rate)
    lo = session.ARM_JOINTS if args.hand == "left" else session.ARM_JOINTS + model.dof
    rows = []
    for step in result.steps:
        state = JointState(angles=step.joints[lo:lo + model.dof],
                           timestamp_ns=step.timestamp_ns)
        est = contact_torque.joint_torques(model, state, wrenches)
        row = {"t_s": step.timestamp_ns / 1e9}
        row.update({jid: est.torques[i] for i, jid in enumerate(model.joint_ids)})
        rows.append(row)
    emit(rows, args.format)
    return 0


def cmd_torque_observability(args) -> int:
    model = resolve_model(args.model)
    if args.state:
        q = np.array([float(v) for v in args.state.split(",")])
    else:
        q = np.zeros(model.dof)
    contacts = [contact_torque.ContactWrench(
        finger=r["finger"], phalanx=r["phalanx"],
        point=np.array([float(r["px"]), float(r["py"]), float(r["pz"])]),
        force=np.zeros(3)).contact for r in _read_contacts(args.contacts)]
    rep = contact_torque.observability(model, JointState(angles=q), contacts)
    if args.format == "jsonl":
        obj = {"rank": rep.rank, "nullspace_dim": rep.nullspace_dim,
               "dof": model.dof,
               "basis": [list(map(float, rep.basis[:, k]))
                         for k in range(rep.nullspace_dim)]}
        emit([obj], "jsonl")
    else:
        # one row per joint; basis_k columns span the unidentifiable subspace
        rows = []
        for i, jid in enumerate(model.joint_ids):
            row = {"rank": rep.rank, "nullspace_dim": rep.nullspace_dim,
                   "joint": jid}
            for k in range(rep.nullspace_dim):
                row[f"basis_{k}"] = float(rep.basis[i, k])
            rows.append(row)
        emit(rows, "csv")
    return 0


# -----------------------------------------------------------------------------
# tactile
# -----------------------------------------------------------------------------

def cmd_tactile_synth(args) -> int:
    row, col = (float(v) for v in args.point.split(","))
    frame = tactile.synth_press(args.sensor, (row, col), args.force,
                                seed=args.seed, height=args.height,
                                width=args.width)
    path = _out_path(args.out)
    path.write_bytes(tactile.pack_frame(frame))
    emit([{"out": str(path), "sensor": args.sensor, "height": args.height,
           "width": args.width, "force_n": args.force, "seed": args.seed}],
         args.format)
    return 0


def cmd_tactile_summarize(args) -> int:
    frame = tactile.unpack_frame(Path(args.frame).read_bytes())
    if args.reference:
        ref = tactile.unpack_frame(Path(args.reference).read_bytes())
        delta = tactile.delta(frame, ref)
    else:
        # no reference: the file is taken to already hold an offset-128 delta
        delta = tactile.DeltaImage(sensor=frame.sensor, reference_ns=0,
                                   current_ns=frame.timestamp_ns,
                                   image=frame.image)
    s = tactile.contact_summary(delta, threshold=args.threshold)
    emit([{
        "sensor": frame.sensor, "activated_px": s.count,
        "centroid_row": s.centroid[0] if s.centroid else math.nan,
        "centroid_col": s.centroid[1] if s.centroid else math.nan,
        "activation": s.activation, "in_contact": int(s.in_contact),
    }], args.format)
    return 0


# -----------------------------------------------------------------------------
# session
# -----------------------------------------------------------------------------

def cmd_record(args) -> int:
    srcs = sources.make_synthetic_sources(
        seed=args.seed, duration_s=args.duration, rate_hz=args.rate,
        jitter_ms=args.jitter_ms, height=args.height, width=args.width,
        variant=args.variant)
    path = _out_path(args.out)
    summary = session.record(srcs, args.duration, path, variant=args.variant,
                             rate_hz=args.rate, meta={"seed": args.seed})
    rows = [{"stream": sid, "samples": n}
            for sid, n in summary.sample_counts.items()]
    emit(rows, args.format)
    return 0


def cmd_replay(args) -> int:
    reader = container.ContainerReader(args.file)
    if reader.section == "SESS":
        rows = []
        for rec in reader.iter_records():
            info = next(s for s in reader.streams if s.index == rec.stream)
            if args.stream and info.id != args.stream:
                continue
            rows.append({"stream": info.id, "t_ns": rec.timestamp_ns,
                         "bytes": len(rec.payload),
                         "sha256": hashlib.sha256(rec.payload).hexdigest()})
        emit(rows, args.format)
        return 0
    # aligned / episode files replay as full steps
    if reader.section == "ALGN":
        result = session.read_aligned(args.file)
        steps, actions = result.steps, None
    else:
        ep = export.read_episode(args.file)
        steps, actions = list(ep.steps), ep.actions()
    rows = []
    for i, step in enumerate(steps):
        row = {
            "t_ns": step.timestamp_ns,
            "joints": [float(v) for v in step.joints],
            "wrist": [_image_digest(img) for img in step.wrist],
            "tactile": [_image_digest(img) for img in step.tactile],
            "source_ts": {k: int(v) for k, v in step.source_ts.items()},
        }
        if actions is not None:
            row["action"] = [float(v) for v in actions[i]]
        rows.append(row)
    if args.format == "csv":
        flat = [{"t_ns": r["t_ns"],
                 **{f"q{j}": r["joints"][j] for j in range(len(r["joints"]))}}
                for r in rows]
        emit(flat, "csv")
    else:
        emit(rows, "jsonl")
    return 0


def _image_digest(img: np.ndarray) -> dict:
    return {"h": int(img.shape[0]), "w": int(img.shape[1]),
            "sha256": hashlib.sha256(np.ascontiguousarray(img).tobytes()).hexdigest()}


def cmd_align(args) -> int:
    result = session.align(args.file, rate_hz=args.rate,
                           keep_payloads=bool(args.out))
    rows = []
    for step in result.steps:
        row = {"t_s": step.timestamp_ns / 1e9}
        for kind in session.STREAM_KINDS:
            row[f"skew_{kind}_ms"] = abs(step.source_ts[kind] - step.timestamp_ns) / 1e6
        rows.append(row)
    emit(rows, args.format)
    print(f"steps={len(result.steps)} dropped={result.dropped}", file=sys.stderr)
    if args.out:
        reader = container.ContainerReader(args.file)
        session.write_aligned(result, _out_path(args.out),
                              variant=str(reader.meta.get("variant", "DEXOP-7")))
    if args.figure and rows:
        from .report import save_align_figure
        save_align_figure(rows, session.STREAM_KINDS, _out_path(args.figure))
    return 0


def cmd_inspect(args) -> int:
    reader = container.ContainerReader(args.file)
    obj = {
        "magic": "PRXS",
        "version": reader.version,
        "section": reader.section,
        "variant": reader.meta.get("variant"),
        "rate_hz": reader.meta.get("rate_hz"),
        "streams": [{"index": s.index, "id": s.id, "kind": s.kind}
                    for s in reader.streams],
        "sample_counts": reader.sample_counts(),
        "drop_counts": reader.drop_counts(),
        "recovered": reader.recovered,
    }
    if args.format == "jsonl":
        emit([obj], "jsonl")
    else:
        rows = [{"stream": s.id, "kind": s.kind,
                 "samples": reader.sample_counts()[s.id],
                 "drops": reader.drop_counts()[s.id]} for s in reader.streams]
        emit(rows, "csv")
    return 0


def cmd_validate(args) -> int:
    try:
        reader = container.ContainerReader(args.file)
    except PeriopError as e:
        print(f"FAIL header: {e}", file=sys.stderr)
        return 1
    checks = reader.validate()
    ok = True
    for c in checks:
        status = "ok" if c.ok else "FAIL"
        print(f"{status} {c.name}" + (f": {c.detail}" if c.detail else ""))
        ok = ok and c.ok
    return 0 if ok else 1


# -----------------------------------------------------------------------------
# export / augment
# -----------------------------------------------------------------------------

def cmd_export(args) -> int:
    result = session.align(args.session, rate_hz=args.rate)
    episode = export.export_episode(result.steps, horizon=args.chunks,
                                    source_tag=args.source_tag,
                                    task_id=args.task_id)
    reader = container.ContainerReader(args.session)
    path = _out_path(args.out)
    export.write_episode(episode, path,
                         variant=str(reader.meta.get("variant", "DEXOP-7")),
                         rate_hz=args.rate)
    emit([{"out": str(path), "steps": len(episode.steps),
           "duration_s": episode.duration_s, "source": episode.source_tag,
           "horizon": episode.horizon, "dropped_ticks": result.dropped}],
         args.format)
    return 0


def cmd_augment(args) -> int:
    episode = export.read_episode(args.episode)
    cfg = export.AugmentConfig(color_jitter=args.color_jitter,
                               joint_noise_deg=args.joint_noise_deg,
                               joint_noise_prob=args.joint_noise_prob,
                               wrist_dropout_prob=args.dropout,
                               seed=args.seed)
    out = export.augment(episode, cfg)
    path = _out_path(args.out)
    export.write_episode(out, path)
    emit([{"out": str(path), "steps": len(out.steps), "seed": args.seed}],
         args.format)
    return 0


# -----------------------------------------------------------------------------
# metrics
# -----------------------------------------------------------------------------

def _read_trials(path: str) -> list[metrics.Trial]:
    with open(path, newline="") as fh:
        return [metrics.Trial(success=row["outcome"].strip() == "success",
                              time_s=float(row["time_s"]))
                for row in _csv.DictReader(fh)]


def cmd_metrics_throughput(args) -> int:
    rep = metrics.throughput(_read_trials(args.trials), cap_s=args.cap)
    emit([{
        "completions_per_min": rep.completions_per_min,
        "successes": rep.successes, "failures": rep.failures,
        "reclassified": rep.reclassified,
        "mean_success_s": rep.mean_success_s if rep.mean_success_s is not None else math.nan,
    }], args.format)
    return 0


def cmd_metrics_success(args) -> int:
    rates = [float(v) for v in args.rates.split(",")]
    rep = metrics.EvalReport.from_rates(rates, sem=args.sem)
    emit([{"normalized_success": rep.normalized,
           "formatted": rep.formatted(),
           **{f"s{i+1}": r for i, r in enumerate(rates)}}], args.format)
    if args.figure:
        from .report import save_success_figure
        save_success_figure(rates, rep.normalized, _out_path(args.figure))
    return 0


def cmd_metrics_stages(args) -> int:
    per_stage: dict[str, list[float]] = {}
    with open(args.trials, newline="") as fh:
        for row in _csv.DictReader(fh):
            per_stage.setdefault(row["stage"], []).append(float(row["time_s"]))
    stats = metrics.stage_time_stats(per_stage)
    emit([{"stage": s.stage, "mean_s": s.mean_s, "sem_s": s.sem_s, "n": s.n,
           "sem_defined": int(s.sem_defined)} for s in stats], args.format)
    if args.figure:
        from .report import save_stage_time_figure
        save_stage_time_figure(stats, _out_path(args.figure))
    return 0


def cmd_metrics_manifest(args) -> int:
    if args.records:
        manifest = metrics.read_manifest(args.records)
    elif args.episodes:
        records = []
        for p in args.episodes:
            ep = export.read_episode(p)
            source = ep.source_tag
            records.append(metrics.EpisodeRecord(path=str(p), source=source,
                                                 duration_s=ep.duration_s))
        manifest = metrics.manifest_from_records(records)
    elif args.periop or args.teleop:
        def pair(text):
            if not text:
                return (0, 0.0)
            n, t = text.split(",")
            return (int(n), float(t))
        manifest = metrics.mix_manifest(pair(args.periop), pair(args.teleop))
    else:
        raise PeriopError("provide --records, --episodes, or --periop/--teleop")
    if args.out:
        metrics.write_manifest(manifest, _out_path(args.out))
    emit([{
        "periop_count": manifest.periop_count,
        "teleop_count": manifest.teleop_count,
        "periop_minutes": manifest.periop_minutes,
        "teleop_minutes": manifest.teleop_minutes,
        "total_minutes": manifest.total_minutes,
    }], args.format)
    return 0


# -----------------------------------------------------------------------------
# parser
# -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="periop", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    # model
    model = sub.add_parser("model", help="hand model reports")
    msub = model.add_subparsers(dest="subcommand", required=True)
    for name, fn in (("info", cmd_model_info), ("workspace", cmd_model_workspace)):
        sp = msub.add_parser(name)
        sp.add_argument("--model", default="DEXOP-7",
                        help="variant name or config file path")
        _add_format(sp)
        if name == "workspace":
            sp.add_argument("--figure", help="write a PNG figure to this path")
        sp.set_defaults(fn=fn)

    # linkage
    lk = sub.add_parser("linkage", help="four-bar analysis")
    lsub = lk.add_subparsers(dest="subcommand", required=True)
    sweep = lsub.add_parser("sweep")
    sweep.add_argument("--parallelogram", action="store_true",
                       help="identity stage (a=c crank, b=g standoff)")
    sweep.add_argument("--lengths-mm", help="g,a,b,c in millimeters")
    sweep.add_argument("--config", help="config file with stage.* keys")
    sweep.add_argument("--stage", help="finger:index of the config stage to sweep")
    sweep.add_argument("--offsets-deg", help="input,output mounting offsets")
    sweep.add_argument("--branch", choices=linkage.BRANCHES, default="open")
    sweep.add_argument("--start-deg", type=float, default=5.0)
    sweep.add_argument("--stop-deg", type=float, default=105.0)
    sweep.add_argument("--step-deg", type=float, default=1.0)
    sweep.add_argument("--initial-phi-deg", type=float,
                       help="known output angle at the sweep start (declares "
                            "the assembly; default: the declared branch)")
    sweep.add_argument("--figure")
    _add_format(sweep)
    sweep.set_defaults(fn=cmd_linkage_sweep)
    solve = lsub.add_parser("solve")
    solve.add_argument("--lengths-mm", required=True)
    solve.add_argument("--offsets-deg")
    solve.add_argument("--branch", choices=linkage.BRANCHES, default="open")
    solve.add_argument("--theta-deg", type=float, required=True)
    _add_format(solve)
    solve.set_defaults(fn=cmd_linkage_solve)

    # torque
    tq = sub.add_parser("torque", help="contact torque recovery")
    tsub = tq.add_subparsers(dest="subcommand", required=True)
    est = tsub.add_parser("estimate")
    est.add_argument("--session", required=True)
    est.add_argument("--contacts", required=True,
                     help="CSV: finger,phalanx,px,py,pz,fx,fy,fz")
    est.add_argument("--hand", choices=("left", "right"), default="left")
    est.add_argument("--model", default="DEXOP-7")
    est.add_argument("--rate", type=float, default=session.DEFAULT_RATE_HZ)
    _add_format(est)
    est.set_defaults(fn=cmd_torque_estimate)
    obs = tsub.add_parser("observability")
    obs.add_argument("--model", default="DEXOP-7")
    obs.add_argument("--contacts", required=True)
    obs.add_argument("--state", help="comma-separated joint angles (rad); default zeros")
    _add_format(obs)
    obs.set_defaults(fn=cmd_torque_observability)

    # tactile
    ta = sub.add_parser("tactile", help="tactile frame tools")
    tasub = ta.add_subparsers(dest="subcommand", required=True)
    synth = tasub.add_parser("synth")
    synth.add_argument("--sensor", default="index-distal")
    synth.add_argument("--point", default="60,80", help="row,col in pixels")
    synth.add_argument("--force", type=float, default=20.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--height", type=int, default=tactile.DEFAULT_H)
    synth.add_argument("--width", type=int, default=tactile.DEFAULT_W)
    synth.add_argument("--out", required=True)
    _add_format(synth)
    synth.set_defaults(fn=cmd_tactile_synth)
    summ = tasub.add_parser("summarize")
    summ.add_argument("--frame", required=True)
    summ.add_argument("--reference", help="baseline frame; delta computed when given")
    summ.add_argument("--threshold", type=int, default=12)
    _add_format(summ)
    summ.set_defaults(fn=cmd_tactile_summarize)

    # record / replay / align / inspect / validate
    rec = sub.add_parser("record", help="record a synthetic session")
    rec.add_argument("--out", required=True)
    rec.add_argument("--duration", type=float, default=5.0)
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--rate", type=float, default=session.DEFAULT_RATE_HZ)
    rec.add_argument("--jitter-ms", type=float, default=0.0)
    rec.add_argument("--height", type=int, default=48)
    rec.add_argument("--width", type=int, default=64)
    rec.add_argument("--variant", default="DEXOP-7")
    _add_format(rec)
    rec.set_defaults(fn=cmd_record)

    rep = sub.add_parser("replay", help="dump records or aligned steps")
    rep.add_argument("file")
    rep.add_argument("--stream", help="restrict raw session replay to one stream")
    _add_format(rep)
    rep.set_defaults(fn=cmd_replay)

    al = sub.add_parser("align", help="20 Hz aligned view of a session")
    al.add_argument("file")
    al.add_argument("--rate", type=float, default=session.DEFAULT_RATE_HZ)
    al.add_argument("--out", help="write the aligned container here")
    al.add_argument("--figure")
    _add_format(al)
    al.set_defaults(fn=cmd_align)

    ins = sub.add_parser("inspect", help="container header and stream table")
    ins.add_argument("file")
    _add_format(ins)
    ins.set_defaults(fn=cmd_inspect)

    val = sub.add_parser("validate", help="checksum and index validation")
    val.add_argument("file")
    val.set_defaults(fn=cmd_validate)

    # export / augment
    ex = sub.add_parser("export", help="aligned session -> training episode")
    ex.add_argument("--session", required=True)
    ex.add_argument("--out", required=True)
    ex.add_argument("--chunks", type=int, default=1,
                    help="action chunk horizon k (arm delta = q[t+k]-q[t])")
    ex.add_argument("--source-tag", choices=export.SOURCE_TAGS,
                    default="perioperation")
    ex.add_argument("--task-id", default="")
    ex.add_argument("--rate", type=float, default=session.DEFAULT_RATE_HZ)
    _add_format(ex)
    ex.set_defaults(fn=cmd_export)

    aug = sub.add_parser("augment", help="training-time augmentation")
    aug.add_argument("--episode", required=True)
    aug.add_argument("--out", required=True)
    aug.add_argument("--seed", type=int, required=True)
    aug.add_argument("--color-jitter", type=float, default=0.1)
    aug.add_argument("--joint-noise-deg", type=float, default=10.0)
    aug.add_argument("--joint-noise-prob", type=float, default=0.1)
    aug.add_argument("--dropout", type=float, default=0.3)
    _add_format(aug)
    aug.set_defaults(fn=cmd_augment)

    # metrics
    me = sub.add_parser("metrics", help="evaluation and accounting metrics")
    mesub = me.add_subparsers(dest="subcommand", required=True)
    thr = mesub.add_parser("throughput")
    thr.add_argument("--trials", required=True, help="CSV: outcome,time_s")
    thr.add_argument("--cap", type=float, default=metrics.DEFAULT_TIME_CAP_S)
    _add_format(thr)
    thr.set_defaults(fn=cmd_metrics_throughput)
    suc = mesub.add_parser("success")
    suc.add_argument("--rates", required=True, help="six comma-separated stage rates")
    suc.add_argument("--sem", type=float)
    suc.add_argument("--figure")
    _add_format(suc)
    suc.set_defaults(fn=cmd_metrics_success)
    stg = mesub.add_parser("stages")
    stg.add_argument("--trials", required=True, help="CSV: stage,time_s")
    stg.add_argument("--figure")
    _add_format(stg)
    stg.set_defaults(fn=cmd_metrics_stages)
    man = mesub.add_parser("manifest")
    man.add_argument("--records", help="existing manifest JSONL")
    man.add_argument("--episodes", nargs="*", help="episode files to account")
    man.add_argument("--periop", help="count,seconds_per_demo")
    man.add_argument("--teleop", help="count,seconds_per_demo")
    man.add_argument("--out", help="write manifest JSONL here")
    _add_format(man)
    man.set_defaults(fn=cmd_metrics_manifest)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PeriopError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # downstream consumer (head, etc.) closed the pipe
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0


def entry() -> None:  # console_scripts hook
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
