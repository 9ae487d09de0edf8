"""Plain-text key=value config files for model presets and linkage overrides.

Schema (lines are ``key = value``; ``#`` starts a comment; lengths in mm,
angles in degrees):

    variant = DEXOP-7
    proximal_mm = 45                  # default for all fingers
    distal_mm = 35
    finger.index.proximal_mm = 47     # per-finger override
    mcp_spacing_mm = 22
    thumb.tm_axis_separation_mm = 10
    limit.PIP = 0 105                 # per joint kind, degrees
    speed.PIP = 15                    # rad/s

    standoff_mm = 60
    stage.index.1.kind = four-bar     # coaxial | four-bar | chained-four-bar-stage2
    stage.index.1.source = index.mcp_flexion
    stage.index.1.target = index.mcp_flexion
    stage.index.1.lengths_mm = 60 45 60 45   # ground input coupler output
    stage.index.1.offsets_deg = 0 0
    stage.index.1.branch = open
    stage.index.2.parent = index.mcp_flexion # chained stages only

Stages are optional; without any ``stage.*`` key the parallelogram identity
linkage is generated from the model.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

from .errors import ConfigError
from .hand_model import HandModel, load_model
from .linkage import (
    CouplingStage,
    FourBarGeometry,
    LinkageModel,
    default_linkage,
)

DEG = math.pi / 180.0


def load_config(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _floats(value: str, n: int, key: str) -> list[float]:
    parts = value.split()
    if len(parts) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {value!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from e


def model_from_config(cfg: dict[str, str]) -> HandModel:
    variant = cfg.get("variant", "DEXOP-7")
    overrides: dict[str, object] = {}
    limits: dict[str, tuple[float, float]] = {}
    speeds: dict[str, float] = {}
    for key, value in cfg.items():
        if key == "variant" or key.startswith(("stage.", "standoff")):
            continue
        if m := re.fullmatch(r"finger\.(\w+)\.(proximal|distal)_mm", key):
            overrides[f"{m.group(1)}.{m.group(2)}_m"] = float(value) / 1000.0
        elif m := re.fullmatch(r"(proximal|distal)_mm", key):
            overrides[f"{m.group(1)}_m"] = float(value) / 1000.0
        elif key == "mcp_spacing_mm":
            overrides["mcp_spacing_m"] = float(value) / 1000.0
        elif key == "thumb.tm_axis_separation_mm":
            overrides["thumb.tm_axis_separation_m"] = float(value) / 1000.0
        elif key.startswith("limit."):
            lo, hi = _floats(value, 2, key)
            limits[key.removeprefix("limit.")] = (lo, hi)
        elif key.startswith("speed."):
            speeds[key.removeprefix("speed.")] = float(value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if limits:
        overrides["limits_deg"] = limits
    if speeds:
        overrides["max_speed"] = speeds
    return load_model(variant, overrides)


def linkage_from_config(cfg: dict[str, str], model: HandModel) -> LinkageModel:
    standoff = float(cfg.get("standoff_mm", 60.0)) / 1000.0
    stage_keys = [k for k in cfg if k.startswith("stage.")]
    if not stage_keys:
        return default_linkage(model, standoff=standoff)

    grouped: dict[tuple[str, int], dict[str, str]] = {}
    for key in stage_keys:
        m = re.fullmatch(r"stage\.(\w+)\.(\d+)\.(\w+)", key)
        if not m:
            raise ConfigError(f"malformed stage key {key!r}")
        grouped.setdefault((m.group(1), int(m.group(2))), {})[m.group(3)] = cfg[key]

    stages: dict[str, list[CouplingStage]] = {}
    for (finger, _), fields in sorted(grouped.items(), key=lambda kv: kv[0]):
        kind = fields.get("kind")
        source = fields.get("source")
        target = fields.get("target")
        if not (kind and source and target):
            raise ConfigError(f"stage for {finger!r} needs kind, source, target")
        geometry = None
        if kind != "coaxial":
            g, a, b, c = _floats(fields.get("lengths_mm", ""), 4,
                                 f"stage.{finger}.lengths_mm")
            off_in, off_out = (0.0, 0.0)
            if "offsets_deg" in fields:
                off_in, off_out = _floats(fields["offsets_deg"], 2,
                                          f"stage.{finger}.offsets_deg")
            geometry = FourBarGeometry(
                ground=g / 1000.0, input_link=a / 1000.0, coupler=b / 1000.0,
                output_link=c / 1000.0, input_offset=off_in * DEG,
                output_offset=off_out * DEG,
                branch=fields.get("branch", "open"))
        stages.setdefault(finger, []).append(CouplingStage(
            kind=kind, source=source, target=target, geometry=geometry,
            parent=fields.get("parent")))
    return LinkageModel(stages={k: tuple(v) for k, v in stages.items()},
                        joint_order=model.joint_ids, standoff=standoff)


def resolve_model(spec: str) -> HandModel:
    """``--model`` argument: a variant name or a config file path."""
    if spec in ("DEXOP-12", "DEXOP-9", "DEXOP-7"):
        return load_model(spec)
    path = Path(spec)
    if not path.exists():
        from .errors import UnknownVariant
        raise UnknownVariant(f"{spec!r} is neither a variant name nor a config file")
    return model_from_config(load_config(path))
