"""Figure rendering for the CLI report paths. Files only, Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .hand_model import WorkspaceRow  # noqa: E402
from .metrics import StageStats  # noqa: E402


def save_workspace_figure(rows: Sequence[WorkspaceRow], path: str | Path) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    labels = [r.joint_id for r in rows]
    x = range(len(rows))
    ax1.bar(x, [r.range_deg for r in rows], color="#4878a8")
    ax1.set_ylabel("workspace (deg)")
    ax2.bar(x, [r.max_speed for r in rows], color="#a85648")
    ax2.set_ylabel("max speed (rad/s)")
    for ax in (ax1, ax2):
        ax.set_xticks(list(x))
        ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sweep_figure(rows: Sequence[tuple[float, float, float]],
                      path: str | Path) -> None:
    """rows: (theta_deg, phi_deg, ratio)."""
    theta = [r[0] for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(theta, [r[1] for r in rows], lw=1.2)
    ax1.set_ylabel("phi (deg)")
    ax2.plot(theta, [r[2] for r in rows], lw=1.2, color="#a85648")
    ax2.set_ylabel("dphi/dtheta")
    ax2.set_xlabel("theta (deg)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_stage_time_figure(stats: Sequence[StageStats], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    x = range(len(stats))
    ax.bar(x, [s.mean_s for s in stats], yerr=[s.sem_s for s in stats],
           capsize=4, color="#4878a8")
    ax.set_xticks(list(x))
    ax.set_xticklabels([s.stage for s in stats], rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("time per stage (s)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_success_figure(stage_rates: Sequence[float], normalized: float,
                        path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    x = list(range(1, len(stage_rates) + 1))
    ax.bar(x, stage_rates, color="#4878a8")
    ax.axhline(normalized, color="#a85648", ls="--",
               label=f"normalized {normalized:.3f}")
    ax.set_xlabel("stage")
    ax.set_ylabel("cumulative success rate")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_align_figure(ticks: Sequence[dict], stream_kinds: Sequence[str],
                      path: str | Path) -> None:
    """ticks: per-step dicts with skew_<kind>_ms entries plus t_s."""
    fig, ax = plt.subplots(figsize=(8, 4))
    t = [row["t_s"] for row in ticks]
    for kind in stream_kinds:
        ax.plot(t, [row[f"skew_{kind}_ms"] for row in ticks], lw=0.8, label=kind)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("|skew| (ms)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
