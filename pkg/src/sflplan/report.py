"""Delimited output and figure rendering for the CLI report paths.

Every report is a CSV (or JSON) plus a PNG rendered next to it.  Output is
deterministic: rows follow input order, floats use shortest round-trip
repr, and PNG metadata is pinned so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .optimizer import Plan
from .profile import FittedCurves, ModelProfile
from .sim import RoundTrace, SERVER_ID

PNG_METADATA = {"Software": "sflplan"}

_PHASE_COLORS = {
    "distribute": "#999999",
    "client_fp": "#1f77b4",
    "upload_smashed": "#2ca02c",
    "server_fp": "#d62728",
    "server_bp": "#ff7f0e",
    "download_grads": "#17becf",
    "client_bp": "#9467bd",
    "upload_model": "#7f7f7f",
    "aggregate": "#000000",
}


def _fmt(x: float) -> str:
    return repr(float(x))


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=130, metadata=PNG_METADATA)
    plt.close(fig)


# ---------------------------------------------------------------------------
# plan report
# ---------------------------------------------------------------------------

def plan_to_dict(plan: Plan, curves: FittedCurves) -> dict:
    return {
        "objective_s": plan.objective,
        "theta": plan.theta,
        "order": plan.order,
        "cut_layers": plan.cut_layers,
        "f_server_flops": plan.f_server,
        "trace": [[i, obj] for i, obj in plan.trace],
        "curves": curves.to_dict(),
        "per_client": {
            cid: {
                "total_s": bd.total_s,
                "model_transfer_s": bd.model_transfer_s,
                "client_fp_s": bd.client_fp_s,
                "smashed_up_s": bd.smashed_up_s,
                "server_fp_s": bd.server_fp_s,
                "server_bp_s": bd.server_bp_s,
                "grads_down_s": bd.grads_down_s,
                "client_bp_s": bd.client_bp_s,
            }
            for cid, bd in plan.per_client.items()
        },
    }


def write_plan_json(plan: Plan, curves: FittedCurves, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_dict(plan, curves), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan_json(path: str | Path) -> tuple[Plan, FittedCurves]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    curves = FittedCurves.from_dict(data["curves"])
    plan = Plan(
        cut_layers={k: int(v) for k, v in data["cut_layers"].items()},
        f_server={k: float(v) for k, v in data["f_server_flops"].items()},
        theta=int(data["theta"]),
        objective=float(data["objective_s"]),
        per_client={},
        trace=[(int(i), float(o)) for i, o in data.get("trace", [])],
        order=list(data.get("order", [])),
    )
    return plan, curves


def write_per_client_csv(
    plan: Plan,
    local_latency: dict[str, float],
    layer_count: int,
    path: str | Path,
) -> None:
    """One row per client in allocation order, with the session breakdown."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "client_id", "mode", "cut_layer", "f_server_gflops", "local_only_s",
            "client_compute_s", "server_compute_s", "intermediate_transfer_s",
            "model_transfer_s", "total_s",
        ])
        for cid in plan.order:
            bd = plan.per_client[cid]
            l = plan.cut_layers[cid]
            mode = "local" if l >= layer_count else "split"
            writer.writerow([
                cid, mode, l, _fmt(plan.f_server[cid] / 1e9), _fmt(local_latency[cid]),
                _fmt(bd.client_compute_s), _fmt(bd.server_compute_s),
                _fmt(bd.intermediate_transfer_s), _fmt(bd.model_transfer_s), _fmt(bd.total_s),
            ])


def render_per_client(
    plan: Plan,
    local_latency: dict[str, float],
    layer_count: int,
    path: str | Path,
) -> None:
    """Stacked per-client session bars with the local-only baseline."""
    ids = plan.order
    parts = [
        ("client compute", [plan.per_client[c].client_compute_s for c in ids], "#1f77b4"),
        ("server compute", [plan.per_client[c].server_compute_s for c in ids], "#d62728"),
        ("intermediate transfer", [plan.per_client[c].intermediate_transfer_s for c in ids], "#2ca02c"),
        ("model transfer", [plan.per_client[c].model_transfer_s for c in ids], "#999999"),
    ]
    x = np.arange(len(ids))
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(ids) + 2), 4.5))
    bottom = np.zeros(len(ids))
    for label, vals, color in parts:
        vals = np.asarray(vals)
        ax.bar(x, vals, bottom=bottom, label=label, color=color, width=0.6)
        bottom += vals
    baseline = [local_latency[c] for c in ids]
    ax.plot(x, baseline, "k^--", label="local-only baseline", markersize=6)
    ax.axhline(plan.objective, color="gray", lw=0.8, ls=":")
    ax.set_xticks(x)
    ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("session latency (s)")
    ax.set_title(f"per-client round latency (objective {plan.objective:.1f} s)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, Path(path))


# ---------------------------------------------------------------------------
# sweep reports
# ---------------------------------------------------------------------------

def write_layer_sweep_csv(rows: list[dict], path: str | Path) -> None:
    cols = [
        "cut_layer", "total_s", "model_transfer_s", "client_compute_s",
        "server_compute_s", "intermediate_transfer_s",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([row["cut_layer"]] + [_fmt(row[c]) for c in cols[1:]])


def render_layer_sweep(rows: list[dict], path: str | Path) -> None:
    ls = [r["cut_layer"] for r in rows]
    total = [r["total_s"] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(ls, total, "k-", lw=2, label="total")
    for key, label, color in [
        ("client_compute_s", "client compute", "#1f77b4"),
        ("server_compute_s", "server compute", "#d62728"),
        ("intermediate_transfer_s", "intermediate transfer", "#2ca02c"),
        ("model_transfer_s", "model transfer", "#999999"),
    ]:
        ax.plot(ls, [r[key] for r in rows], label=label, color=color, lw=1)
    i_min = int(np.argmin(total))
    ax.plot([ls[i_min]], [total[i_min]], "k*", markersize=12,
            label=f"best cut = {ls[i_min]}")
    ax.set_xlabel("cut-layer")
    ax.set_ylabel("session latency (s)")
    ax.set_title("session latency vs cut-layer")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, Path(path))


def write_fmax_sweep_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["f_max_gflops", "objective_s", "theta", "served_count"])
        for row in rows:
            writer.writerow([
                _fmt(row["f_max_gflops"]), _fmt(row["objective_s"]),
                row["theta"], row["served_count"],
            ])


def render_fmax_sweep(rows: list[dict], path: str | Path) -> None:
    f = [r["f_max_gflops"] for r in rows]
    obj = [r["objective_s"] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(f, obj, "o-", color="#1f77b4")
    ax.set_xscale("log")
    ax.set_xlabel("server budget (GFLOPs/s)")
    ax.set_ylabel("round latency (s)")
    ax.set_title("round latency vs server budget")
    fig.tight_layout()
    _save(fig, Path(path))


# ---------------------------------------------------------------------------
# fit and timeline reports
# ---------------------------------------------------------------------------

def render_fit(profile: ModelProfile, curves: FittedCurves, path: str | Path) -> None:
    """Measured per-layer arrays against the three fitted curves."""
    L = profile.layer_count
    layers = np.arange(1, L + 1, dtype=float)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.8))
    axes[0].plot(layers, profile.client_model_bits / 8e6, ".", ms=4, label="profile")
    axes[0].plot(layers, curves.alpha * layers**2 / 8e6, "-",
                 label=f"fit (R²={curves.r2_size:.4f})")
    axes[0].set_title("device fragment size")
    axes[0].set_ylabel("MB")
    axes[1].plot(layers, profile.client_flops_fwd / 1e9, ".", ms=4, label="profile")
    axes[1].plot(layers, curves.beta * layers / 1e9, "-",
                 label=f"fit (R²={curves.r2_flops:.4f})")
    axes[1].set_title("forward compute per sample")
    axes[1].set_ylabel("GFLOPs")
    axes[2].plot(layers[:-1], profile.smashed_bits[:-1] / 8e3, ".", ms=4, label="profile")
    axes[2].plot(layers[:-1], curves.gamma1 / (layers[:-1] + curves.gamma2) / 8e3, "-",
                 label=f"fit (R²={curves.r2_smashed:.4f})")
    axes[2].set_title("activation payload per sample")
    axes[2].set_ylabel("KB")
    for ax in axes:
        ax.set_xlabel("cut-layer")
        ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, Path(path))


def render_timeline(trace: RoundTrace, path: str | Path) -> None:
    """Gantt-style per-client phase timeline for one round."""
    ids = []
    for ev in trace.events:
        if ev.client_id != SERVER_ID and ev.client_id not in ids:
            ids.append(ev.client_id)
    lane = {cid: i for i, cid in enumerate(ids)}
    fig, ax = plt.subplots(figsize=(9, max(3, 0.45 * len(ids) + 1.5)))
    seen = set()
    for ev in trace.events:
        if ev.client_id == SERVER_ID:
            continue
        color = _PHASE_COLORS.get(ev.phase, "#cccccc")
        label = ev.phase if ev.phase not in seen else None
        seen.add(ev.phase)
        ax.barh(lane[ev.client_id], ev.end_s - ev.start_s, left=ev.start_s,
                height=0.6, color=color, label=label)
    ax.axvline(trace.round_latency_s, color="black", lw=1, ls="--", label="aggregate")
    ax.set_yticks(range(len(ids)))
    ax.set_yticklabels(ids, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("time (s)")
    ax.set_title(f"round timeline (latency {trace.round_latency_s:.1f} s)")
    ax.legend(fontsize=7, ncol=3)
    fig.tight_layout()
    _save(fig, Path(path))
