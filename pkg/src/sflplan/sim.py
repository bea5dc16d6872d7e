"""Deterministic replay of one synchronized global round under a plan.

Each client's session is laid out as a contiguous timeline: fragment
download, the six training stages (client forward, activation upload,
server forward, server backward, gradient download, client backward),
fragment upload.  Stage blocks aggregate all epochs by default; an expanded
mode emits one block per epoch for timeline inspection.  Local-only clients
collapse to download / compute / upload.  Aggregation is a barrier: it
starts only after the last upload ends, and the round latency is that
barrier time, which must agree with the analytic objective.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .exceptions import SimulationError
from .latency import ClientSpec, latency_fedavg, latency_split
from .optimizer import Plan
from .profile import FittedCurves, ModelProfile

MAX_TRACE_EVENTS = 100_000
SERVER_ID = "server"

SPLIT_STAGES = (
    "client_fp", "upload_smashed", "server_fp", "server_bp", "download_grads", "client_bp",
)


@dataclass(frozen=True)
class TraceEvent:
    client_id: str
    phase: str
    start_s: float
    end_s: float


@dataclass
class RoundTrace:
    events: list[TraceEvent]
    round_latency_s: float
    aggregation_weights: dict[str, float]


def _client_timeline(
    client: ClientSpec,
    l: int,
    f: float,
    curves: FittedCurves,
    profile: ModelProfile,
    expand_epochs: bool,
) -> list[tuple[str, float]]:
    """(phase, duration) blocks for one client, in execution order."""
    L = profile.layer_count
    if l >= L:
        bd = latency_fedavg(client, profile.total_model_bits, profile.total_flops)
        half = bd.model_transfer_s / 2.0
        return [("distribute", half), ("client_fp", bd.client_fp_s), ("upload_model", half)]
    bd = latency_split(client, l, f, curves, L)
    half = bd.model_transfer_s / 2.0
    stage_durs = (
        bd.client_fp_s, bd.smashed_up_s, bd.server_fp_s,
        bd.server_bp_s, bd.grads_down_s, bd.client_bp_s,
    )
    blocks = [("distribute", half)]
    if expand_epochs:
        for _ in range(client.epochs):
            blocks.extend(zip(SPLIT_STAGES, (d / client.epochs for d in stage_durs)))
    else:
        blocks.extend(zip(SPLIT_STAGES, stage_durs))
    blocks.append(("upload_model", half))
    return blocks


def simulate_round(
    plan: Plan,
    clients: list[ClientSpec],
    curves: FittedCurves,
    profile: ModelProfile,
    expand_epochs: bool = False,
) -> RoundTrace:
    """Replay one round; the barrier time must equal the analytic objective."""
    L = profile.layer_count
    for c in clients:
        if c.id not in plan.cut_layers or c.id not in plan.f_server:
            raise SimulationError(f"plan has no entry for client {c.id}")
        if plan.cut_layers[c.id] < L and plan.f_server[c.id] <= 0:
            raise SimulationError(
                f"client {c.id} is assisted (cut {plan.cut_layers[c.id]} < {L}) "
                "but has no server allocation"
            )

    expected = 1
    for c in clients:
        if plan.cut_layers[c.id] >= L:
            expected += 3
        else:
            expected += 2 + 6 * (c.epochs if expand_epochs else 1)
    if expected > MAX_TRACE_EVENTS:
        raise SimulationError(
            f"trace would hold {expected} events (cap {MAX_TRACE_EVENTS})"
        )

    events: list[TraceEvent] = []
    round_end = 0.0
    for c in clients:
        blocks = _client_timeline(
            c, plan.cut_layers[c.id], plan.f_server[c.id], curves, profile, expand_epochs
        )
        t = 0.0
        for phase, dur in blocks:
            events.append(TraceEvent(c.id, phase, t, t + dur))
            t += dur
        round_end = max(round_end, t)
    events.append(TraceEvent(SERVER_ID, "aggregate", round_end, round_end))

    total_samples = sum(c.dataset_size for c in clients)
    weights = {c.id: c.dataset_size / total_samples for c in clients}
    return RoundTrace(events=events, round_latency_s=round_end, aggregation_weights=weights)


def simulate_campaign(
    plan: Plan,
    clients: list[ClientSpec],
    curves: FittedCurves,
    profile: ModelProfile,
    rounds: int,
    expand_epochs: bool = False,
) -> tuple[list[RoundTrace], float]:
    """Replay several identical rounds; the model is round-stationary."""
    if rounds < 1:
        raise SimulationError(f"rounds must be >= 1, got {rounds}")
    trace = simulate_round(plan, clients, curves, profile, expand_epochs)
    traces = [trace] * rounds
    cumulative = float(sum(t.round_latency_s for t in traces))
    return traces, cumulative


def write_trace_csv(trace: RoundTrace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["client_id", "phase", "start_s", "end_s"])
        for ev in trace.events:
            writer.writerow([ev.client_id, ev.phase, repr(ev.start_s), repr(ev.end_s)])


def write_trace_summary_csv(trace: RoundTrace, path: str | Path) -> None:
    """Per-client first start, last end, and busy seconds."""
    per_client: dict[str, list[TraceEvent]] = {}
    for ev in trace.events:
        if ev.client_id != SERVER_ID:
            per_client.setdefault(ev.client_id, []).append(ev)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["client_id", "start_s", "end_s", "total_s", "weight"])
        for cid, evs in per_client.items():
            start = min(e.start_s for e in evs)
            end = max(e.end_s for e in evs)
            writer.writerow([
                cid, repr(start), repr(end), repr(end - start),
                repr(trace.aggregation_weights[cid]),
            ])
