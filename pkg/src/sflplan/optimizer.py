"""Alternating cut-layer selection and budget allocation.

Starting from an equal budget split, each iteration re-selects every
client's cut-layer against its current share, then re-allocates the budget
for the new cuts.  Both half-steps only ever improve the round objective,
so the objective trace is non-increasing and the loop stops once the
relative change falls below tolerance (or at the iteration cap).  The
best-seen iterate is returned, which keeps the monotonicity guarantee
robust to floating-point jitter near the fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .alloc import ServerSpec, allocate
from .cutlayer import select_cut_layer
from .exceptions import DomainError
from .latency import ClientSpec, LatencyBreakdown, latency_fedavg, latency_split
from .profile import FittedCurves, ModelProfile


@dataclass(frozen=True)
class OptimizerOptions:
    max_iters: int = 20
    conv_tol: float = 1e-6
    strict_paper_mode: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.conv_tol <= 0:
            raise DomainError(f"conv_tol must be positive, got {self.conv_tol}")


@dataclass
class Plan:
    """Joint solution: effective cut-layers, budget split, and latencies.

    cut_layers holds each client's operative cut: clients without a server
    share train the whole model locally and are recorded at L.  trace lists
    (iteration, objective) pairs in execution order.
    """

    cut_layers: dict[str, int]
    f_server: dict[str, float]
    theta: int
    objective: float
    per_client: dict[str, LatencyBreakdown]
    trace: list[tuple[int, float]] = field(default_factory=list)
    order: list[str] = field(default_factory=list)


def _breakdown_for(
    client: ClientSpec,
    l: int,
    f: float,
    curves: FittedCurves,
    profile: ModelProfile,
) -> LatencyBreakdown:
    if l >= profile.layer_count or f <= 0:
        return latency_fedavg(client, profile.total_model_bits, profile.total_flops)
    return latency_split(client, l, f, curves, profile.layer_count)


def optimize(
    clients: list[ClientSpec],
    curves: FittedCurves,
    profile: ModelProfile,
    server: ServerSpec,
    options: OptimizerOptions | None = None,
    initial_f: dict[str, float] | None = None,
) -> Plan:
    """Run the alternating optimization and return the best-seen plan.

    Clients with a zero share are re-evaluated against a probe share of
    f_max/K (and, if still local-best, against the full budget) so they can
    rejoin the assisted group on a later iteration; the allocation step then
    decides whether assisting them actually helps, so the probe never
    degrades the objective.  Strict mode disables the probe and freezes
    zero-share clients at the local branch.
    """
    if not clients:
        raise DomainError("client list must be non-empty")
    opts = options or OptimizerOptions()
    L = profile.layer_count
    for c in clients:
        if c.l_min > L:
            raise DomainError(f"client {c.id}: l_min {c.l_min} exceeds L={L}")

    K = len(clients)
    probe = server.f_max / K
    shares = dict(initial_f) if initial_f is not None else {c.id: probe for c in clients}

    trace: list[tuple[int, float]] = []
    best = None
    prev_obj = None
    for i in range(opts.max_iters):
        cuts = {}
        for c in clients:
            share = shares.get(c.id, 0.0)
            if share > 0:
                cuts[c.id] = select_cut_layer(
                    c, share, curves, profile, strict_paper_mode=opts.strict_paper_mode
                )
            elif opts.strict_paper_mode:
                cuts[c.id] = L
            else:
                cut = select_cut_layer(c, probe, curves, profile)
                if cut == L and probe < server.f_max:
                    cut = select_cut_layer(c, server.f_max, curves, profile)
                cuts[c.id] = cut
        result = allocate(clients, cuts, curves, profile, server)
        obj = result.t_theta
        trace.append((i, obj))
        if best is None or obj < best[0]:
            best = (obj, cuts, result)
        if prev_obj is not None and abs(prev_obj - obj) <= opts.conv_tol * prev_obj:
            break
        prev_obj = obj
        shares = result.f_server

    obj, cuts, result = best
    effective = {}
    per_client = {}
    by_id = {c.id: c for c in clients}
    for cid, client in by_id.items():
        f = result.f_server[cid]
        l = cuts[cid] if f > 0 else L
        effective[cid] = l
        per_client[cid] = _breakdown_for(client, l, f, curves, profile)
    return Plan(
        cut_layers=effective,
        f_server=dict(result.f_server),
        theta=result.theta,
        objective=max(b.total_s for b in per_client.values()),
        per_client=per_client,
        trace=trace,
        order=list(result.order),
    )


def objective(
    plan: Plan,
    clients: list[ClientSpec],
    curves: FittedCurves,
    profile: ModelProfile,
) -> float:
    """Recompute the round objective from the plan's raw fields.

    Guards against stale cached breakdowns: the result must match
    plan.objective exactly up to float reassociation.
    """
    worst = 0.0
    for c in clients:
        bd = _breakdown_for(c, plan.cut_layers[c.id], plan.f_server[c.id], curves, profile)
        worst = max(worst, bd.total_s)
    return worst
