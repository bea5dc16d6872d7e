"""Server compute allocation: group split and water-filling budget solve.

Clients are ordered by their local-only session latency.  A suffix of that
order shares the server budget so that every assisted client finishes at a
common level t, found by solving

    H(t) = sum_served  need_k / (t - floor_k)  =  F_max,

where floor_k is the client's server-independent latency and need_k the
server-side work it offloads.  H is strictly decreasing and convex in t, so
the root is unique and bisection suffices.  The group boundary is chosen by
scanning every suffix and keeping the one whose objective
max(unassisted latencies, water level) is smallest: in the ordinary case
this is exactly the bracket condition T~_{theta-1} <= t <= T~_theta, and it
stays well-defined when locked local-only clients (cut at L) or an
over-provisioned budget make the bracket unsatisfiable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .exceptions import DomainError, InfeasibleAllocationError, InfeasibleTargetError
from .latency import ClientSpec, latency_fedavg, latency_split
from .profile import FittedCurves, ModelProfile

_BISECT_TOL = 1e-15
_BISECT_MAX_ITERS = 200


@dataclass(frozen=True)
class ServerSpec:
    """Total server compute budget in FLOPs/s."""

    f_max: float

    def __post_init__(self):
        if self.f_max <= 0:
            raise DomainError(f"f_max must be positive, got {self.f_max}")


@dataclass
class AllocationResult:
    """Joint outcome of the group split and the budget solve.

    theta is the 1-based position (in `order`) of the first assisted client,
    K+1 when nobody is assisted.  t_theta is the round objective, i.e. the
    largest per-client latency.  water_level is the equalized latency of the
    assisted clients; it equals t_theta except when a local-only client with
    a higher fixed latency caps the objective from above.
    """

    order: list[str]
    theta: int
    f_server: dict[str, float]
    t_theta: float
    water_level: float
    per_client_latency: dict[str, float]
    served_ids: list[str] = field(default_factory=list)


def _floor_and_need(
    client: ClientSpec, l: int, curves: FittedCurves, layer_count: int
) -> tuple[float, float]:
    """Server-independent latency floor and offloaded server work for a cut."""
    n = client.session_samples
    lam = curves.gamma1 / (l + curves.gamma2)
    floor = (
        2.0 * curves.alpha * l * l / client.rate
        + n * (
            curves.beta * (1.0 + curves.kappa) * l / client.f_local
            + 2.0 * lam / client.rate
        )
    )
    need = n * curves.beta * (1.0 + curves.kappa) * (layer_count - l)
    return floor, need


def local_latency(client: ClientSpec, profile: ModelProfile) -> float:
    """Session latency with no server help (full model trained locally)."""
    return latency_fedavg(client, profile.total_model_bits, profile.total_flops).total_s


def sort_by_local_latency(
    clients: list[ClientSpec], profile: ModelProfile
) -> list[ClientSpec]:
    """Ascending by local-only latency; ties broken by client id (stable)."""
    if not clients:
        raise DomainError("client list must be non-empty")
    return sorted(clients, key=lambda c: (local_latency(c, profile), c.id))


def closed_form_f_server(
    client: ClientSpec,
    l: int,
    curves: FittedCurves,
    profile: ModelProfile,
    t_theta: float,
) -> float:
    """Server share that makes the client's session last exactly t_theta."""
    if not client.l_min <= l < profile.layer_count:
        raise DomainError(f"cut-layer {l} not assistable for client {client.id}")
    floor, need = _floor_and_need(client, l, curves, profile.layer_count)
    if t_theta <= floor:
        raise InfeasibleTargetError(
            f"target {t_theta:.6g}s is at or below client {client.id}'s floor {floor:.6g}s"
        )
    return need / (t_theta - floor)


def server_demand(
    served: list[ClientSpec],
    cut_layers: dict[str, int],
    curves: FittedCurves,
    profile: ModelProfile,
    t: float,
) -> float:
    """H(t): total server compute needed to equalize the served set at t."""
    total = 0.0
    for c in served:
        floor, need = _floor_and_need(c, cut_layers[c.id], curves, profile.layer_count)
        if t <= floor:
            raise DomainError(f"t={t:.6g} at or below floor of client {c.id}")
        total += need / (t - floor)
    return total


def dH_dt(served, cut_layers, curves, profile, t) -> float:
    """First derivative of the demand curve; strictly negative."""
    total = 0.0
    for c in served:
        floor, need = _floor_and_need(c, cut_layers[c.id], curves, profile.layer_count)
        if t <= floor:
            raise DomainError(f"t={t:.6g} at or below floor of client {c.id}")
        total -= need / (t - floor) ** 2
    return total


def d2H_dt2(served, cut_layers, curves, profile, t) -> float:
    """Second derivative of the demand curve; strictly positive."""
    total = 0.0
    for c in served:
        floor, need = _floor_and_need(c, cut_layers[c.id], curves, profile.layer_count)
        if t <= floor:
            raise DomainError(f"t={t:.6g} at or below floor of client {c.id}")
        total += 2.0 * need / (t - floor) ** 3
    return total


def solve_t_theta(
    served_clients: list[ClientSpec],
    cut_layers: dict[str, int],
    curves: FittedCurves,
    profile: ModelProfile,
    f_max: float,
) -> float:
    """Unique t with H(t) = f_max for a non-empty assisted set.

    Bisection on (max floor, max floor + sum(need)/f_max]: the lower end
    sends H to +inf and the upper end satisfies H <= f_max, so the bracket
    always holds.  H strictly decreasing makes the root unique.
    """
    if not served_clients:
        raise DomainError("served set must be non-empty")
    if f_max <= 0:
        raise DomainError(f"f_max must be positive, got {f_max}")
    floors, needs = [], []
    for c in served_clients:
        l = cut_layers[c.id]
        if l >= profile.layer_count:
            raise DomainError(f"client {c.id} has cut-layer {l} = L and cannot be assisted")
        floor, need = _floor_and_need(c, l, curves, profile.layer_count)
        floors.append(floor)
        needs.append(need)
    lo = max(floors)
    # keep the bracket open even when the budget dwarfs the total need and
    # lo + need/f_max rounds back onto lo
    hi = max(lo + sum(needs) / f_max, math.nextafter(lo, math.inf))
    for _ in range(_BISECT_MAX_ITERS):
        if hi - lo <= _BISECT_TOL * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        demand = sum(n / (mid - f) for n, f in zip(needs, floors))
        if demand > f_max:
            lo = mid
        else:
            hi = mid
    # hi is the side with demand <= f_max, so allocations derived from it
    # can never exceed the budget, and it stays strictly above every floor
    return hi


def allocate(
    clients: list[ClientSpec],
    cut_layers: dict[str, int],
    curves: FittedCurves,
    profile: ModelProfile,
    server: ServerSpec,
) -> AllocationResult:
    """Pick the assisted suffix and split the budget so it finishes together.

    Every suffix boundary theta in 1..K+1 is evaluated: its assisted set is
    the suffix minus locked local-only clients (cut at L), its objective is
    max(unassisted local latencies, full-budget water level).  The smallest
    objective wins; ties go to the smaller theta (assist more clients).
    Unassisted clients receive exactly zero.
    """
    order = sort_by_local_latency(clients, profile)
    missing = [c.id for c in order if c.id not in cut_layers]
    if missing:
        raise DomainError(f"cut_layers missing entries for clients: {missing}")
    K = len(order)
    L = profile.layer_count
    tilde = [local_latency(c, profile) for c in order]
    locked = [cut_layers[c.id] >= L for c in order]

    best = None
    diagnostics = []
    for theta in range(1, K + 2):
        served = [c for i, c in enumerate(order) if i >= theta - 1 and not locked[i]]
        unassisted = [tilde[i] for i in range(K) if i < theta - 1 or locked[i]]
        cap = max(unassisted) if unassisted else 0.0
        if served:
            level = solve_t_theta(served, cut_layers, curves, profile, server.f_max)
            obj = max(cap, level)
        else:
            level = None
            obj = max(tilde)
        diagnostics.append((theta, obj, level, cap, len(served)))
        if best is None or obj < best[1]:
            best = (theta, obj, level, served)
    if best is None:  # unreachable: theta = K+1 always evaluates
        raise InfeasibleAllocationError("no feasible group split", diagnostics)

    _, _, level, served = best
    served_set = {c.id for c in served}
    f_server = {}
    per_client = {}
    for i, c in enumerate(order):
        if c.id in served_set:
            f = closed_form_f_server(c, cut_layers[c.id], curves, profile, level)
            f_server[c.id] = f
            per_client[c.id] = latency_split(c, cut_layers[c.id], f, curves, L).total_s
        else:
            f_server[c.id] = 0.0
            per_client[c.id] = tilde[i]

    objective = max(per_client.values())
    theta_out = K + 1
    for i, c in enumerate(order):
        if c.id in served_set:
            theta_out = i + 1
            break
    return AllocationResult(
        order=[c.id for c in order],
        theta=theta_out,
        f_server=f_server,
        t_theta=objective,
        water_level=level if level is not None else objective,
        per_client_latency=per_client,
        served_ids=[c.id for c in order if c.id in served_set],
    )
