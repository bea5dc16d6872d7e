"""Brute-force reference implementations for tests.

These re-derive results the slow, obvious way and deliberately share no
logic with the modules they check: the latency oracle re-adds the eight
phase costs term by term, the cut-layer oracle tries every integer layer,
and the allocation oracle exhausts a simplex grid of budget splits.  Not a
public API; performance is a non-goal.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DomainError
from .latency import ClientSpec, latency_piecewise
from .profile import FittedCurves, ModelProfile

GRID_MAX_CLIENTS = 4
GRID_MAX_LEVELS = 200


def finite_difference(f, x: float, h: float) -> float:
    """Central difference (f(x+h) - f(x-h)) / 2h."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def phase_sum_latency(
    client: ClientSpec,
    l: int,
    f_server: float,
    curves: FittedCurves,
    profile: ModelProfile,
) -> float:
    """Session latency re-derived phase by phase.

    fragment down + fragment up + I*|B| * (client fwd + activation up +
    server fwd + server bwd + gradient down + client bwd); the l = L branch
    is the local-training closed form on the profile totals.
    """
    L = profile.layer_count
    n = client.epochs * client.batch
    if l == L:
        return 2.0 * profile.total_model_bits / client.rate + n * profile.total_flops / client.f_local
    lam = curves.gamma1 / (l + curves.gamma2)
    down = curves.alpha * l * l / client.rate
    up = curves.alpha * l * l / client.rate
    fp_client = curves.beta * l / client.f_local
    ts = lam / client.rate
    fp_server = curves.beta * (L - l) / f_server
    bp_server = curves.kappa * curves.beta * (L - l) / f_server
    tg = lam / client.rate
    bp_client = curves.kappa * curves.beta * l / client.f_local
    return down + up + n * (fp_client + ts + fp_server + bp_server + tg + bp_client)


def exhaustive_cut_layer(
    client: ClientSpec,
    f_server: float,
    curves: FittedCurves,
    profile: ModelProfile,
) -> int:
    """Argmin of the session latency over every integer cut-layer
    (ties to the smallest layer)."""
    best_l, best_t = None, None
    for l in range(client.l_min, profile.layer_count + 1):
        t = latency_piecewise(client, l, f_server, curves, profile)
        if best_t is None or t < best_t:
            best_l, best_t = l, t
    return best_l


def grid_allocation(
    clients: list[ClientSpec],
    cut_layers: dict[str, int],
    curves: FittedCurves,
    profile: ModelProfile,
    f_max: float,
    levels: int,
) -> tuple[dict[str, float], float]:
    """Best budget split over a simplex grid (plus the all-local point).

    Enumerates every composition of `levels` grid steps across the K
    clients, evaluates the max-latency objective for each, and returns the
    best allocation.  Capped at K <= 4 and 200 levels to stay tractable.
    """
    K = len(clients)
    if K < 1 or K > GRID_MAX_CLIENTS:
        raise DomainError(f"grid oracle limited to 1..{GRID_MAX_CLIENTS} clients, got {K}")
    if levels < 2 or levels > GRID_MAX_LEVELS:
        raise DomainError(f"levels must be in [2, {GRID_MAX_LEVELS}], got {levels}")
    L = profile.layer_count
    step = f_max / levels

    tilde = np.empty(K)
    floors = np.empty(K)
    needs = np.empty(K)
    locked = np.zeros(K, dtype=bool)
    for i, c in enumerate(clients):
        l = cut_layers[c.id]
        tilde[i] = latency_piecewise(c, L, 1.0, curves, profile)
        if l >= L:
            locked[i] = True
            floors[i] = tilde[i]
            needs[i] = 0.0
        else:
            n = c.epochs * c.batch
            lam = curves.gamma1 / (l + curves.gamma2)
            floors[i] = (
                2.0 * curves.alpha * l * l / c.rate
                + n * (curves.beta * (1.0 + curves.kappa) * l / c.f_local + 2.0 * lam / c.rate)
            )
            needs[i] = n * curves.beta * (1.0 + curves.kappa) * (L - l)

    # All compositions m_1 + ... + m_K = levels, m_i >= 0.
    if K == 1:
        grid = np.array([[levels]], dtype=np.int32)
    else:
        axes = np.meshgrid(*([np.arange(levels + 1, dtype=np.int32)] * (K - 1)), indexing="ij")
        head = np.stack([a.ravel() for a in axes], axis=1)
        last = levels - head.sum(axis=1)
        keep = last >= 0
        grid = np.concatenate([head[keep], last[keep, None]], axis=1)

    f = grid.astype(float) * step
    lat = np.empty_like(f)
    with np.errstate(divide="ignore"):
        for i in range(K):
            if locked[i]:
                lat[:, i] = tilde[i]
            else:
                served = f[:, i] > 0
                lat[:, i] = np.where(served, floors[i] + needs[i] / f[:, i], tilde[i])
    objectives = lat.max(axis=1)
    best = int(np.argmin(objectives))
    best_obj = float(objectives[best])

    all_local = float(tilde.max())
    if all_local < best_obj:
        return {c.id: 0.0 for c in clients}, all_local
    allocation = {c.id: float(f[best, i]) for i, c in enumerate(clients)}
    return allocation, best_obj
