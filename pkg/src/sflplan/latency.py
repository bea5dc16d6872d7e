"""Per-client local-training-session latency and its analytic derivatives.

One session = I epochs, each processing one mini-batch of |B| samples, so
every per-sample stage cost is scaled by I*|B|.  The session latency is
piecewise in the cut-layer l:

    l < L (split):   2*alpha*l^2/r
                     + I|B| * ( beta*(1+kappa)*(l/fC + (L-l)/fS)
                                + 2*(gamma1/(l+gamma2))/r )
    l = L (local):   2*|w|/r + I|B|*Gamma/fC

The l = L branch uses the profile's measured totals, not the fitted curves;
the two branches are defined independently and need not join continuously.
All quantities are in bits, bits/s, FLOPs, FLOPs/s, and seconds.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import DomainError
from .profile import FittedCurves, ModelProfile


@dataclass(frozen=True)
class ClientSpec:
    """One participating client.

    l_min is the lowest cut-layer the client accepts; raising it keeps more
    of the model on-device, which is a privacy choice, not a speed one.
    """

    id: str
    f_local: float      # FLOPs/s
    rate: float         # bits/s
    batch: int          # samples per mini-batch
    epochs: int         # local epochs per session
    dataset_size: int   # samples owned (used only for aggregation weights)
    l_min: int = 1

    def __post_init__(self):
        if self.f_local <= 0 or self.rate <= 0:
            raise DomainError(f"client {self.id}: f_local and rate must be positive")
        if self.batch < 1 or self.epochs < 1 or self.dataset_size < 1:
            raise DomainError(f"client {self.id}: batch, epochs, dataset_size must be >= 1")
        if self.l_min < 1:
            raise DomainError(f"client {self.id}: l_min must be >= 1")

    @property
    def session_samples(self) -> int:
        """Sample passes per session: I * |B|."""
        return self.epochs * self.batch


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-phase seconds for one session; total_s is the component sum."""

    model_transfer_s: float   # fragment download + upload (both directions)
    client_fp_s: float
    smashed_up_s: float
    server_fp_s: float
    server_bp_s: float
    grads_down_s: float
    client_bp_s: float
    total_s: float

    @property
    def client_compute_s(self) -> float:
        return self.client_fp_s + self.client_bp_s

    @property
    def server_compute_s(self) -> float:
        return self.server_fp_s + self.server_bp_s

    @property
    def intermediate_transfer_s(self) -> float:
        return self.smashed_up_s + self.grads_down_s

    def components(self) -> tuple[float, ...]:
        return (
            self.model_transfer_s, self.client_fp_s, self.smashed_up_s,
            self.server_fp_s, self.server_bp_s, self.grads_down_s, self.client_bp_s,
        )


def _breakdown(**kwargs) -> LatencyBreakdown:
    total = sum(kwargs.values())
    return LatencyBreakdown(total_s=total, **kwargs)


def latency_split(
    client: ClientSpec,
    l: float,
    f_server: float,
    curves: FittedCurves,
    layer_count: int,
) -> LatencyBreakdown:
    """Session latency when layers 1..l stay on the client, rest on the server.

    Valid for real-valued l in [l_min, L); f_server must be positive.
    """
    if not client.l_min <= l < layer_count:
        raise DomainError(
            f"cut-layer {l} outside [{client.l_min}, {layer_count}) for client {client.id}"
        )
    if f_server <= 0:
        raise DomainError(f"f_server must be positive, got {f_server}")
    n = client.session_samples
    lam = curves.gamma1 / (l + curves.gamma2)
    return _breakdown(
        model_transfer_s=2.0 * curves.alpha * l * l / client.rate,
        client_fp_s=n * curves.beta * l / client.f_local,
        client_bp_s=n * curves.kappa * curves.beta * l / client.f_local,
        smashed_up_s=n * lam / client.rate,
        grads_down_s=n * lam / client.rate,
        server_fp_s=n * curves.beta * (layer_count - l) / f_server,
        server_bp_s=n * curves.kappa * curves.beta * (layer_count - l) / f_server,
    )


def latency_fedavg(
    client: ClientSpec,
    total_model_bits: float,
    total_flops: float,
) -> LatencyBreakdown:
    """Session latency when the client trains the whole model locally.

    The entire compute cost lands in client_fp_s: the local branch has no
    forward/backward split of its own.
    """
    return _breakdown(
        model_transfer_s=2.0 * total_model_bits / client.rate,
        client_fp_s=client.session_samples * total_flops / client.f_local,
        client_bp_s=0.0,
        smashed_up_s=0.0,
        grads_down_s=0.0,
        server_fp_s=0.0,
        server_bp_s=0.0,
    )


def latency_piecewise(
    client: ClientSpec,
    l: int,
    f_server: float,
    curves: FittedCurves,
    profile: ModelProfile,
) -> float:
    """Total session seconds at integer cut-layer l; the single authority
    used by every other module."""
    L = profile.layer_count
    if not client.l_min <= l <= L:
        raise DomainError(f"cut-layer {l} outside [{client.l_min}, {L}] for client {client.id}")
    if l == L:
        return latency_fedavg(client, profile.total_model_bits, profile.total_flops).total_s
    return latency_split(client, l, f_server, curves, L).total_s


def _check_interior(client: ClientSpec, l: float, layer_count: int) -> None:
    if not client.l_min <= l <= layer_count:
        raise DomainError(f"cut-layer {l} outside [{client.l_min}, {layer_count}]")


def dT_dl(
    client: ClientSpec,
    l: float,
    f_server: float,
    curves: FittedCurves,
    layer_count: int,
) -> float:
    """First derivative of the split-branch latency w.r.t. the cut-layer."""
    _check_interior(client, l, layer_count)
    if f_server <= 0:
        raise DomainError(f"f_server must be positive, got {f_server}")
    n = client.session_samples
    return (
        4.0 * curves.alpha * l / client.rate
        + n * (
            curves.beta * (1.0 + curves.kappa) * (1.0 / client.f_local - 1.0 / f_server)
            - 2.0 * curves.gamma1 / (client.rate * (l + curves.gamma2) ** 2)
        )
    )


def d2T_dl2(
    client: ClientSpec,
    l: float,
    f_server: float,
    curves: FittedCurves,
    layer_count: int,
) -> float:
    """Second derivative w.r.t. the cut-layer; strictly positive whenever
    alpha >= 0 and gamma1 > 0, which makes the split branch strictly convex."""
    _check_interior(client, l, layer_count)
    n = client.session_samples
    return (
        4.0 * curves.alpha / client.rate
        + 4.0 * curves.gamma1 * n / (client.rate * (l + curves.gamma2) ** 3)
    )


def dT_dfs(
    client: ClientSpec,
    l: float,
    f_server: float,
    curves: FittedCurves,
    layer_count: int,
) -> float:
    """Derivative of the split-branch latency w.r.t. the server share;
    always negative: more server compute never slows a session."""
    _check_interior(client, l, layer_count)
    if f_server <= 0:
        raise DomainError(f"f_server must be positive, got {f_server}")
    n = client.session_samples
    need = n * curves.beta * (1.0 + curves.kappa) * (layer_count - l)
    return -need / (f_server * f_server)
