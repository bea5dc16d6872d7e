"""Optimal cut-layer selection for a single client.

The split-branch latency is strictly convex in the cut-layer, so its
derivative is monotone and the selection reduces to a three-case rule:
derivative positive at l_min -> clamp low; negative at L -> clamp high;
otherwise locate the unique stationary point.  Clearing the derivative's
denominators turns the stationarity condition into a cubic

    (4a/r) * l * (l+g)^2 + C * (l+g)^2 - D = 0,
    C = n*b*(1+k)*(1/fC - 1/fS),   D = 2*g1*n/r,

solved in closed form (Cardano / trigonometric for the three-real-root
case) and polished with a safeguarded Newton step; a plain bisection on the
derivative backs the closed form up when it is ill-conditioned.
"""

from __future__ import annotations

import math

from .exceptions import DomainError
from .latency import ClientSpec, d2T_dl2, dT_dl, latency_piecewise
from .profile import FittedCurves, ModelProfile

_ROOT_TOL = 1e-12   # relative bracket width for derivative root solves
_COEF_EPS = 1e-14   # relative threshold below which a leading coefficient is zero


def _real_cubic_roots(a3: float, a2: float, a1: float, a0: float) -> list[float]:
    """All real roots of a3 x^3 + a2 x^2 + a1 x + a0, degenerate degrees included."""
    scale = max(abs(a3), abs(a2), abs(a1), abs(a0))
    if scale == 0.0:
        return []
    if abs(a3) <= _COEF_EPS * scale:
        if abs(a2) <= _COEF_EPS * scale:
            if abs(a1) <= _COEF_EPS * scale:
                return []
            return [-a0 / a1]
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0.0:
            return []
        sq = math.sqrt(disc)
        if a1 == 0.0:
            r = sq / (2.0 * a2)
            return [-r, r]
        # Citardauq pairing avoids cancellation in the smaller root.
        q = -0.5 * (a1 + math.copysign(sq, a1))
        roots = [q / a2]
        if q != 0.0:
            roots.append(a0 / q)
        return roots

    b, c, d = a2 / a3, a1 / a3, a0 / a3
    # depressed form t^3 + p t + q with x = t - b/3
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    disc = -4.0 * p**3 - 27.0 * q * q
    if disc > 0.0:
        # three distinct real roots
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        arg = min(1.0, max(-1.0, arg))
        theta = math.acos(arg) / 3.0
        return [m * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]
    half_q = -q / 2.0
    s = math.sqrt(max(q * q / 4.0 + p**3 / 27.0, 0.0))
    u = math.copysign(abs(half_q + s) ** (1.0 / 3.0), half_q + s)
    v = math.copysign(abs(half_q - s) ** (1.0 / 3.0), half_q - s)
    return [u + v + shift]


def _stationarity_cubic(
    client: ClientSpec, f_server: float, curves: FittedCurves, layer_count: int
) -> tuple[float, float, float, float]:
    n = client.session_samples
    a = 4.0 * curves.alpha / client.rate
    g = curves.gamma2
    cc = n * curves.beta * (1.0 + curves.kappa) * (1.0 / client.f_local - 1.0 / f_server)
    dd = 2.0 * curves.gamma1 * n / client.rate
    return (a, 2.0 * a * g + cc, a * g * g + 2.0 * cc * g, cc * g * g - dd)


def _bisect_derivative(
    client: ClientSpec, f_server: float, curves: FittedCurves, layer_count: int,
    lo: float, hi: float,
) -> float:
    """Bisection on dT/dl over [lo, hi]; assumes dT/dl(lo) <= 0 <= dT/dl(hi)."""
    for _ in range(200):
        if hi - lo <= _ROOT_TOL * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if dT_dl(client, mid, f_server, curves, layer_count) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_stationarity(
    client: ClientSpec,
    f_server: float,
    curves: FittedCurves,
    layer_count: int,
) -> float:
    """Unique real root of dT/dl = 0 in [l_min, L].

    Requires the interior-optimum case: dT/dl(l_min) <= 0 and dT/dl(L) >= 0.
    Callers must route the two clamped cases first.
    """
    lo, hi = float(client.l_min), float(layer_count)
    d_lo = dT_dl(client, lo, f_server, curves, layer_count)
    d_hi = dT_dl(client, hi, f_server, curves, layer_count)
    if d_lo > 0.0 or d_hi < 0.0:
        raise DomainError(
            f"case mismatch for client {client.id}: dT/dl is {d_lo:.3e} at l_min "
            f"and {d_hi:.3e} at L; no interior stationary point"
        )

    roots = [r for r in _real_cubic_roots(*_stationarity_cubic(client, f_server, curves, layer_count))
             if lo - 1e-6 <= r <= hi + 1e-6]
    if roots:
        # dT/dl is increasing on the physical domain, so at most one root has
        # the right sign change; with several numerical candidates keep the
        # one closest to satisfying the original equation.
        x = min(roots, key=lambda r: abs(dT_dl(client, min(max(r, lo), hi), f_server, curves, layer_count)))
        x = min(max(x, lo), hi)
    else:
        x = _bisect_derivative(client, f_server, curves, layer_count, lo, hi)

    # Safeguarded Newton polish: quadratic convergence, bisection step
    # whenever Newton would leave the current sign bracket.
    blo, bhi = lo, hi
    for _ in range(60):
        f = dT_dl(client, x, f_server, curves, layer_count)
        if f == 0.0:
            break
        if f < 0.0:
            blo = x
        else:
            bhi = x
        fp = d2T_dl2(client, x, f_server, curves, layer_count)
        step = f / fp if fp > 0.0 else 0.0
        x_new = x - step
        if not blo <= x_new <= bhi:
            x_new = 0.5 * (blo + bhi)
        if abs(x_new - x) <= _ROOT_TOL * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return x


def classify_case(
    client: ClientSpec, f_server: float, curves: FittedCurves, layer_count: int
) -> int:
    """Which rule applies: 1 clamp to l_min, 2 clamp to L, 3 interior root.

    Boundary equalities (derivative exactly zero at an endpoint) fall to
    case 3, matching the inclusive guards of the selection rule.
    """
    if dT_dl(client, float(client.l_min), f_server, curves, layer_count) > 0.0:
        return 1
    if dT_dl(client, float(layer_count), f_server, curves, layer_count) < 0.0:
        return 2
    return 3


def select_cut_layer(
    client: ClientSpec,
    f_server: float,
    curves: FittedCurves,
    profile: ModelProfile,
    strict_paper_mode: bool = False,
) -> int:
    """Best integer cut-layer in [l_min, L] for one client at a given share.

    Default mode rounds the interior optimum by evaluating both integer
    neighbours (tie to the lower layer) and always compares the l = L local
    branch, returning it only when strictly better.  Strict mode applies the
    literal clamp/floor rule with no neighbour or cross-branch comparison.
    """
    L = profile.layer_count
    if client.l_min > L:
        raise DomainError(f"client {client.id}: l_min {client.l_min} exceeds L={L}")
    if f_server <= 0:
        raise DomainError(f"f_server must be positive, got {f_server}")
    if client.l_min == L:
        return L

    case = classify_case(client, f_server, curves, L)
    if strict_paper_mode:
        if case == 1:
            return client.l_min
        if case == 2:
            return L
        root = solve_stationarity(client, f_server, curves, L)
        return int(min(max(math.floor(root), client.l_min), L))

    if case == 1:
        split_candidates = [client.l_min]
    elif case == 2:
        split_candidates = [L - 1]
    else:
        root = solve_stationarity(client, f_server, curves, L)
        lo = int(min(max(math.floor(root), client.l_min), L - 1))
        hi = int(min(lo + 1, L - 1))
        split_candidates = [lo] if hi == lo else [lo, hi]

    best_l = split_candidates[0]
    best_t = latency_piecewise(client, best_l, f_server, curves, profile)
    for cand in split_candidates[1:]:
        t = latency_piecewise(client, cand, f_server, curves, profile)
        if t < best_t:
            best_l, best_t = cand, t
    if latency_piecewise(client, L, f_server, curves, profile) < best_t:
        return L
    return best_l
