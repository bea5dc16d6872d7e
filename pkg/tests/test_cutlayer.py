"""Cut-layer selection: stationarity solve, case routing, integer rounding."""

from unittest import mock

import numpy as np
import pytest

import sflplan.cutlayer as cutlayer
from sflplan import (
    ClientSpec,
    DomainError,
    FittedCurves,
    dT_dl,
    latency_piecewise,
    select_cut_layer,
    solve_stationarity,
)
from sflplan.cutlayer import classify_case
from sflplan.oracle import exhaustive_cut_layer

from conftest import consistent_profile, random_client, random_curves


def _bisect_reference(client, f_server, curves, L):
    """Independent bisection on the latency derivative."""
    lo, hi = float(client.l_min), float(L)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if dT_dl(client, mid, f_server, curves, L) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _interior_instance(rng):
    """Random instance routed to the interior-root case."""
    while True:
        curves = random_curves(rng)
        L = int(rng.integers(10, 81))
        client = random_client(rng, L)
        f = float(10 ** rng.uniform(9, 13))
        if classify_case(client, f, curves, L) == 3:
            return client, f, curves, L


def test_hand_solvable_cubic():
    # 4l = 4/l^2  =>  l = 1
    curves = FittedCurves(alpha=1, beta=1, kappa=1, gamma1=2, gamma2=0)
    client = ClientSpec(id="h", f_local=1, rate=1, batch=1, epochs=1, dataset_size=1)
    root = solve_stationarity(client, 1.0, curves, 10)  # f_server = f_local kills the beta term
    assert root == pytest.approx(1.0, abs=1e-9)


def test_root_matches_bisection_reference():
    rng = np.random.default_rng(43)
    for _ in range(200):
        client, f, curves, L = _interior_instance(rng)
        ours = solve_stationarity(client, f, curves, L)
        ref = _bisect_reference(client, f, curves, L)
        assert abs(ours - ref) <= 1e-6


def test_root_residual_is_tiny():
    rng = np.random.default_rng(47)
    for _ in range(100):
        client, f, curves, L = _interior_instance(rng)
        root = solve_stationarity(client, f, curves, L)
        n = client.session_samples
        scale = (
            4 * curves.alpha * root / client.rate
            + n * curves.beta * (1 + curves.kappa) * (1 / client.f_local + 1 / f)
            + 2 * n * curves.gamma1 / (client.rate * (root + curves.gamma2) ** 2)
        )
        assert abs(dT_dl(client, root, f, curves, L)) <= 1e-6 * scale


def test_degenerate_cubic_alpha_zero():
    # leading coefficient vanishes; the quadratic branch must still agree
    rng = np.random.default_rng(53)
    for _ in range(50):
        curves = random_curves(rng)
        curves = FittedCurves(alpha=0.0, beta=curves.beta, kappa=curves.kappa,
                              gamma1=curves.gamma1, gamma2=curves.gamma2)
        L = int(rng.integers(10, 60))
        client = random_client(rng, L)
        f = float(10 ** rng.uniform(9, 13))
        if classify_case(client, f, curves, L) != 3:
            continue
        ours = solve_stationarity(client, f, curves, L)
        assert abs(ours - _bisect_reference(client, f, curves, L)) <= 1e-6


def test_case_mismatch_raises():
    curves = FittedCurves(alpha=1e9, beta=1, kappa=1, gamma1=1, gamma2=0)
    client = ClientSpec(id="m", f_local=1e9, rate=1.0, batch=1, epochs=1, dataset_size=1)
    with pytest.raises(DomainError):
        solve_stationarity(client, 1e12, curves, 10)  # derivative positive everywhere


def test_case1_huge_alpha_clamps_low():
    rng = np.random.default_rng(59)
    curves = FittedCurves(alpha=1e12, beta=1e6, kappa=1.0, gamma1=1e4, gamma2=1.0)
    L = 30
    client = random_client(rng, L)
    profile = consistent_profile(curves, L)
    assert classify_case(client, 1e12, curves, L) == 1
    assert select_cut_layer(client, 1e12, curves, profile) == client.l_min


def test_case2_slow_server_clamps_high():
    # server slower than the device and negligible transfer costs: keep it all local
    curves = FittedCurves(alpha=1e-6, beta=1e9, kappa=2.0, gamma1=1e-3, gamma2=0.0)
    client = ClientSpec(id="s", f_local=1e11, rate=1e7, batch=8, epochs=4, dataset_size=50)
    L = 30
    profile = consistent_profile(curves, L)
    assert classify_case(client, 1e10, curves, L) == 2
    assert select_cut_layer(client, 1e10, curves, profile) == L


def test_case_guards_are_exclusive():
    rng = np.random.default_rng(61)
    for _ in range(300):
        curves = random_curves(rng)
        L = int(rng.integers(10, 81))
        client = random_client(rng, L)
        f = float(10 ** rng.uniform(9, 13))
        case = classify_case(client, f, curves, L)
        d_lo = dT_dl(client, float(client.l_min), f, curves, L)
        d_hi = dT_dl(client, float(L), f, curves, L)
        if case == 1:
            assert d_lo > 0
        elif case == 2:
            assert d_hi < 0 and not d_lo > 0
        else:
            assert d_lo <= 0 and d_hi >= 0


def test_selection_matches_exhaustive_oracle():
    rng = np.random.default_rng(67)
    for _ in range(200):
        curves = random_curves(rng)
        L = int(rng.integers(10, 81))
        client = random_client(rng, L)
        profile = consistent_profile(curves, L)
        f = float(10 ** rng.uniform(9, 13))
        ours = select_cut_layer(client, f, curves, profile)
        best = exhaustive_cut_layer(client, f, curves, profile)
        assert client.l_min <= ours <= L  # privacy floor always respected
        t_ours = latency_piecewise(client, ours, f, curves, profile)
        t_best = latency_piecewise(client, best, f, curves, profile)
        assert t_ours <= t_best * (1 + 1e-9)


def test_singleton_domain():
    rng = np.random.default_rng(71)
    curves = random_curves(rng)
    L = 12
    client = ClientSpec(id="s", f_local=1e10, rate=1e6, batch=2, epochs=2,
                        dataset_size=10, l_min=L)
    profile = consistent_profile(curves, L)
    assert select_cut_layer(client, 1e11, curves, profile) == L
    assert exhaustive_cut_layer(client, 1e11, curves, profile) == L


def test_strict_mode_uses_floor_only():
    rng = np.random.default_rng(73)
    hits = 0
    for _ in range(300):
        client, f, curves, L = _interior_instance(rng)
        profile = consistent_profile(curves, L)
        root = solve_stationarity(client, f, curves, L)
        strict = select_cut_layer(client, f, curves, profile, strict_paper_mode=True)
        assert strict == int(min(max(np.floor(root), client.l_min), L))
        loose = select_cut_layer(client, f, curves, profile)
        if loose != strict:
            hits += 1
            # default mode only deviates when it strictly improves the latency
            assert latency_piecewise(client, loose, f, curves, profile) < \
                latency_piecewise(client, strict, f, curves, profile)
    assert hits > 0  # the modes do differ on some instances


def test_selection_cost_is_one_stationarity_solve_per_client():
    rng = np.random.default_rng(79)
    curves = random_curves(rng)
    L = 40
    profile = consistent_profile(curves, L)
    clients = [random_client(rng, L, f"c{i}") for i in range(25)]
    calls = 0
    original = cutlayer.solve_stationarity

    def counting(*args, **kwargs):
        nonlocal calls
        calls += 1
        return original(*args, **kwargs)

    with mock.patch.object(cutlayer, "solve_stationarity", side_effect=counting):
        for c in clients:
            select_cut_layer(c, 1e11, curves, profile)
    assert calls <= len(clients)
