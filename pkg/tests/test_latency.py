"""Piecewise session latency, its breakdown, and analytic derivatives."""

import numpy as np
import pytest

from sflplan import (
    ClientSpec,
    DomainError,
    FittedCurves,
    d2T_dl2,
    dT_dfs,
    dT_dl,
    latency_fedavg,
    latency_piecewise,
    latency_split,
)
from sflplan.oracle import finite_difference, phase_sum_latency

from conftest import consistent_profile, random_client, random_curves

UNIT_CURVES = FittedCurves(alpha=1, beta=1, kappa=1, gamma1=1, gamma2=0)
UNIT_CLIENT = ClientSpec(id="u", f_local=1, rate=1, batch=1, epochs=1, dataset_size=1)


def test_split_hand_example():
    # 2*1*4/1 + 1*(2*(2/1 + 8/1) + 2*(1/2)/1) = 29 s
    bd = latency_split(UNIT_CLIENT, 2, 1.0, UNIT_CURVES, 10)
    assert bd.total_s == pytest.approx(29.0, rel=1e-12)
    assert bd.model_transfer_s == pytest.approx(8.0)
    assert bd.client_compute_s == pytest.approx(4.0)
    assert bd.server_compute_s == pytest.approx(16.0)
    assert bd.intermediate_transfer_s == pytest.approx(1.0)


def test_fedavg_hand_example():
    client = ClientSpec(id="f", f_local=1e9, rate=4e6, batch=1, epochs=1, dataset_size=1)
    bd = latency_fedavg(client, 8e6, 1e9)
    assert bd.total_s == pytest.approx(5.0, rel=1e-12)
    assert bd.server_compute_s == 0.0
    assert bd.intermediate_transfer_s == 0.0


def test_epochs_batch_scale_only_compute():
    base = ClientSpec(id="f", f_local=1e9, rate=4e6, batch=1, epochs=1, dataset_size=1)
    scaled = ClientSpec(id="f", f_local=1e9, rate=4e6, batch=32, epochs=20, dataset_size=1)
    a = latency_fedavg(base, 8e6, 1e9)
    b = latency_fedavg(scaled, 8e6, 1e9)
    assert b.model_transfer_s == a.model_transfer_s
    assert b.client_fp_s == pytest.approx(640 * a.client_fp_s, rel=1e-12)


def test_bundled_client_regression_value(bundled_profile_path):
    # frozen from one evaluation against the bundled profile
    from sflplan import load_profile

    prof = load_profile(bundled_profile_path)
    client = ClientSpec(id="c01", f_local=100e9, rate=4e6, batch=32, epochs=20,
                        dataset_size=3396)
    bd = latency_fedavg(client, prof.total_model_bits, prof.total_flops)
    assert bd.total_s == pytest.approx(941.6928807019701, rel=1e-12)


def test_doubling_rate_halves_transfer_terms():
    rng = np.random.default_rng(3)
    for i in range(20):
        curves = random_curves(rng)
        L = int(rng.integers(10, 60))
        c1 = random_client(rng, L, "a")
        c2 = ClientSpec(id="a", f_local=c1.f_local, rate=2 * c1.rate, batch=c1.batch,
                        epochs=c1.epochs, dataset_size=c1.dataset_size, l_min=c1.l_min)
        l = int(rng.integers(c1.l_min, L))
        f = float(10 ** rng.uniform(9, 12))
        b1, b2 = latency_split(c1, l, f, curves, L), latency_split(c2, l, f, curves, L)
        assert b2.model_transfer_s == pytest.approx(b1.model_transfer_s / 2, rel=1e-12)
        assert b2.smashed_up_s == pytest.approx(b1.smashed_up_s / 2, rel=1e-12)
        assert b2.grads_down_s == pytest.approx(b1.grads_down_s / 2, rel=1e-12)
        assert b2.client_compute_s == b1.client_compute_s
        assert b2.server_compute_s == b1.server_compute_s


def test_breakdown_components_sum_to_total():
    rng = np.random.default_rng(5)
    for _ in range(200):
        curves = random_curves(rng)
        L = int(rng.integers(10, 80))
        client = random_client(rng, L)
        l = float(rng.uniform(client.l_min, L - 1e-9))
        bd = latency_split(client, l, float(10 ** rng.uniform(9, 13)), curves, L)
        assert sum(bd.components()) == pytest.approx(bd.total_s, rel=1e-12)
        assert all(x >= 0 for x in bd.components())


def test_piecewise_matches_phase_sum_oracle():
    rng = np.random.default_rng(17)
    for _ in range(200):
        curves = random_curves(rng)
        L = int(rng.integers(10, 80))
        client = random_client(rng, L)
        profile = consistent_profile(curves, L)
        f = float(10 ** rng.uniform(9, 13))
        l = int(rng.integers(client.l_min, L + 1))
        ours = latency_piecewise(client, l, f, curves, profile)
        theirs = phase_sum_latency(client, l, f, curves, profile)
        assert ours == pytest.approx(theirs, rel=1e-12)


def test_piecewise_branch_definition():
    rng = np.random.default_rng(19)
    curves = random_curves(rng)
    L = 30
    client = random_client(rng, L)
    profile = consistent_profile(curves, L)
    at_L = latency_piecewise(client, L, 123.0, curves, profile)
    assert at_L == latency_fedavg(client, profile.total_model_bits, profile.total_flops).total_s
    l = client.l_min
    assert latency_piecewise(client, l, 1e10, curves, profile) == \
        latency_split(client, l, 1e10, curves, L).total_s


def test_compute_term_approaches_local_branch():
    # as l -> L with a huge server share, the compute part of the split
    # branch converges to the local branch's compute on a noise-free profile
    rng = np.random.default_rng(23)
    curves = random_curves(rng)
    L = 40
    client = random_client(rng, L)
    profile = consistent_profile(curves, L)
    local = latency_fedavg(client, profile.total_model_bits, profile.total_flops)
    split = latency_split(client, L - 1e-9, 1e30, curves, L)
    assert split.client_compute_s + split.server_compute_s == \
        pytest.approx(local.client_compute_s, rel=1e-6)
    assert split.model_transfer_s == pytest.approx(local.model_transfer_s, rel=1e-6)


def test_lmin_limit_is_client_forward_backward_term():
    # with a huge server share and link rate, only the device compute remains
    rng = np.random.default_rng(27)
    curves = random_curves(rng)
    L = 30
    client = ClientSpec(id="lim", f_local=1e10, rate=1e18, batch=8, epochs=3,
                        dataset_size=10, l_min=4)
    t = latency_split(client, client.l_min, 1e18, curves, L).total_s
    expected = client.session_samples * curves.beta * (1 + curves.kappa) \
        * client.l_min / client.f_local
    assert t == pytest.approx(expected, rel=1e-6)


def test_continuity_in_l():
    rng = np.random.default_rng(29)
    for _ in range(50):
        curves = random_curves(rng)
        L = int(rng.integers(10, 60))
        client = random_client(rng, L)
        f = float(10 ** rng.uniform(9, 12))
        l = float(rng.uniform(client.l_min, L - 1e-3))
        eps = 1e-7
        a = latency_split(client, l, f, curves, L).total_s
        b = latency_split(client, min(l + eps, L - 1e-12), f, curves, L).total_s
        assert abs(a - b) <= 1e-4 * max(1.0, abs(a))


def test_strictly_decreasing_in_server_share_and_rate():
    rng = np.random.default_rng(31)
    for _ in range(100):
        curves = random_curves(rng)
        L = int(rng.integers(10, 60))
        client = random_client(rng, L)
        l = int(rng.integers(client.l_min, L))
        f = float(10 ** rng.uniform(9, 12))
        t0 = latency_split(client, l, f, curves, L).total_s
        assert latency_split(client, l, 2 * f, curves, L).total_s < t0
        faster = ClientSpec(id="x", f_local=client.f_local, rate=2 * client.rate,
                            batch=client.batch, epochs=client.epochs,
                            dataset_size=client.dataset_size, l_min=client.l_min)
        assert latency_split(faster, l, f, curves, L).total_s < t0


def _dl_scale(client, l, f, curves, L):
    n = client.session_samples
    return (
        4 * curves.alpha * l / client.rate
        + n * curves.beta * (1 + curves.kappa) * (1 / client.f_local + 1 / f)
        + 2 * n * curves.gamma1 / (client.rate * (l + curves.gamma2) ** 2)
    )


def test_dl_derivatives_match_finite_differences():
    # tolerance = 1e-6 relative to the expression scale plus the central
    # difference's roundoff floor eps*|f|/h
    eps = np.finfo(float).eps
    rng = np.random.default_rng(37)
    for _ in range(300):
        curves = random_curves(rng)
        L = int(rng.integers(10, 80))
        client = random_client(rng, L)
        f = float(10 ** rng.uniform(9, 13))
        l = float(rng.uniform(client.l_min + 0.2, L - 0.2))
        h = 1e-5 * max(1.0, l)
        scale1 = _dl_scale(client, l, f, curves, L)

        level = latency_split(client, l, f, curves, L).total_s
        fd1 = finite_difference(lambda x: latency_split(client, x, f, curves, L).total_s, l, h)
        an1 = dT_dl(client, l, f, curves, L)
        assert abs(fd1 - an1) <= 1e-6 * scale1 + 8 * eps * level / h

        fd2 = finite_difference(lambda x: dT_dl(client, x, f, curves, L), l, h)
        an2 = d2T_dl2(client, l, f, curves, L)
        assert abs(fd2 - an2) <= 1e-6 * abs(an2) + 8 * eps * scale1 / h
        assert an2 > 0.0


def test_alpha_zero_second_derivative():
    curves = FittedCurves(alpha=0.0, beta=1e8, kappa=2.0, gamma1=1e6, gamma2=1.0)
    client = ClientSpec(id="z", f_local=1e10, rate=1e6, batch=4, epochs=2, dataset_size=10)
    n = client.session_samples
    l = 5.0
    expected = 4 * curves.gamma1 * n / (client.rate * (l + curves.gamma2) ** 3)
    assert d2T_dl2(client, l, 1e11, curves, 20) == pytest.approx(expected, rel=1e-12)


def test_server_share_derivative_matches_fd_and_is_negative():
    eps = np.finfo(float).eps
    rng = np.random.default_rng(41)
    for _ in range(200):
        curves = random_curves(rng)
        L = int(rng.integers(10, 80))
        client = random_client(rng, L)
        l = int(rng.integers(client.l_min, L))
        f = float(10 ** rng.uniform(9, 13))
        h = 1e-6 * f
        level = latency_split(client, l, f, curves, L).total_s
        fd = finite_difference(lambda x: latency_split(client, l, x, curves, L).total_s, f, h)
        an = dT_dfs(client, l, f, curves, L)
        assert an < 0.0
        assert abs(fd - an) <= 1e-6 * abs(an) + 8 * eps * level / h


def test_domain_errors():
    with pytest.raises(DomainError):
        latency_split(UNIT_CLIENT, 10, 1.0, UNIT_CURVES, 10)  # l = L not in split branch
    with pytest.raises(DomainError):
        latency_split(UNIT_CLIENT, 0.5, 1.0, UNIT_CURVES, 10)  # below l_min
    with pytest.raises(DomainError):
        latency_split(UNIT_CLIENT, 2, 0.0, UNIT_CURVES, 10)
    with pytest.raises(DomainError):
        dT_dl(UNIT_CLIENT, 2, -1.0, UNIT_CURVES, 10)
    with pytest.raises(DomainError):
        ClientSpec(id="bad", f_local=0.0, rate=1.0, batch=1, epochs=1, dataset_size=1)
