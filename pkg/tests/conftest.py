"""Shared fixtures and seeded instance generators."""

from pathlib import Path

import numpy as np
import pytest

from sflplan import ClientSpec, FittedCurves, ModelProfile, synthesize_profile

REPO_ROOT = Path(__file__).resolve().parents[1]
PROFILES_DIR = REPO_ROOT / "profiles"
SCENARIOS_DIR = REPO_ROOT / "scenarios"

BUNDLED_PROFILE = PROFILES_DIR / "effnetv2_synthetic.json"
BUNDLED_TIMING = PROFILES_DIR / "effnetv2_timing.json"
FIG6_SCENARIO = SCENARIOS_DIR / "fig6_single_client.json"
FIG7_SCENARIO = SCENARIOS_DIR / "fig7_ten_clients.json"


def random_curves(rng: np.random.Generator) -> FittedCurves:
    """Curve parameters log-uniform over four decades each."""
    return FittedCurves(
        alpha=float(10 ** rng.uniform(1.5, 5.5)),
        beta=float(10 ** rng.uniform(6.0, 10.0)),
        kappa=float(rng.uniform(1.0, 5.0)),
        gamma1=float(10 ** rng.uniform(4.0, 8.0)),
        gamma2=float(rng.uniform(0.0, 10.0)),
    )


def random_client(rng: np.random.Generator, layer_count: int, cid: str = "c") -> ClientSpec:
    return ClientSpec(
        id=cid,
        f_local=float(10 ** rng.uniform(9.0, 12.0)),
        rate=float(10 ** rng.uniform(5.5, 7.5)),
        batch=int(rng.integers(1, 65)),
        epochs=int(rng.integers(1, 21)),
        dataset_size=int(rng.integers(100, 4001)),
        l_min=int(rng.integers(1, min(5, layer_count) + 1)),
    )


def consistent_profile(curves: FittedCurves, layer_count: int) -> ModelProfile:
    """Noise-free profile whose arrays follow the curves exactly."""
    return synthesize_profile(
        curves.alpha, curves.beta, curves.kappa, curves.gamma1, curves.gamma2,
        layer_count, noise=0.0, seed=0,
    )


@pytest.fixture(scope="session")
def bundled_profile_path() -> Path:
    assert BUNDLED_PROFILE.exists(), "bundled profile missing; run `sflplan synth -o .`"
    return BUNDLED_PROFILE


@pytest.fixture(scope="session")
def bundled_timing_path() -> Path:
    assert BUNDLED_TIMING.exists()
    return BUNDLED_TIMING


@pytest.fixture(scope="session")
def fig6_path() -> Path:
    assert FIG6_SCENARIO.exists()
    return FIG6_SCENARIO


@pytest.fixture(scope="session")
def fig7_path() -> Path:
    assert FIG7_SCENARIO.exists()
    return FIG7_SCENARIO
