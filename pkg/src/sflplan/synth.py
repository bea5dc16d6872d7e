"""Generation of the bundled synthetic profile, timing data, and scenarios.

The shipped assets are reconstructions: the real per-layer measurements
behind the reference figures were never published, so a 59-layer profile is
synthesized from curve parameters chosen to land in the same latency regime
(hundreds of seconds per session at ~100 GFLOPs/s devices and ~4 Mb/s
links).  Everything is seeded and regenerable via `sflplan synth`.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .profile import ModelProfile, TimingPairs, save_profile, save_timing, synthesize_profile

# Curve parameters for the bundled 59-layer profile.  Chosen so the
# reference single-client setup (100 GFLOPs/s device, 1484 GFLOPs/s server
# share, 4 Mb/s link, 20x32 sample passes) has its best cut at layer 11,
# communication dominating below it and device compute above it, and a
# local-only session of ~950 s.
BUNDLED = {
    "alpha": 7.56e4,    # bits/layer^2  -> ~33 MB full model
    "beta": 5.42e8,     # FLOPs/layer   -> ~128 GFLOPs full fwd+bwd per sample
    "kappa": 3.0,       # backward ~3x forward
    "gamma1": 5.554e6,  # bits*layers   -> ~690 KB activations at layer 1
    "gamma2": 0.0,
    "layer_count": 59,
}
PROFILE_NOISE = 0.10
PROFILE_SEED = 59
TIMING_SEED = 60
CLIENTS_SEED = 66

PROFILE_FILE = "effnetv2_synthetic.json"
TIMING_FILE = "effnetv2_timing.json"
FIG6_FILE = "fig6_single_client.json"
FIG7_FILE = "fig7_ten_clients.json"


def bundled_profile(noise: float = PROFILE_NOISE, seed: int = PROFILE_SEED) -> ModelProfile:
    return synthesize_profile(
        alpha=BUNDLED["alpha"], beta=BUNDLED["beta"], kappa=BUNDLED["kappa"],
        gamma1=BUNDLED["gamma1"], gamma2=BUNDLED["gamma2"],
        layer_count=BUNDLED["layer_count"], noise=noise, seed=seed,
    )


def bundled_timing(samples: int = 1500, seed: int = TIMING_SEED) -> TimingPairs:
    """Forward/backward wall times with the bundled backward/forward ratio."""
    rng = np.random.default_rng(seed)
    fp = 0.04 * (1.0 + 0.2 * rng.uniform(-1.0, 1.0, size=samples))
    bp = BUNDLED["kappa"] * fp * (1.0 + 0.05 * rng.uniform(-1.0, 1.0, size=samples))
    return TimingPairs.from_list(zip(fp, bp))


def _inline_curves() -> dict:
    return {k: BUNDLED[k] for k in ("alpha", "beta", "kappa", "gamma1", "gamma2")}


def fig6_scenario(profile_rel: str) -> dict:
    """Single reference client; the whole budget lands on it when assisted."""
    return {
        "profile": profile_rel,
        "curves": _inline_curves(),
        "clients": [{
            "id": "c01", "f_local_gflops": 100.0, "rate_mbps": 4.0,
            "batch": 32, "epochs": 20, "dataset_size": 3396, "l_min": 1,
        }],
        "server": {"f_max_gflops": 1484.0},
        "options": {"max_iters": 20, "conv_tol": 1e-6},
        "sweep": {"parameter": "layer", "client": "c01"},
    }


def fig7_clients(count: int = 10, seed: int = CLIENTS_SEED) -> list[dict]:
    """Heterogeneous device pool: a weak minority that depends on the server
    plus a fast majority that trains locally.

    Roughly 40% of the devices get compute in the tens of GFLOPs/s, so even
    a small server budget assists all of them; the rest are an order of
    magnitude faster with better links and never need help.  That keeps the
    assisted group stable across a wide budget range, which is the regime
    where the latency-vs-budget curve is convex."""
    rng = np.random.default_rng(seed)
    weak = max(1, int(round(0.4 * count)))
    clients = []
    for i in range(count):
        if i < weak:
            f = float(np.exp(rng.uniform(np.log(8.0), np.log(25.0))))
            r = float(rng.uniform(4.0, 8.0))
        else:
            f = float(np.exp(rng.uniform(np.log(250.0), np.log(500.0))))
            r = float(rng.uniform(10.0, 14.0))
        n = int(rng.integers(361, 3579))
        clients.append({
            "id": f"c{i + 1:02d}",
            "f_local_gflops": round(f, 3),
            "rate_mbps": round(r, 3),
            "batch": 32,
            "epochs": 20,
            "dataset_size": n,
            "l_min": 1,
        })
    return clients


def fig7_scenario(profile_rel: str, count: int = 10, seed: int = CLIENTS_SEED) -> dict:
    values = [round(float(v), 1) for v in np.geomspace(100.0, 9000.0, 13)]
    return {
        "profile": profile_rel,
        "curves": _inline_curves(),
        "clients": fig7_clients(count, seed),
        "server": {"f_max_gflops": 3000.0},
        "options": {"max_iters": 20, "conv_tol": 1e-6},
        "sweep": {"parameter": "f_max", "values": values},
    }


def write_bundle(root: str | Path, seed: int | None = None, clients: int = 10) -> list[Path]:
    """Write profile, timing, and both scenarios under root/{profiles,scenarios}."""
    root = Path(root)
    profiles = root / "profiles"
    scenarios = root / "scenarios"
    profiles.mkdir(parents=True, exist_ok=True)
    scenarios.mkdir(parents=True, exist_ok=True)
    offset = 0 if seed is None else seed

    written = []
    profile_path = profiles / PROFILE_FILE
    save_profile(bundled_profile(seed=PROFILE_SEED + offset), profile_path)
    written.append(profile_path)

    timing_path = profiles / TIMING_FILE
    save_timing(bundled_timing(seed=TIMING_SEED + offset), timing_path)
    written.append(timing_path)

    rel = f"../profiles/{PROFILE_FILE}"
    for name, payload in (
        (FIG6_FILE, fig6_scenario(rel)),
        (FIG7_FILE, fig7_scenario(rel, count=clients, seed=CLIENTS_SEED + offset)),
    ):
        path = scenarios / name
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    return written
