"""Scenario files: clients, server budget, curves, and sweep definitions.

Scenario JSON uses operator-facing units (Mb/s, GFLOPs/s); everything is
converted exactly to core units (bits/s, FLOPs/s) at load time.  Paths
inside a scenario resolve relative to the scenario file itself.  Curves
come either inline or from fitting the referenced profile and timing files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .exceptions import ScenarioError
from .latency import ClientSpec
from .alloc import ServerSpec
from .optimizer import OptimizerOptions
from .profile import (
    FittedCurves,
    ModelProfile,
    fit_curves,
    load_profile,
    load_timing,
)

GFLOPS = 1e9
MBPS = 1e6

SWEEP_PARAMETERS = ("f_max", "layer")


@dataclass
class SweepSpec:
    parameter: str                     # "f_max" or "layer"
    values: list[float] | None = None  # f_max values in GFLOPs/s
    client: str | None = None          # designated client for layer mode


@dataclass
class Scenario:
    profile_path: Path
    timing_path: Path | None
    inline_curves: FittedCurves | None
    clients: list[ClientSpec]
    server: ServerSpec
    options: OptimizerOptions
    sweep: SweepSpec | None
    profile: ModelProfile

    def resolve_curves(self) -> FittedCurves:
        """Inline curves if given, otherwise fit from the timing file."""
        if self.inline_curves is not None:
            return self.inline_curves
        if self.timing_path is None:
            raise ScenarioError("scenario needs either inline 'curves' or a 'timing' file")
        return fit_curves(self.profile, load_timing(self.timing_path))


def _parse_client(entry: dict, layer_count: int) -> ClientSpec:
    try:
        client = ClientSpec(
            id=str(entry["id"]),
            f_local=float(entry["f_local_gflops"]) * GFLOPS,
            rate=float(entry["rate_mbps"]) * MBPS,
            batch=int(entry["batch"]),
            epochs=int(entry["epochs"]),
            dataset_size=int(entry["dataset_size"]),
            l_min=int(entry.get("l_min", 1)),
        )
    except KeyError as exc:
        raise ScenarioError(f"client entry missing key {exc}: {entry}") from exc
    if client.l_min > layer_count:
        raise ScenarioError(
            f"client {client.id}: l_min {client.l_min} exceeds model depth {layer_count}"
        )
    return client


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    base = path.parent

    if "profile" not in data:
        raise ScenarioError("scenario must reference a 'profile' file")
    profile_path = (base / data["profile"]).resolve()
    if not profile_path.exists():
        raise ScenarioError(f"profile file not found: {profile_path}")
    profile = load_profile(profile_path)

    timing_path = None
    if data.get("timing"):
        timing_path = (base / data["timing"]).resolve()
        if not timing_path.exists():
            raise ScenarioError(f"timing file not found: {timing_path}")

    inline = FittedCurves.from_dict(data["curves"]) if data.get("curves") else None
    if inline is None and timing_path is None:
        raise ScenarioError("scenario needs either inline 'curves' or a 'timing' file")

    raw_clients = data.get("clients", [])
    if not raw_clients:
        raise ScenarioError("scenario must define at least one client")
    clients = [_parse_client(entry, profile.layer_count) for entry in raw_clients]
    ids = [c.id for c in clients]
    if len(set(ids)) != len(ids):
        raise ScenarioError("client ids must be unique")

    server_cfg = data.get("server") or {}
    if "f_max_gflops" not in server_cfg:
        raise ScenarioError("scenario must set server.f_max_gflops")
    server = ServerSpec(f_max=float(server_cfg["f_max_gflops"]) * GFLOPS)

    opt_cfg = data.get("options") or {}
    options = OptimizerOptions(
        max_iters=int(opt_cfg.get("max_iters", 20)),
        conv_tol=float(opt_cfg.get("conv_tol", 1e-6)),
        strict_paper_mode=bool(opt_cfg.get("strict_paper_mode", False)),
    )

    sweep = None
    if data.get("sweep"):
        sweep_cfg = data["sweep"]
        parameter = sweep_cfg.get("parameter")
        if parameter not in SWEEP_PARAMETERS:
            raise ScenarioError(f"sweep.parameter must be one of {SWEEP_PARAMETERS}")
        values = None
        if parameter == "f_max":
            values = [float(v) for v in sweep_cfg.get("values", [])]
            if not values:
                raise ScenarioError("f_max sweep needs a non-empty 'values' list")
            if any(v <= 0 for v in values):
                raise ScenarioError("sweep values must be positive")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ScenarioError("sweep values must be strictly ascending")
        client_id = sweep_cfg.get("client")
        if client_id is not None and client_id not in ids:
            raise ScenarioError(f"sweep client {client_id!r} is not in the scenario")
        sweep = SweepSpec(parameter=parameter, values=values, client=client_id)

    return Scenario(
        profile_path=profile_path,
        timing_path=timing_path,
        inline_curves=inline,
        clients=clients,
        server=server,
        options=options,
        sweep=sweep,
        profile=profile,
    )
