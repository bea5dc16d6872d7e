"""sflplan: round-latency planning for split federated training.

Selects per-client model cut-layers and splits a server's compute budget so
that one synchronized round of collaborative training finishes as early as
possible, given fitted per-layer cost curves for the model being trained.
"""

from .alloc import (
    AllocationResult,
    ServerSpec,
    allocate,
    closed_form_f_server,
    local_latency,
    solve_t_theta,
    sort_by_local_latency,
)
from .cutlayer import select_cut_layer, solve_stationarity
from .exceptions import (
    CurveFitError,
    DomainError,
    InfeasibleAllocationError,
    InfeasibleTargetError,
    InvalidProfileError,
    PlanMismatchError,
    PlannerError,
    ScenarioError,
    SimulationError,
    UndefinedCoefficientError,
)
from .latency import (
    ClientSpec,
    LatencyBreakdown,
    d2T_dl2,
    dT_dfs,
    dT_dl,
    latency_fedavg,
    latency_piecewise,
    latency_split,
)
from .optimizer import OptimizerOptions, Plan, objective, optimize
from .profile import (
    FittedCurves,
    ModelProfile,
    TimingPairs,
    determination_coefficient,
    fit_curves,
    load_profile,
    load_timing,
    save_profile,
    save_timing,
    synthesize_profile,
)
from .scenario import Scenario, load_scenario
from .sim import RoundTrace, TraceEvent, simulate_campaign, simulate_round

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "ClientSpec",
    "CurveFitError",
    "DomainError",
    "FittedCurves",
    "InfeasibleAllocationError",
    "InfeasibleTargetError",
    "InvalidProfileError",
    "LatencyBreakdown",
    "ModelProfile",
    "OptimizerOptions",
    "Plan",
    "PlanMismatchError",
    "PlannerError",
    "RoundTrace",
    "Scenario",
    "ScenarioError",
    "ServerSpec",
    "SimulationError",
    "TimingPairs",
    "TraceEvent",
    "UndefinedCoefficientError",
    "allocate",
    "closed_form_f_server",
    "d2T_dl2",
    "dT_dfs",
    "dT_dl",
    "determination_coefficient",
    "fit_curves",
    "latency_fedavg",
    "latency_piecewise",
    "latency_split",
    "load_profile",
    "load_scenario",
    "load_timing",
    "local_latency",
    "objective",
    "optimize",
    "save_profile",
    "save_timing",
    "select_cut_layer",
    "simulate_campaign",
    "simulate_round",
    "solve_stationarity",
    "solve_t_theta",
    "sort_by_local_latency",
    "synthesize_profile",
]
