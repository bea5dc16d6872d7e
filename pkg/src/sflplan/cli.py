"""Command-line planner: fit curves, plan a round, replay it, run sweeps.

Exit codes are a stable contract: 0 success, 2 input error, 3 infeasible,
4 plan/scenario inconsistency.  Every report command writes delimited data
and, unless --no-figures is given, a PNG next to it.  All commands are
deterministic; --seed affects scenario synthesis (`synth`) only.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import report
from .alloc import ServerSpec, local_latency
from .exceptions import (
    InfeasibleAllocationError,
    InfeasibleTargetError,
    PlanMismatchError,
    PlannerError,
    ScenarioError,
    SimulationError,
)
from .latency import latency_fedavg, latency_split
from .optimizer import OptimizerOptions, Plan, objective, optimize
from .profile import fit_curves, load_profile, load_timing
from .scenario import GFLOPS, Scenario, load_scenario
from .sim import simulate_campaign, simulate_round, write_trace_csv, write_trace_summary_csv
from .synth import write_bundle

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_INCONSISTENT = 4


def _options_from_args(scenario: Scenario, args) -> OptimizerOptions:
    base = scenario.options
    return OptimizerOptions(
        max_iters=args.max_iters if args.max_iters is not None else base.max_iters,
        conv_tol=args.conv_tol if args.conv_tol is not None else base.conv_tol,
        strict_paper_mode=args.strict_paper_mode or base.strict_paper_mode,
    )


def cmd_fit(args) -> int:
    profile = load_profile(args.profile)
    timing = load_timing(args.timing)
    curves = fit_curves(profile, timing)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(curves.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"size:    alpha={curves.alpha:.6e} bits/layer^2  R2={curves.r2_size:.4f}")
    print(f"compute: beta={curves.beta:.6e} FLOPs/layer  kappa={curves.kappa:.4f}  "
          f"R2={curves.r2_flops:.4f}")
    print(f"smashed: gamma1={curves.gamma1:.6e} gamma2={curves.gamma2:.4f}  "
          f"R2={curves.r2_smashed:.4f}")
    if not args.no_figures:
        report.render_fit(profile, curves, out.with_suffix(".png"))
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    curves = scenario.resolve_curves()
    options = _options_from_args(scenario, args)
    plan = optimize(scenario.clients, curves, scenario.profile, scenario.server, options)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report.write_plan_json(plan, curves, outdir / "plan.json")
    baselines = {c.id: local_latency(c, scenario.profile) for c in scenario.clients}
    report.write_per_client_csv(
        plan, baselines, scenario.profile.layer_count, outdir / "per_client.csv"
    )
    if not args.no_figures:
        report.render_per_client(
            plan, baselines, scenario.profile.layer_count, outdir / "per_client.png"
        )
    served = sum(1 for f in plan.f_server.values() if f > 0)
    print(f"objective: {plan.objective:.6f} s  (theta={plan.theta}, "
          f"assisted={served}/{len(scenario.clients)}, iterations={len(plan.trace)})")
    return EXIT_OK


def _validate_plan(scenario: Scenario, plan: Plan) -> None:
    ids = {c.id for c in scenario.clients}
    plan_ids = set(plan.cut_layers)
    if ids != plan_ids or set(plan.f_server) != ids:
        raise PlanMismatchError(
            f"plan covers {sorted(plan_ids)} but scenario has {sorted(ids)}"
        )
    L = scenario.profile.layer_count
    budget = 0.0
    for c in scenario.clients:
        l = plan.cut_layers[c.id]
        f = plan.f_server[c.id]
        if not c.l_min <= l <= L:
            raise PlanMismatchError(f"client {c.id}: cut {l} outside [{c.l_min}, {L}]")
        if f < 0:
            raise PlanMismatchError(f"client {c.id}: negative allocation {f}")
        if l < L and f == 0:
            raise PlanMismatchError(f"client {c.id}: assisted cut {l} with zero allocation")
        budget += f
    if budget > scenario.server.f_max * (1.0 + 1e-6):
        raise PlanMismatchError(
            f"allocations sum to {budget:.6e} FLOPs/s, over budget {scenario.server.f_max:.6e}"
        )


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    plan, curves = report.load_plan_json(args.plan)
    _validate_plan(scenario, plan)
    trace = simulate_round(
        plan, scenario.clients, curves, scenario.profile, expand_epochs=args.expand_epochs
    )
    analytic = objective(plan, scenario.clients, curves, scenario.profile)
    drift = abs(trace.round_latency_s - analytic) / analytic
    print(f"simulated round latency: {trace.round_latency_s:.6f} s")
    print(f"analytic objective:      {analytic:.6f} s  (relative drift {drift:.3e})")
    if drift > 1e-9:
        raise PlanMismatchError(
            f"simulated latency {trace.round_latency_s!r} deviates from analytic {analytic!r}"
        )
    if args.rounds > 1:
        _, cumulative = simulate_campaign(
            plan, scenario.clients, curves, scenario.profile, args.rounds
        )
        print(f"{args.rounds} rounds: cumulative {cumulative:.6f} s")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, outdir / "trace.csv")
    write_trace_summary_csv(trace, outdir / "trace_summary.csv")
    if not args.no_figures:
        report.render_timeline(trace, outdir / "timeline.png")
    return EXIT_OK


def _layer_sweep_rows(scenario: Scenario, curves, client_id: str | None) -> list[dict]:
    # the designated client is evaluated at the full server budget; in the
    # bundled single-client scenario that is exactly its allocated share
    target = scenario.clients[0]
    if client_id is not None:
        matches = [c for c in scenario.clients if c.id == client_id]
        if not matches:
            raise ScenarioError(f"sweep client {client_id!r} not in scenario")
        target = matches[0]
    L = scenario.profile.layer_count
    rows = []
    for l in range(target.l_min, L + 1):
        if l == L:
            bd = latency_fedavg(target, scenario.profile.total_model_bits,
                                scenario.profile.total_flops)
        else:
            bd = latency_split(target, l, scenario.server.f_max, curves, L)
        rows.append({
            "cut_layer": l,
            "total_s": bd.total_s,
            "model_transfer_s": bd.model_transfer_s,
            "client_compute_s": bd.client_compute_s,
            "server_compute_s": bd.server_compute_s,
            "intermediate_transfer_s": bd.intermediate_transfer_s,
        })
    return rows


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    curves = scenario.resolve_curves()
    options = _options_from_args(scenario, args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    sweep = scenario.sweep
    layer_mode = args.layer_mode or (sweep is not None and sweep.parameter == "layer")
    if layer_mode:
        client_id = args.client or (sweep.client if sweep else None)
        rows = _layer_sweep_rows(scenario, curves, client_id)
        report.write_layer_sweep_csv(rows, outdir / "layer_sweep.csv")
        if not args.no_figures:
            report.render_layer_sweep(rows, outdir / "layer_sweep.png")
        best = min(rows, key=lambda r: r["total_s"])
        print(f"{len(rows)} cut-layers swept; best cut={best['cut_layer']} "
              f"at {best['total_s']:.3f} s")
        return EXIT_OK

    if sweep is None or sweep.parameter != "f_max" or not sweep.values:
        raise ScenarioError(
            "scenario has no f_max sweep block; add one or pass --layer-mode"
        )

    def solve(v_gflops: float) -> dict:
        plan = optimize(
            scenario.clients, curves, scenario.profile,
            ServerSpec(f_max=v_gflops * GFLOPS), options,
        )
        return {
            "f_max_gflops": v_gflops,
            "objective_s": plan.objective,
            "theta": plan.theta,
            "served_count": sum(1 for f in plan.f_server.values() if f > 0),
        }

    # Points are independent; rows keep the input order regardless of finish order.
    with ThreadPoolExecutor(max_workers=min(8, len(sweep.values))) as pool:
        rows = list(pool.map(solve, sweep.values))
    report.write_fmax_sweep_csv(rows, outdir / "sweep.csv")
    if not args.no_figures:
        report.render_fmax_sweep(rows, outdir / "sweep.png")
    print(f"{len(rows)} budgets swept; objective {rows[0]['objective_s']:.3f} s -> "
          f"{rows[-1]['objective_s']:.3f} s")
    return EXIT_OK


def cmd_synth(args) -> int:
    written = write_bundle(args.out, seed=args.seed, clients=args.clients)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sflplan",
        description="Plan split-training rounds: cut-layer selection plus "
                    "server compute allocation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the three cut-layer curves from a profile")
    p_fit.add_argument("profile", help="per-layer profile JSON")
    p_fit.add_argument("timing", help="forward/backward timing pairs JSON")
    p_fit.add_argument("-o", "--out", required=True, help="output curves JSON")
    p_fit.add_argument("--no-figures", action="store_true")
    p_fit.set_defaults(func=cmd_fit)

    def planning_flags(p):
        p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--conv-tol", type=float, default=None)
        p.add_argument("--strict-paper-mode", action="store_true",
                       help="literal floor-only rounding, no re-entry probe")
        p.add_argument("--no-figures", action="store_true")

    p_plan = sub.add_parser("plan", help="jointly select cut-layers and split the budget")
    p_plan.add_argument("scenario", help="scenario JSON")
    p_plan.add_argument("-o", "--out", required=True, help="output directory")
    planning_flags(p_plan)
    p_plan.set_defaults(func=cmd_plan)

    p_sim = sub.add_parser("simulate", help="replay one round under a saved plan")
    p_sim.add_argument("scenario", help="scenario JSON")
    p_sim.add_argument("plan", help="plan JSON produced by `plan`")
    p_sim.add_argument("-o", "--out", required=True, help="output directory")
    p_sim.add_argument("--rounds", type=int, default=1)
    p_sim.add_argument("--expand-epochs", action="store_true",
                       help="one trace block per epoch instead of per session")
    p_sim.add_argument("--no-figures", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="sweep the server budget or the cut-layer")
    p_sweep.add_argument("scenario", help="scenario JSON")
    p_sweep.add_argument("-o", "--out", required=True, help="output directory")
    p_sweep.add_argument("--layer-mode", action="store_true",
                         help="sweep cut-layers for one client instead of budgets")
    p_sweep.add_argument("--client", default=None, help="designated client for layer mode")
    planning_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_synth = sub.add_parser("synth", help="regenerate the bundled profile and scenarios")
    p_synth.add_argument("-o", "--out", required=True, help="repository root to write under")
    p_synth.add_argument("--seed", type=int, default=None,
                         help="offset for all generation seeds")
    p_synth.add_argument("--clients", type=int, default=10)
    p_synth.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON at byte offset {exc.pos}: {exc.msg}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleAllocationError, InfeasibleTargetError) as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PlanMismatchError, SimulationError) as exc:
        print(f"error: inconsistent: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (PlannerError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
