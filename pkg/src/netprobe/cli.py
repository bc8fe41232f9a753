"""Command-line front end.

Subcommands: generate, simulate, design-excitation, infer {onehop,multihop,
multi}, estimate {ols,constrained}, experiment {fig1a,fig1b,fig1c}.  Tables
are written as CSV or JSON depending on the --out extension; graph and weight
matrices use the plain text matrix format; neighbor decisions are JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from netprobe import detect, estimate, harness, infer, topology
from netprobe.dynamics import ExcitationPlan, NoiseModel, simulate, write_trajectory_csv


def _write_table(table: harness.ResultTable, out: str | None) -> None:
    if out is None:
        print(table.pretty())
    elif out.endswith(".json"):
        table.write_json(out)
    elif out.endswith(".csv"):
        table.write_csv(out)
    else:
        raise SystemExit(f"--out must end in .csv or .json, got {out!r}")


def _noise_from_args(args) -> NoiseModel:
    return NoiseModel(args.sigma_theta, args.sigma_upsilon)


def _add_noise_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma-theta", type=float, default=1.0, help="process noise std")
    p.add_argument("--sigma-upsilon", type=float, default=1.0, help="measurement noise std")


def _load_network(path: str) -> topology.TopologyMatrix:
    tm = topology.load_weights(path)
    if tm.stability is topology.StabilityClass.UNSTABLE:
        raise SystemExit(f"weight matrix in {path} is spectrally unstable")
    return tm


def _cmd_generate(args) -> None:
    graph = topology.generate_random_digraph(args.n, args.p, args.seed)
    if args.adjacency_out:
        topology.save_adjacency(args.adjacency_out, graph)
    if args.weights_out:
        if args.rule == "laplacian":
            tm = topology.laplacian_weights(graph, args.gamma)
        else:
            tm = topology.metropolis_weights(graph)
        if args.alpha is not None:
            tm = topology.scale_to_asymptotic(tm, args.alpha)
        topology.save_weights(args.weights_out, tm)
    print(
        json.dumps(
            {
                "n": graph.n,
                "edges": graph.edge_count(),
                "max_in_degree": int(graph.in_degrees().max()),
            }
        )
    )


def _simulate_from_args(args, tm: topology.TopologyMatrix):
    rng = np.random.default_rng(args.seed)
    x0 = rng.uniform(args.init_low, args.init_high, tm.n)
    plan = None
    if args.excite_node is not None:
        time = args.excite_time if args.excite_time is not None else args.steps - 1
        plan = ExcitationPlan(args.excite_node, time, args.excite_magnitude)
    return simulate(tm, x0, args.steps, _noise_from_args(args), plan, seed=rng), plan


def _cmd_simulate(args) -> None:
    tm = _load_network(args.weights)
    traj, _ = _simulate_from_args(args, tm)
    write_trajectory_csv(args.out, traj)
    print(json.dumps({"steps": traj.horizon, "nodes": traj.n, "out": args.out}))


def _cmd_design(args) -> None:
    noise = NoiseModel(args.sigma_theta, args.sigma_upsilon)
    sigma = args.sigma if args.sigma is not None else detect.deviation_noise_bound(
        args.n, noise, row_stochastic=args.row_stochastic
    )
    design = detect.TestDesign.design(args.weight_floor, args.error_target, sigma)
    print(
        json.dumps(
            {
                "weight_floor": design.weight_floor,
                "error_budget": design.error_budget,
                "sigma_bound": design.sigma_bound,
                "excitation": design.excitation,
            }
        )
    )


def _decision_out(decision: infer.NeighborDecision, out: str | None) -> None:
    text = decision.to_json(indent=2)
    if out is None:
        print(text)
    else:
        with open(out, "w") as fh:
            fh.write(text + "\n")


def _cmd_infer(args) -> None:
    tm = _load_network(args.weights)
    noise = _noise_from_args(args)
    sigma = detect.deviation_noise_bound(tm.n, noise, row_stochastic=True)
    e = args.excite_magnitude
    if e is None:
        e = detect.critical_excitation(sigma, args.weight_floor, args.error_target)
    source = args.excite_node
    rng = np.random.default_rng(args.seed)

    if args.mode == "multi":
        plan = ExcitationPlan(source, args.burn_in, e, repetitions=args.rounds)
        trials = []
        for _ in range(plan.repetitions):
            x0 = rng.uniform(args.init_low, args.init_high, tm.n)
            traj = simulate(tm, x0, plan.time + 1, noise, plan, seed=rng)
            trials.append((traj.observations[plan.time], traj.observations[plan.time + 1]))
        decision = infer.infer_multi_excitation(trials, source, e, args.weight_floor, tm.stability)
    else:
        hops = 1 if args.mode == "onehop" else args.max_hop
        x0 = rng.uniform(args.init_low, args.init_high, tm.n)
        traj = simulate(
            tm, x0, args.burn_in + hops, noise,
            ExcitationPlan(source, args.burn_in, e), seed=rng,
        )
        if args.mode == "onehop":
            decision = infer.infer_one_hop(
                traj.observations[args.burn_in],
                traj.observations[args.burn_in + 1],
                source, e, args.weight_floor, tm.stability,
            )
        else:
            decision = infer.infer_within_hops(
                traj, source, e, args.max_hop, tm.stability,
                weight_floor=args.weight_floor,
            )
    _decision_out(decision, args.out)


def _cmd_estimate(args) -> None:
    tm = _load_network(args.weights)
    noise = _noise_from_args(args)
    rng = np.random.default_rng(args.seed)
    x0 = rng.uniform(args.init_low, args.init_high, tm.n)
    horizon = args.pairs
    constraints = {}
    if args.mode == "constrained":
        sigma = detect.deviation_noise_bound(tm.n, noise, row_stochastic=True)
        e = args.excite_magnitude
        if e is None:
            e = detect.critical_excitation(sigma, args.weight_floor, args.error_target)
        traj = simulate(
            tm, x0, horizon + 1, noise,
            ExcitationPlan(args.excite_node, horizon, e), seed=rng,
        )
        decision = infer.infer_one_hop(
            traj.observations[horizon], traj.observations[horizon + 1],
            args.excite_node, e, args.weight_floor, tm.stability,
        )
        constraints = estimate.constraints_from_decision(decision, tm.n)
        if args.constraints_out:
            estimate.save_constraints(args.constraints_out, constraints)
    else:
        traj = simulate(tm, x0, horizon, noise, seed=rng)
    pairs = tuple(
        (traj.observations[t], traj.observations[t + 1]) for t in range(horizon)
    )
    problem = estimate.LsProblem(pairs, constraints)
    sol = (
        estimate.constrained_estimate(problem)
        if args.mode == "constrained"
        else estimate.ols_estimate(problem)
    )
    if args.out:
        topology.save_matrix(args.out, sol.matrix)
    metrics = estimate.error_metrics(sol.matrix, tm.matrix)
    print(
        json.dumps(
            {
                "mode": args.mode,
                "rank": sol.rank,
                "rank_deficient": sol.rank_deficient,
                "structure_error": metrics.structure_error,
                "magnitude_error": metrics.magnitude_error,
            }
        )
    )


def _cmd_experiment(args) -> None:
    if args.config:
        config = harness.load_config(args.config)
    else:
        config = harness.default_config(args.figure)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trial_count"] = args.trials
    if overrides:
        config = replace(config, **overrides)
    table = harness.run_experiment(args.figure, config)
    _write_table(table, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netprobe",
        description="Excitation-based topology inference for noisy networked dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="random digraph and weight matrix files")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--p", type=float, default=0.2, help="edge probability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rule", choices=("laplacian", "metropolis"), default="laplacian")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=None, help="rescale into the stable regime")
    p.add_argument("--adjacency-out", default=None)
    p.add_argument("--weights-out", default=None)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("simulate", help="simulate a trajectory to CSV")
    p.add_argument("--weights", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-low", type=float, default=-100.0)
    p.add_argument("--init-high", type=float, default=100.0)
    p.add_argument("--excite-node", type=int, default=None)
    p.add_argument("--excite-time", type=int, default=None)
    p.add_argument("--excite-magnitude", type=float, default=0.0)
    _add_noise_args(p)
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("design-excitation", help="critical excitation for a target error")
    p.add_argument("--weight-floor", type=float, required=True)
    p.add_argument("--error-target", type=float, required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--sigma", type=float, default=None, help="explicit noise std bound")
    p.add_argument("--row-stochastic", action="store_true")
    _add_noise_args(p)
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("infer", help="simulate and decide neighbor sets")
    p.add_argument("mode", choices=("onehop", "multihop", "multi"))
    p.add_argument("--weights", required=True)
    p.add_argument("--excite-node", type=int, required=True)
    p.add_argument("--excite-magnitude", type=float, default=None)
    p.add_argument("--weight-floor", type=float, default=0.4)
    p.add_argument("--error-target", type=float, default=0.05)
    p.add_argument("--max-hop", type=int, default=3)
    p.add_argument("--rounds", type=int, default=4, help="excitation count for multi")
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--init-low", type=float, default=-100.0)
    p.add_argument("--init-high", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    _add_noise_args(p)
    p.add_argument("--out", default=None, help="decision JSON path (default stdout)")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("estimate", help="least-squares topology estimation")
    p.add_argument("mode", choices=("ols", "constrained"))
    p.add_argument("--weights", required=True)
    p.add_argument("--pairs", type=int, default=25, help="observation pair count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-low", type=float, default=-100.0)
    p.add_argument("--init-high", type=float, default=100.0)
    p.add_argument("--excite-node", type=int, default=0)
    p.add_argument("--excite-magnitude", type=float, default=None)
    p.add_argument("--weight-floor", type=float, default=0.4)
    p.add_argument("--error-target", type=float, default=0.05)
    p.add_argument("--constraints-out", default=None)
    _add_noise_args(p)
    p.add_argument("--out", default=None, help="estimated matrix text path")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("experiment", help="run a shipped experiment")
    p.add_argument("figure", choices=("fig1a", "fig1b", "fig1c"))
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default=None, help=".csv or .json result path (default stdout)")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
