"""Command-line front end: plan, simulate, sweep, bench, emulate, worker.

One executable, six verbs.  plan/simulate/sweep are pure computation and
deterministic for fixed inputs; bench/emulate spawn local worker processes
and measure wall clocks; worker runs one rank by hand for multi-terminal
or multi-machine setups.  Exit status is 0 on success, 1 for bad input, 2
for runtime or network failure, so shell scripts can tell the cases apart.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .allreduce_net import ProtocolError, bench_local, emulate_local, open_ring, bench_allreduce, run_emulation
from .comm_model import (
    Collective,
    CollectiveParams,
    CommModel,
    derive_ab,
    fit_ab,
    load_measurements,
    save_measurements,
)
from .merge_planner import MergePlan, find_merge_plan, load_plan, save_plan
from .model_profile import ModelProfile, googlenet_like, load_profile, resnet50_like, synth_profile
from .schedule_sim import (
    Strategy,
    crossing_node_count,
    simulate_mgwfbp,
    simulate_naive,
    simulate_sync_easgd,
    simulate_wfbp,
    speedup,
    sweep,
)

_SIMULATORS = {
    Strategy.NAIVE: simulate_naive,
    Strategy.WFBP: simulate_wfbp,
    Strategy.SYNC_EASGD: simulate_sync_easgd,
}


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors; 2 is reserved for runtime."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _resolve_profile(spec: str, seed: int) -> ModelProfile:
    if spec == "resnet50-like":
        return resnet50_like()
    if spec == "googlenet-like":
        return googlenet_like()
    if spec.startswith("synth:"):
        return synth_profile(int(spec.split(":", 1)[1]), seed=seed)
    return load_profile(spec)


def _comm_source_count(args) -> int:
    explicit = args.comm_a is not None or args.comm_b is not None
    table = any(v is not None for v in (args.collective, args.alpha, args.beta, args.gamma))
    return sum((explicit, table, args.bench_csv is not None))


def _collective_params(args, n_nodes: int) -> CollectiveParams:
    missing = [
        name
        for name, v in (("--collective", args.collective), ("--alpha", args.alpha),
                        ("--beta", args.beta), ("--gamma", args.gamma))
        if v is None
    ]
    if missing:
        raise ValueError(f"collective model needs {', '.join(missing)}")
    return CollectiveParams(
        algorithm=Collective(args.collective),
        n_nodes=n_nodes,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
    )


def _resolve_model(args, *, n_nodes: int | None = None) -> CommModel:
    """Build the (a, b) cost model from exactly one configured source."""
    if _comm_source_count(args) != 1:
        raise ValueError(
            "choose exactly one model source: --comm-a/--comm-b, "
            "--collective with --alpha/--beta/--gamma, or --bench-csv"
        )
    if args.comm_a is not None or args.comm_b is not None:
        if args.comm_a is None or args.comm_b is None:
            raise ValueError("--comm-a and --comm-b go together")
        return CommModel(a=args.comm_a, b=args.comm_b)
    if args.bench_csv is not None:
        return fit_ab(load_measurements(args.bench_csv))
    n = n_nodes if n_nodes is not None else getattr(args, "nodes", None)
    if n is None:
        raise ValueError("the collective model needs --nodes to derive (a, b)")
    return derive_ab(_collective_params(args, n))


def _format_groups(plan: MergePlan) -> str:
    parts = []
    for low, high in reversed(plan.groups()):
        parts.append(f"[{high}]" if high == low else f"[{high}..{low}]")
    return "".join(parts)


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"{what} must be a comma-separated list of integers, got {text!r}")
    if not values:
        raise ValueError(f"{what} is empty")
    return values


def _parse_strategies(text: str) -> list[Strategy]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(Strategy(tok))
        except ValueError:
            valid = ",".join(s.value for s in Strategy)
            raise ValueError(f"unknown strategy {tok!r} (valid: {valid})")
    if not out:
        raise ValueError("no strategies given")
    return out


def cmd_plan(args) -> int:
    profile = _resolve_profile(args.profile, args.seed)
    model = _resolve_model(args)
    plan = find_merge_plan(profile, model)
    if args.out:
        save_plan(plan, args.out)
    w = simulate_wfbp(profile, model)
    s = simulate_sync_easgd(profile, model)
    m = simulate_mgwfbp(profile, model, plan)
    print(f"profile: {profile.name} ({profile.num_layers} layers, {profile.total_params} params)")
    print(f"model: a={model.a:.9g} s, b={model.b:.9g} s/byte")
    print(f"merged layers: {sorted(plan.merged_layers)}")
    print(f"groups: {_format_groups(plan)}")
    print(f"{'strategy':<12}{'t_iter_s':>16}{'t_c_no_s':>16}")
    for name, tl in (("wfbp", w), ("synceasgd", s), ("mgwfbp", m)):
        print(f"{name:<12}{tl.t_iter:>16.9g}{tl.t_c_no:>16.9g}")
    if args.out:
        print(f"plan written to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    profile = _resolve_profile(args.profile, args.seed)
    model = _resolve_model(args)
    strategy = Strategy(args.strategy)
    if strategy is Strategy.MGWFBP:
        if args.plan:
            plan = load_plan(args.plan, profile.num_layers)
        else:
            plan = find_merge_plan(profile, model)
        timeline = simulate_mgwfbp(profile, model, plan)
        print(f"plan: {_format_groups(plan)}")
    else:
        timeline = _SIMULATORS[strategy](profile, model)
    print(f"strategy: {strategy.value}")
    print(f"t_iter_s: {timeline.t_iter:.9g}")
    print(f"compute_s: {timeline.compute_time:.9g}")
    print(f"t_c_no_s: {timeline.t_c_no:.9g}")
    print(f"case: {timeline.case.value}")
    if args.nodes:
        print(f"speedup@{args.nodes}: {speedup(args.nodes, profile, timeline):.6g}")
    if args.events_csv:
        with open(args.events_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["layer", "kind", "start_s", "end_s"])
            for layer, kind, start, end in timeline.events(profile):
                writer.writerow([layer, kind, repr(start), repr(end)])
        print(f"events written to {args.events_csv}")
    return 0


def cmd_sweep(args) -> int:
    profile = _resolve_profile(args.profile, args.seed)
    if args.comm_a is not None or args.comm_b is not None or args.bench_csv is not None:
        raise ValueError("sweep derives (a, b) per node count; give --collective with --alpha/--beta/--gamma")
    n_list = _parse_int_list(args.nodes, "--nodes")
    params = _collective_params(args, n_list[0] if n_list[0] >= 2 else 2)
    strategies = _parse_strategies(args.strategies)
    result = sweep(profile, params, n_list, strategies, freeze_plan=args.freeze_plan)
    dest = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(dest)
        writer.writerow(["n_nodes", "strategy", "t_iter_s", "speedup", "t_c_no_s"])
        for row in result.rows:
            writer.writerow([row.n_nodes, row.strategy.value, repr(row.t_iter), repr(row.speedup), repr(row.t_c_no)])
    finally:
        if args.out:
            dest.close()
    report = sys.stdout if args.out else sys.stderr
    crossing = crossing_node_count(result)
    if crossing is None:
        print("no crossing: the per-layer and single-message orderings never flip", file=report)
    else:
        print(f"crossing: single-message first beats per-layer at {crossing} nodes", file=report)
    if args.out:
        print(f"sweep written to {args.out}")
    return 0


def cmd_bench(args) -> int:
    sizes = _parse_int_list(args.sizes, "--sizes")
    measurements = bench_local(
        args.nodes,
        sizes,
        repeats=args.repeats,
        warmups=args.warmups,
        base_port=args.base_port,
        timeout=args.timeout,
    )
    if args.out:
        save_measurements(measurements, args.out)
        print(f"measurements written to {args.out}")
    else:
        save_measurements(measurements, sys.stdout)
    model = fit_ab(measurements)
    print(f"fitted: a={model.a:.9g} s, b={model.b:.9g} s/byte", file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_emulate(args) -> int:
    profile = _resolve_profile(args.profile, args.seed)
    model = None
    n_sources = _comm_source_count(args)
    if n_sources > 1:
        raise ValueError("give at most one model source to emulate")
    if n_sources == 1:
        model = _resolve_model(args)
    if args.plan:
        plan = load_plan(args.plan, profile.num_layers)
    elif model is not None:
        plan = find_merge_plan(profile, model)
    else:
        plan = MergePlan(frozenset(), profile.num_layers)
    print(f"plan: {_format_groups(plan)}")
    reports = emulate_local(
        args.nodes,
        profile,
        plan,
        args.iterations,
        warmup=args.warmup,
        base_port=args.base_port,
        timeout=args.timeout,
    )
    all_verified = all(r.verified for r in reports.values())
    for rank in sorted(reports):
        r = reports[rank]
        print(
            f"rank {rank}: mean {r.mean_seconds:.6f} s, stddev {r.stddev_seconds:.6f} s, "
            f"{r.allreduce_count} all-reduces, verified={r.verified}"
        )
    if model is not None:
        predicted = simulate_mgwfbp(profile, model, plan).t_iter
        measured = max(r.mean_seconds for r in reports.values())
        print(f"predicted t_iter: {predicted:.6f} s, measured mean: {measured:.6f} s")
    if args.out:
        doc = {
            str(rank): {
                "mean_seconds": r.mean_seconds,
                "stddev_seconds": r.stddev_seconds,
                "iteration_seconds": list(r.iteration_seconds),
                "group_comm_seconds": {str(k): v for k, v in r.group_comm_seconds.items()},
                "verified": r.verified,
                "allreduce_count": r.allreduce_count,
            }
            for rank, r in reports.items()
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"report written to {args.out}")
    if not all_verified:
        print("verification FAILED: reduced values did not match expected sums", file=sys.stderr)
        return 2
    return 0


def cmd_worker(args) -> int:
    """Join a rendezvous as one rank; for launching workers by hand."""
    # parse everything local first so input mistakes fail fast with exit 1,
    # before any port is bound or a peer starts waiting on us
    if args.role == "bench":
        sizes = _parse_int_list(args.sizes, "--sizes")
    else:
        if not args.profile:
            raise ValueError("the emulate role needs --profile")
        profile = _resolve_profile(args.profile, args.seed)
        if args.plan:
            plan = load_plan(args.plan, profile.num_layers)
        else:
            plan = MergePlan(frozenset(), profile.num_layers)
    # socket errors are OSError subclasses, which main treats as bad input;
    # inside the ring they mean a dead or absent peer, so re-raise as the
    # protocol failure they are and let main exit 2
    try:
        config, session = open_ring(
            args.rank,
            args.nodes,
            host=args.host,
            base_port=args.base_port,
            timeout=args.timeout,
        )
    except OSError as exc:
        raise ProtocolError(f"could not join the ring: {exc}") from exc
    try:
        try:
            if args.role == "bench":
                measurements = bench_allreduce(sizes, config, session, repeats=args.repeats, warmups=args.warmups)
            else:
                report = run_emulation(profile, plan, config, session, args.iterations, warmup=args.warmup)
        except OSError as exc:
            raise ProtocolError(f"ring failed mid-run: {exc}") from exc
    finally:
        session.close()
    if args.role == "bench":
        if config.rank == 0:
            if args.out:
                save_measurements(measurements, args.out)
            else:
                save_measurements(measurements, sys.stdout)
    else:
        print(
            f"rank {config.rank}: mean {report.mean_seconds:.6f} s, "
            f"stddev {report.stddev_seconds:.6f} s, verified={report.verified}"
        )
        if not report.verified:
            return 2
    return 0


def _add_comm_flags(parser) -> None:
    parser.add_argument("--comm-a", type=float, help="startup seconds of one all-reduce")
    parser.add_argument("--comm-b", type=float, help="seconds per payload byte")
    parser.add_argument("--collective", choices=[c.value for c in Collective], help="derive (a, b) from link costs")
    parser.add_argument("--alpha", type=float, help="per-message link latency, seconds")
    parser.add_argument("--beta", type=float, help="per-byte link transfer time, seconds")
    parser.add_argument("--gamma", type=float, help="per-byte local reduction time, seconds")
    parser.add_argument("--bench-csv", help="fit (a, b) to a measurement CSV from bench")


def _add_profile_flags(parser) -> None:
    parser.add_argument(
        "--profile",
        required=True,
        help="profile JSON path, or resnet50-like | googlenet-like | synth:<layers>",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for synth profiles")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mgwfbp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="compute and print a merge plan")
    _add_profile_flags(p)
    _add_comm_flags(p)
    p.add_argument("--nodes", type=int, help="node count (needed by --collective)")
    p.add_argument("--out", help="write the plan JSON here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="timeline for one strategy")
    _add_profile_flags(p)
    _add_comm_flags(p)
    p.add_argument("--strategy", required=True, choices=[s.value for s in Strategy])
    p.add_argument("--plan", help="merge plan JSON (otherwise computed when needed)")
    p.add_argument("--nodes", type=int, help="node count for the speedup figure")
    p.add_argument("--events-csv", help="write (layer, kind, start_s, end_s) rows here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="iteration times across node counts")
    _add_profile_flags(p)
    _add_comm_flags(p)
    p.add_argument("--nodes", required=True, help="comma-separated node counts, e.g. 4,8,16,32,64")
    p.add_argument("--strategies", default="naive,wfbp,synceasgd,mgwfbp")
    p.add_argument("--freeze-plan", action="store_true", help="plan once at the first node count")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="time real all-reduces on loopback")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--sizes", default="4096,16384,65536,262144,1048576,4194304", help="payload bytes, comma-separated")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--warmups", type=int, default=3)
    p.add_argument("--base-port", type=int, default=None)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--out", help="write measurement CSV here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("emulate", help="measure an overlapped iteration on real sockets")
    _add_profile_flags(p)
    _add_comm_flags(p)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--plan", help="merge plan JSON; default is the empty plan unless a model source is given")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--base-port", type=int, default=None)
    p.add_argument("--timeout", type=float, default=300.0)
    p.add_argument("--out", help="write the per-rank report JSON here")
    p.set_defaults(func=cmd_emulate)

    p = sub.add_parser("worker", help="join a ring by hand as one rank")
    p.add_argument("--role", required=True, choices=["bench", "emulate"])
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--base-port", type=int, required=True)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--sizes", default="4096,65536,1048576")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--warmups", type=int, default=3)
    p.add_argument("--out", help="rank 0 writes the bench CSV here")
    p.add_argument("--profile", help="profile for the emulate role")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plan", help="merge plan JSON for the emulate role")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--warmup", type=int, default=2)
    p.set_defaults(func=cmd_worker)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"mgwfbp: {exc}", file=sys.stderr)
        return 1
    except (ProtocolError, RuntimeError) as exc:
        print(f"mgwfbp: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
