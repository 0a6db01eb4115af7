"""sdvorch command line: generate, solve, simulate, bench, report.

Exit codes: 0 ok, 2 invalid arguments or inputs, 3 I/O failure, 4 exact
search guard exceeded. Every run is fully determined by its flags; measured
durations are written to separate ``*.timing.json`` files.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from . import kernels
from .errors import OrchestrationError, SearchSpaceError
from .generator import PRESETS, GenParams, gen_instance, gen_scenario
from .metrics import (
    compare_runs, emit_plot_series, format_comparison, run_side, save_comparison,
)
from .model import validate_instance
from .serialize import (
    config_hash, dumps, dumps_solution, instance_hash, load_instance, load_scenario, manifest,
    save_instance, save_scenario, write_text,
)
from .simulator import Policy, SimConfig, load_log, run_scenario, save_log
from .solver import solve_exact, solve_greedy

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_GUARD = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, msg, code=EXIT_ARGS):
        super().__init__(msg)
        self.code = code


# -- shared flag groups ---------------------------------------------------------

def _add_gen_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("instance generation")
    g.add_argument("--preset", type=str.upper, choices=list(PRESETS), help="size preset")
    g.add_argument("--apps", type=int, help="number of applications")
    g.add_argument("--modes", type=int, help="maximum runtime modes per application")
    g.add_argument("--density", type=float, help="app dependency graph density in [0, 1]")
    g.add_argument("--seed", type=int, help="generator seed")
    g.add_argument("--states", type=int, default=6, help="scenario state changes (default 6)")


def _add_input_flags(p: argparse.ArgumentParser):
    p.add_argument("--instance", type=Path, help="instance file (otherwise generated from flags)")
    p.add_argument("--scenario", type=Path, help="scenario file (otherwise generated from flags)")


def _add_sim_flags(p: argparse.ArgumentParser):
    p.add_argument("--tick", type=float, default=1.0, help="tick length in seconds")
    p.add_argument("--start-delay", type=float, default=2.0, help="container start delay, s")
    p.add_argument("--stop-delay", type=float, default=1.0, help="container stop delay, s")


def _params(args) -> GenParams:
    if args.seed is None:
        raise CliError("--seed is required to generate an instance")
    over = {}
    if args.apps is not None:
        over["n_apps"] = args.apps
    if args.modes is not None:
        over["m_max"] = args.modes
    if args.density is not None:
        over["density"] = args.density
    if args.preset:
        return GenParams.preset(args.preset, seed=args.seed, **over)
    if "n_apps" not in over:
        raise CliError("give --preset or --apps")
    return GenParams(seed=args.seed, **over)


def _instance(args):
    if getattr(args, "instance", None):
        inst = load_instance(args.instance)
    else:
        inst = gen_instance(_params(args))
    report = validate_instance(inst)
    if not report.ok:
        raise CliError("invalid instance: " + "; ".join(f"{v.kind}: {v.detail}" for v in report.violations[:5]))
    return inst


def _scenario(args, inst):
    if getattr(args, "scenario", None):
        return load_scenario(args.scenario)
    if args.states < 1:
        raise CliError("--states must be >= 1")
    return gen_scenario(inst, args.states)


def _sim_config(args) -> SimConfig:
    return SimConfig(tick_s=args.tick, container_start_s=args.start_delay,
                     container_stop_s=args.stop_delay, seed=args.seed or 0)


# -- subcommands ----------------------------------------------------------------

def cmd_generate(args) -> int:
    inst = _instance(args)
    sc = _scenario(args, inst)
    out = Path(args.out)
    save_instance(inst, out / "instance.json")
    save_scenario(sc, out / "scenario.json")
    for app in inst.apps:
        write_text(out / "manifests" / f"{app.app_id}.json", dumps(manifest(inst, app.app_id)))
    n_flows = len(inst.compiled.flow_ids)
    n_edges = len(inst.app_edges())
    print(f"generated {len(inst.apps)} apps, {n_edges} app dependencies, {n_flows} flows, "
          f"{len(sc.states)} states; instance {instance_hash(inst)} -> {out}")
    return EXIT_OK


def _request(args, inst):
    if args.request is not None:
        return [a for a in args.request.split(",") if a]
    if args.state is not None:
        sc = _scenario(args, inst)
        if not 0 <= args.state < len(sc.states):
            raise CliError(f"--state {args.state} outside 0..{len(sc.states) - 1}")
        return list(sc.states[args.state].requested)
    return None


def cmd_solve(args) -> int:
    inst = _instance(args)
    requested = _request(args, inst)
    if args.exact:
        sol = solve_exact(inst, requested)
    else:
        sol = solve_greedy(inst, requested)
    meta = {
        "instance_hash": instance_hash(inst),
        "instance_seed": inst.meta.get("seed"),
        "config_hash": config_hash({"method": sol.method, "requested": list(sol.requested)}),
    }
    out = Path(args.out)
    path = out / f"solution.{sol.method}.json"
    write_text(path, dumps_solution(inst, sol, meta=meta))
    write_text(path.with_name(path.stem + ".timing.json"),
               dumps({"solve_time_s": sol.solve_time, "backend": kernels.BACKEND}))
    if args.format == "doc":
        print(dumps_solution(inst, sol, include_timing=True, meta=meta), end="")
    else:
        active = len(sol.assignment)
        print(f"{sol.method}: {active} apps active for {len(sol.requested)} requested, "
              f"total AXIL {sol.total_axil:.6f}, {sol.iterations} iterations, "
              f"{1000 * sol.solve_time:.2f} ms -> {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    inst = _instance(args)
    sc = _scenario(args, inst)
    log = run_scenario(inst, sc, args.policy, _sim_config(args))
    paths = save_log(log, Path(args.out) / args.policy)
    side = run_side(log)
    if args.format == "doc":
        print(dumps(side.to_dict(include_timing=True)), end="")
    else:
        h = side.health
        med = "-" if h.median_pct is None else f"{h.median_pct:.2f}%"
        print(f"{args.policy}: {log.n_ticks} ticks, median health {med}, "
              f"{side.saturation_ticks} saturated ticks, container time {side.container_time_s:.1f} s "
              f"-> {paths['log']}")
    return EXIT_OK


def bench_rows(presets, repeats, seed):
    rows = []
    for name in presets:
        times = []
        for s in range(seed, seed + repeats):
            inst = gen_instance(GenParams.preset(name, seed=s))
            sol = solve_greedy(inst)
            times.append(sol.solve_time)
        n, m, d = PRESETS[name]
        rows.append({"preset": name, "apps": n, "modes": m, "density": d, "repeats": repeats,
                     "min_s": min(times), "median_s": statistics.median(times),
                     "max_s": max(times)})
    return rows


def format_bench(rows) -> str:
    head = f"{'preset':<6} {'apps':>4} {'modes':>5} {'density':>7} {'min ms':>9} {'median ms':>9} {'max ms':>9}"
    lines = [head]
    for r in rows:
        lines.append(f"{r['preset']:<6} {r['apps']:>4} {r['modes']:>5} {r['density']:>7.2f} "
                     f"{1000 * r['min_s']:>9.3f} {1000 * r['median_s']:>9.3f} {1000 * r['max_s']:>9.3f}")
    return "\n".join(lines)


def cmd_bench(args) -> int:
    presets = [p.strip().upper() for p in args.presets.split(",") if p.strip()]
    bad = [p for p in presets if p not in PRESETS]
    if bad or not presets:
        raise CliError(f"unknown presets {bad}; choose from {','.join(PRESETS)}")
    if args.repeats < 1:
        raise CliError("--repeats must be >= 1")
    seed = 0 if args.seed is None else args.seed
    rows = bench_rows(presets, args.repeats, seed)
    doc = {"seed": seed, "repeats": args.repeats, "backend": kernels.BACKEND,
           "config_hash": config_hash({"presets": presets, "repeats": args.repeats, "seed": seed}),
           "rows": rows}
    if args.out:
        write_text(Path(args.out) / "bench.timing.json", dumps(doc))
    if args.format == "doc":
        print(dumps(doc), end="")
    else:
        print(f"greedy solve time, backend={kernels.BACKEND}, seeds {seed}..{seed + args.repeats - 1}")
        print(format_bench(rows))
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    if args.baseline_log or args.optimized_log:
        if not (args.baseline_log and args.optimized_log):
            raise CliError("give both --baseline-log and --optimized-log")
        base, opt = load_log(args.baseline_log), load_log(args.optimized_log)
    else:
        inst = _instance(args)
        sc = _scenario(args, inst)
        cfg = _sim_config(args)
        base = run_scenario(inst, sc, Policy.BASELINE, cfg)
        opt = run_scenario(inst, sc, Policy.OPTIMIZED, cfg)
        save_log(base, out / "baseline")
        save_log(opt, out / "optimized")
    cmp = compare_runs(base, opt)
    save_comparison(cmp, out / "comparison.json")
    emit_plot_series(cmp, out / "series")
    if args.format == "doc":
        print(dumps(cmp.to_dict(include_timing=True)), end="")
    else:
        print(format_comparison(cmp))
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdvorch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write instance, manifests and scenario")
    _add_gen_flags(g)
    g.add_argument("--out", default="out", help="output directory")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="select runtime modes for a request")
    _add_gen_flags(s)
    _add_input_flags(s)
    s.add_argument("--request", help="comma-separated app ids (default: all apps)")
    s.add_argument("--state", type=int, help="use the request of this scenario state")
    s.add_argument("--exact", action="store_true", help="exhaustive search instead of greedy")
    s.add_argument("--out", default="out", help="output directory")
    s.add_argument("--format", choices=("table", "doc"), default="table")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="replay the scenario under one policy")
    _add_gen_flags(m)
    _add_input_flags(m)
    _add_sim_flags(m)
    m.add_argument("--policy", choices=[x.value for x in Policy], default="optimized")
    m.add_argument("--out", default="out", help="output directory")
    m.add_argument("--format", choices=("table", "doc"), default="table")
    m.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="greedy solve times across presets")
    b.add_argument("--presets", default=",".join(PRESETS))
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--seed", type=int, default=0, help="first seed")
    b.add_argument("--out", help="directory for bench.timing.json")
    b.add_argument("--format", choices=("table", "doc"), default="table")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="baseline vs optimized on one scenario")
    _add_gen_flags(r)
    _add_input_flags(r)
    _add_sim_flags(r)
    r.add_argument("--baseline-log", type=Path, help="prefix of a saved baseline log")
    r.add_argument("--optimized-log", type=Path, help="prefix of a saved optimized log")
    r.add_argument("--out", default="out", help="output directory")
    r.add_argument("--format", choices=("table", "doc"), default="table")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"sdvorch: {e}", file=sys.stderr)
        return e.code
    except SearchSpaceError as e:
        print(f"sdvorch: {e}", file=sys.stderr)
        return EXIT_GUARD
    except json.JSONDecodeError as e:
        print(f"sdvorch: cannot parse input: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"sdvorch: {e}", file=sys.stderr)
        return EXIT_IO
    except (OrchestrationError, ValueError, KeyError) as e:
        print(f"sdvorch: {e}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
