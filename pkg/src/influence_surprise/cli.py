"""Command-line entry point: ``influence-surprise {snapshot,analyze,simulate,top}``.

Exit codes: 0 success, 1 usage/configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .pipeline import (
    ConfigError,
    make_config,
    read_config_file,
    run_analysis,
    run_simulation,
    run_snapshot,
    top_nodes,
)
from .synth import Shock, SynthConfig, SynthError
from .temporal_graph import IngestError, SnapshotError

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("influence_surprise")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(parser: argparse.ArgumentParser) -> None:
    # SUPPRESS lets the same flag appear before or after the subcommand.
    S = argparse.SUPPRESS
    g = parser.add_argument_group("common options")
    g.add_argument("--config", default=S, help="INI config file; flags override its values")
    g.add_argument("--input", default=S, help="edge list: src,dst,year[,weight]")
    g.add_argument("--delimiter", default=S)
    g.add_argument("--delta", type=int, default=S, help="years per snapshot")
    g.add_argument("--start", type=int, default=S, help="first year (default: aligned min year)")
    g.add_argument("--end", type=int, default=S, help="last year (default: max year)")
    w = g.add_mutually_exclusive_group()
    w.add_argument("--weighted", dest="weighted", action="store_const", const=True, default=S)
    w.add_argument("--unweighted", dest="weighted", action="store_const", const=False, default=S)
    g.add_argument("--damping", type=float, default=S)
    g.add_argument("--tolerance", type=float, default=S)
    g.add_argument("--max-iterations", type=int, default=S)
    g.add_argument("--hypotheses", default=S, help="comma list of past_rank,regular_growth,uniform")
    g.add_argument("--clamp-epsilon", type=float, default=S)
    b = g.add_mutually_exclusive_group()
    b.add_argument("--include-bypass", dest="include_bypass", action="store_const", const=True, default=S)
    b.add_argument("--exclude-bypass", dest="include_bypass", action="store_const", const=False, default=S)
    g.add_argument("--reverse-edges", action="store_const", const=True, default=S)
    g.add_argument("--out-dir", default=S)
    g.add_argument("--format", choices=("csv", "json"), default=S)
    g.add_argument("--seed", type=int, default=S)
    g.add_argument("-v", "--verbose", action="count", default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="influence-surprise", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("snapshot", help="build snapshots and print per-snapshot counts")
    _common(p)

    p = sub.add_parser("analyze", help="centrality, ranks, surprise and plot data")
    _common(p)
    p.add_argument("--dataset", default=argparse.SUPPRESS, help="name used in the correlation report")
    p.add_argument("--svg", action="append", default=argparse.SUPPRESS, metavar="NODE",
                   help="write a static scatter SVG for NODE (repeatable)")

    p = sub.add_parser("simulate", help="generate a synthetic network, analyze it, report the shock")
    _common(p)
    p.add_argument("--initial-nodes", type=int, default=20)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--arrivals", type=int, default=20)
    p.add_argument("--edges-per-arrival", type=int, default=2)
    p.add_argument("--bias", type=float, default=1.0, help="attachment bias (0 = uniform)")
    p.add_argument("--shock-step", type=int, default=6, help="0 disables the shock")
    p.add_argument("--shock-target", default="low", help="node label or low|median|random")
    p.add_argument("--burst", type=int, default=50)
    p.add_argument("--start-year", type=int, default=2000)

    p = sub.add_parser("top", help="top-k nodes at one snapshot of a finished analysis")
    _common(p)
    p.add_argument("--measure", choices=("pagerank", "disruption"), default="pagerank")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--k", type=int, default=10)
    return parser


_CONFIG_FLAGS = ("input", "delimiter", "delta", "start", "end", "weighted", "damping", "tolerance",
                 "max_iterations", "hypotheses", "clamp_epsilon", "include_bypass", "reverse_edges",
                 "out_dir", "format", "dataset")


def _run_config(args):
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    flags = {k: getattr(args, k) for k in _CONFIG_FLAGS if hasattr(args, k)}
    if hasattr(args, "svg"):
        flags["svg_nodes"] = tuple(args.svg)
    return make_config(file_values, **flags)


def cmd_snapshot(args) -> int:
    cfg = _run_config(args)
    stats = run_snapshot(cfg)
    print(f"{'t':>6} {'nodes':>9} {'edges':>9} {'weight':>10}")
    for s in stats:
        flag = "  (partial)" if s.partial else ""
        print(f"{s.t:>6} {s.nodes:>9} {s.edges:>9} {s.total_weight:>10}{flag}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _run_config(args)
    result = run_analysis(cfg)
    print(f"analyzed {len(result.series)} snapshots, {len(result.points)} trajectory points")
    for path in result.artifacts:
        if path.parent.name not in ("scores",):
            print(f"  wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    shock = Shock(args.shock_step, args.shock_target, args.burst) if args.shock_step else None
    synth = SynthConfig(
        seed=getattr(args, "seed", 0), initial_nodes=args.initial_nodes, steps=args.steps,
        arrivals_per_step=args.arrivals, edges_per_arrival=args.edges_per_arrival,
        attachment_bias=args.bias, shock=shock, start_year=args.start_year,
    )
    result = run_simulation(synth, cfg)
    r = result.report
    print(f"generated {synth.expected_nodes()} nodes, {synth.expected_edges()} edges "
          f"(seed {synth.seed}) in {cfg.out_dir}")
    if not r.detectable:
        print(f"shock: undetectable ({r.reason})")
    else:
        print(f"shock: target {r.target} at t={r.shock_t}, {r.target_bits:.3f} bits, "
              f"surprise rank {r.shock_step_rank} of {r.applicable_steps} steps, "
              f"above {100 * r.target_percentile:.1f}% of {r.control_count} controls, "
              f"detected={r.detected}")
    return EXIT_OK


def cmd_top(args) -> int:
    out_dir = getattr(args, "out_dir", "out")
    rows = top_nodes(out_dir, args.measure, args.t, args.k)
    kl_names = sorted({k for r in rows for k in r.kl})
    print("\t".join(["node", "score", "g", "x", *(f"kl_{k}" for k in kl_names), "total_bits"]))
    for r in rows:
        cells = [r.node, f"{r.score:.6g}", str(r.g), f"{r.x:.6f}"]
        cells += ["" if r.kl.get(k) is None else f"{r.kl[k]:.6f}" for k in kl_names]
        cells.append("" if r.total_bits is None else f"{r.total_bits:.6f}")
        print("\t".join(cells))
    return EXIT_OK


COMMANDS = {"snapshot": cmd_snapshot, "analyze": cmd_analyze, "simulate": cmd_simulate, "top": cmd_top}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0) or 0, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SynthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IngestError, SnapshotError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
