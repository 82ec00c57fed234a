"""Command-line entry point: ``tkphase <subcommand> [--config FILE] [--key value ...]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from . import mps, pipeline

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

SUBCOMMANDS = (
    "generate",
    "features",
    "classify-pair",
    "phase-graph",
    "interpret",
    "analytic",
    "accuracy",
    "circuit",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message format
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    for key in pipeline.RunConfig.keys():
        p.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tkphase", description="Unsupervised phase classification from MUB snapshots.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        _add_config_flags(p)
        if name == "classify-pair":
            p.add_argument("--g-a", type=float, required=True)
            p.add_argument("--g-b", type=float, required=True)
        if name in ("classify-pair", "phase-graph", "interpret", "accuracy"):
            p.add_argument("--rank", type=int, default=None, help="single rank instead of the configured list")
        if name in ("analytic", "circuit"):
            p.add_argument("--g", type=float, required=True)
    return parser


def _config(args: argparse.Namespace) -> pipeline.RunConfig:
    flags = {k: getattr(args, k) for k in pipeline.RunConfig.keys() if getattr(args, k, None) is not None}
    return pipeline.load_config(args.config, **flags)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, default=lambda o: o.tolist() if isinstance(o, np.ndarray) else str(o)))


def run(args: argparse.Namespace) -> None:
    cfg = _config(args)
    cmd = args.command
    if cmd == "generate":
        manifest = pipeline.cmd_generate(cfg)
        print(f"wrote {len(manifest['files'])} sample files to {pipeline.sample_dir(cfg)}")
    elif cmd == "features":
        paths = pipeline.cmd_features(cfg)
        print(f"wrote {len(paths)} feature files")
    elif cmd == "classify-pair":
        res = pipeline.cmd_classify_pair(cfg, args.g_a, args.g_b, args.rank)
        print(f"g_a={res.g_a:g} g_b={res.g_b:g} b={res.bias:.6g} weight={res.weight:.4f} train_accuracy={res.accuracy:.4f}")
    elif cmd == "phase-graph":
        for r, part in pipeline.cmd_phase_graph(cfg, args.rank).items():
            signs = "".join("?" if a else ("+" if s > 0 else "-") for s, a in zip(part.labels, part.ambiguous))
            print(f"rank {r}: fiedler value {part.fiedler_value:.6g}, partition {signs}")
    elif cmd == "interpret":
        res = pipeline.cmd_interpret(cfg, args.rank)
        print(f"pooled g: {', '.join(f'{g:g}' for g in res.pooled_g)}; top/median = {res.top_to_median:.3g}")
        for name, val in res.ranked[:10]:
            print(f"  {name:>20s} {val:+.6g}")
    elif cmd == "analytic":
        _print_json(pipeline.cmd_analytic(cfg.family, args.g))
    elif cmd == "accuracy":
        print("budget  n_features  accuracy  jackknife_se  failed")
        for row in pipeline.cmd_accuracy(cfg, args.rank):
            print(f"{row.budget:6d}  {row.n_features:10d}  {row.accuracy:8.4f}  {row.stderr:12.4f}  {row.failed_replicates:6d}")
    elif cmd == "circuit":
        _print_json(pipeline.cmd_circuit(cfg, args.g))


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except (pipeline.ConfigError, mps.DomainError) as exc:
        print(f"tkphase: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:  # convergence, degeneracy, canonicalization
        print(f"tkphase: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"tkphase: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
