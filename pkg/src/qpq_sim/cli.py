"""Command-line entry point: ``qpq-sim <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .experiments import (
    ExperimentConfig,
    format_rows,
    run_attack,
    run_fig2,
    run_fig3,
    run_rng,
    run_table1,
    run_table2,
    summarize_attack,
    write_rows,
    _EXP_CODE,
)
from .protocol import VARIANTS, SessionConfig, run_session
from .sources import HONEST, IDEAL, MALICIOUS, WEAK_COHERENT, SourceParams
from .verify import CRITERIA, run_verify


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="master seed (default 2017)")
    p.add_argument("--runs", type=int, help="Monte Carlo runs per cell")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")


def _grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, nargs="+", dest="N", help="database sizes")
    p.add_argument("--l", type=int, nargs="+", dest="l", help="block lengths")
    p.add_argument("--mu", type=float, help="mean photon number")
    p.add_argument("--p", type=float, help="raw-key known-bit probability")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--full-scale", action="store_true", default=None, dest="full_scale",
                   help="add the expensive large-N cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpq-sim", description="Oblivious-key private query simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (
        ("table1", "k statistics for honest and malicious users with multi-pulse trains"),
        ("table2", "k statistics for the generic oblivious-key model"),
        ("fig2", "per-index knowledge classes after each addition"),
        ("fig3", "mean known bits versus k for low and unrestricted shifts"),
        ("attack", "query counts for database recovery against the single-train protocol"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        _grid(p)
        if name == "table2":
            p.add_argument("--n-a", type=int, nargs="+", dest="n_a", help="known-bit targets")
        if name == "fig3":
            p.add_argument("--k-max", type=int, dest="k_max", help="additions per curve")

    p = sub.add_parser("session", help="run private query sessions and print JSON-lines transcripts")
    _common(p)
    p.add_argument("--variant", choices=VARIANTS, default="improved")
    p.add_argument("--n", type=int, default=64, dest="N", help="database size")
    p.add_argument("--l", type=int, default=8, help="block length")
    p.add_argument("--k", type=int, default=8, help="number of substrings")
    p.add_argument("--i", type=int, default=1, help="1-based address Alice wants")
    p.add_argument("--source", choices=(IDEAL, WEAK_COHERENT), default=IDEAL)
    p.add_argument("--reporting", choices=(HONEST, MALICIOUS), default=HONEST)
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--p", type=float, default=0.25)

    p = sub.add_parser("verify", help="check results against reference values; nonzero exit on failure")
    _common(p)
    p.add_argument("--full-scale", action="store_true", dest="full_scale", help="include the large-N checks")
    p.add_argument("--only", nargs="+", choices=CRITERIA, help="run only these criteria")
    return parser


def _experiment_config(args) -> ExperimentConfig:
    keys = ("N", "l", "mu", "p", "n_a", "runs", "seed", "k_max", "out", "format", "full_scale", "workers")
    overrides = {k: getattr(args, k, None) for k in keys}
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.defaults(args.command, **overrides)


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    if cfg.experiment == "attack":
        rows, growth = run_attack(cfg)
        write_rows(summarize_attack(rows) if cfg.out is None else rows, cfg.out, cfg.format)
        if cfg.out is not None:
            write_rows(growth, cfg.out + ".growth.csv", "csv")
            write_rows(summarize_attack(rows), cfg.out + ".summary." + cfg.format, cfg.format)
        return 0
    runner = {"table1": run_table1, "table2": run_table2, "fig2": run_fig2, "fig3": run_fig3}[cfg.experiment]
    write_rows(runner(cfg), cfg.out, cfg.format)
    return 0


def cmd_session(args) -> int:
    source = SourceParams(args.source, args.mu, args.reporting)
    seed = 2017 if args.seed is None else args.seed
    lines = []
    for r in range(args.runs or 1):
        run_seed = int(run_rng(seed, _EXP_CODE["session"], r).integers(2**63))
        cfg = SessionConfig(args.variant, N=args.N, l=args.l, k=args.k, i=args.i, source=source,
                            p=args.p, seed=run_seed)
        lines.append(run_session(cfg).to_json())
    _emit("".join(line + "\n" for line in lines), args.out)
    return 0


def cmd_verify(args) -> int:
    rows = run_verify(seed=2017 if args.seed is None else args.seed, runs=args.runs,
                      full_scale=args.full_scale, only=args.only, workers=args.workers or 1)
    _emit(format_rows(rows, args.format or "csv"), args.out)
    failed = [r for r in rows if not r["passed"]]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed", file=sys.stderr)
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "session":
            return cmd_session(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_experiment(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
