"""Command-line entry point.

Subcommands: gen, train, solve, convergence, sweep-k, sweep-delta, bench.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

from . import harness, training
from .errors import BeamformingError
from .harness import ExperimentSpec, spec_from_json
from .optimizer import SolverConfig, solve
from .scenario import load_dataset, make_dataset, save_dataset
from .training import load_checkpoint, save_checkpoint, train


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="jcasbf", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="ExperimentSpec JSON file")
        p.add_argument("--seed", type=int, help="override the spec seed list with one seed")
        p.add_argument("--out", help="output file or directory")
        return p

    p = add("gen", "generate train/test datasets")
    p.add_argument("--train-size", type=int, default=100)
    p.add_argument("--test-size", type=int, default=20)

    p = add("train", "train the unfolded step sizes")
    p.add_argument("--data", required=True, help="directory holding train.json/test.json")

    p = add("solve", "run one solver on one stored scenario")
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--mode", default="backtracking",
                   choices=["fixed_step", "backtracking", "unfolded"])
    p.add_argument("--checkpoint")
    p.add_argument("--delta", type=float)

    for name, help_text in (
        ("convergence", "mean objective vs layer for all modes"),
        ("sweep-k", "user-count sweep (spec needs sweep.K)"),
        ("sweep-delta", "trade-off sweep (spec needs sweep.delta)"),
        ("bench", "run-time benchmark over sweep.K"),
    ):
        p = add(name, help_text)
        p.add_argument("--checkpoint")
        if name == "convergence":
            p.add_argument("--train-first", action="store_true",
                           help="train a checkpoint before running")
            p.add_argument("--data", help="dataset directory for --train-first")
    return parser


def _load_spec(args) -> ExperimentSpec:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            spec = spec_from_json(json.load(fh))
    else:
        spec = harness.desk_spec()
    if args.seed is not None:
        spec.seeds = (args.seed,)
    if args.out:
        spec.output_dir = args.out
    return spec


def _load_params(args, spec):
    if getattr(args, "checkpoint", None):
        return load_checkpoint(args.checkpoint, solver_cfg=spec.solver)
    return None


def _cmd_gen(args) -> int:
    spec = _load_spec(args)
    out_dir = spec.output_dir
    os.makedirs(out_dir, exist_ok=True)
    base = args.seed if args.seed is not None else (spec.seeds[0] if spec.seeds else 0)
    train_ds = make_dataset(spec.system, args.train_size, base, "train")
    test_ds = make_dataset(spec.system, args.test_size, base + args.train_size, "test")
    save_dataset(train_ds, os.path.join(out_dir, "train.json"))
    save_dataset(test_ds, os.path.join(out_dir, "test.json"))
    print(f"wrote {args.train_size} train / {args.test_size} test scenarios to {out_dir}")
    return 0


def _cmd_train(args) -> int:
    spec = _load_spec(args)
    if spec.train is None:
        raise BeamformingError("spec has no train section")
    train_ds = load_dataset(os.path.join(args.data, "train.json"))
    test_path = os.path.join(args.data, "test.json")
    test_ds = load_dataset(test_path) if os.path.exists(test_path) else None
    params, history = train(train_ds, spec.train, spec.solver, spec.solver.delta, test_ds=test_ds)
    out = args.out or "checkpoint.json"
    if os.path.isdir(out):
        out = os.path.join(out, "checkpoint.json")
    save_checkpoint(
        params, out,
        train_meta={
            "epochs": spec.train.epochs,
            "seed": spec.train.seed,
            "dataset_digest": training.dataset_digest(train_ds),
        },
    )
    last_h = history["test_mean_h"][-1] if history["test_mean_h"] else float("nan")
    print(f"wrote {out} (final test mean h = {last_h:.6g})")
    return 0


def _cmd_solve(args) -> int:
    spec = _load_spec(args)
    ds = load_dataset(args.dataset)
    if not 0 <= args.index < len(ds.scenarios):
        raise BeamformingError(f"index {args.index} out of range (dataset has {len(ds.scenarios)})")
    scn = ds.scenarios[args.index]
    cfg = replace(spec.solver, mode=args.mode, I_w=spec.solver.I_w if args.mode == "unfolded" else 1)
    if args.delta is not None:
        cfg = replace(cfg, delta=args.delta)
    params = None
    if args.mode == "unfolded":
        params = load_checkpoint(args.checkpoint, solver_cfg=cfg) if args.checkpoint else None
    state, trace = solve(scn, cfg, params=params)
    print(
        f"h = {trace.h[-1]:.6g}  min SINR = {10 * math.log10(trace.min_sinr[-1]):.3f} dB"
        f"  min SCNR = {10 * math.log10(trace.min_scnr[-1]):.3f} dB"
    )
    out = args.out or "trace.csv"
    trace.to_csv(out)
    print(f"trace written to {out}")
    return 0


def _cmd_convergence(args) -> int:
    spec = _load_spec(args)
    params = _load_params(args, spec)
    if params is None and args.train_first:
        if not args.data:
            raise BeamformingError("--train-first needs --data")
        train_ds = load_dataset(os.path.join(args.data, "train.json"))
        train_cfg = spec.train or harness.TrainConfig()
        params, _ = train(train_ds, train_cfg, spec.solver, spec.solver.delta)
    files = harness.run_convergence(spec, params, spec.output_dir)
    print("\n".join(files))
    return 0


def _cmd_table(args, runner, prefix) -> int:
    spec = _load_spec(args)
    params = _load_params(args, spec)
    table = runner(spec, params)
    os.makedirs(spec.output_dir, exist_ok=True)
    csv_path = os.path.join(spec.output_dir, f"{prefix}.csv")
    table.to_csv(csv_path)
    written = [csv_path] + harness.sweep_plots(table, spec.output_dir, prefix)
    if prefix == "bench":
        summary = os.path.join(spec.output_dir, "bench_summary.csv")
        harness.benchmark_summary(table, summary)
        written.append(summary)
    print("\n".join(written))
    return 0


def cli_main(argv=None) -> int:
    """Parse argv and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    handlers = {
        "gen": _cmd_gen,
        "train": _cmd_train,
        "solve": _cmd_solve,
        "convergence": _cmd_convergence,
        "sweep-k": lambda a: _cmd_table(a, harness.run_k_sweep, "k_sweep"),
        "sweep-delta": lambda a: _cmd_table(a, harness.run_delta_sweep, "delta_sweep"),
        "bench": lambda a: _cmd_table(a, harness.run_benchmark, "bench"),
    }
    try:
        return handlers[args.command](args)
    except (BeamformingError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
