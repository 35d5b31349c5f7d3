"""Command line: ``pot bench``, ``pot solve`` and ``pot verify``.

Exit codes: 0 success, 1 usage error, 2 runtime failure. The API key is read
from the environment only (``OPENAI_API_KEY`` by default).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from . import game24
from .bench import (
    DEFAULT_HORIZON,
    BenchConfig,
    BenchmarkReport,
    emit_reports,
    load_records,
    run_benchmark,
    verify_trajectory,
)
from .errors import PotError
from .planner import SolverConfig

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # No prefix matching: "--api-key" must not silently mean "--api-key-env".
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def bundled_puzzles() -> Path:
    return Path(str(resources.files("pot") / "data" / "puzzles_1_13.txt"))


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--oracle", choices=["exact", "noisy", "llm"], default="exact")
    p.add_argument("--flip-prob", type=float, default=0.0, help="noisy oracle label flip probability")
    p.add_argument("--epsilon", type=float, default=0.25, help="exact/noisy oracle chance of an unsolvable thought")
    p.add_argument("--budget-secs", type=float, default=60.0, help="wall-clock budget per puzzle")
    p.add_argument("--sims-per-slice", type=int, default=200, help="simulations before each executed action")
    p.add_argument("--slice-secs", type=float, default=5.0)
    p.add_argument("--max-sims", type=int, default=None, help="simulation cap per puzzle across slices")
    p.add_argument("--ucb-c", type=float, default=1.0)
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--api-base", default="https://api.openai.com/v1")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY", help="environment variable holding the key")
    p.add_argument("--thought-model", default="gpt-3.5-turbo-instruct")
    p.add_argument("--value-model", default="gpt-4-1106-preview")
    p.add_argument("--eval-model", default="gpt-4-1106-preview")
    p.add_argument("--thought-endpoint", choices=["completions", "chat"], default="completions")
    p.add_argument("--judge-endpoint", choices=["completions", "chat"], default="chat")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--top-logprobs", type=int, default=20)
    p.add_argument("--prompt-dir", default=None, help="directory with propose/value/judge .txt overrides")
    p.add_argument("--cache-dir", default=".pot-cache")
    p.add_argument("--debug", action="store_true", help="log request/response bodies")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pot", description="POMCP planning over proposed thoughts for the Game of 24")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bench", help="run a benchmark over a puzzle file")
    b.add_argument("--puzzles", default=None, help="puzzle file (text or CSV with a Puzzles column); default: bundled set")
    b.add_argument("--slice", default=None, help="1-based inclusive range, e.g. 901:1000")
    b.add_argument("--solvable-only", action="store_true", help="drop puzzles the brute-force solver rejects")
    b.add_argument("--limit", type=int, default=None, help="keep the first N puzzles after filtering")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--trials", type=int, default=1)
    b.add_argument("--horizon-secs", type=float, default=DEFAULT_HORIZON, help="time horizon for the AUC")
    b.add_argument("--buckets", type=int, default=10)
    b.add_argument("--check-trees", action="store_true", help="walk the search tree after every slice")
    b.add_argument("--out", default="pot-out")
    _add_run_flags(b)

    s = sub.add_parser("solve", help="solve one puzzle and print the trajectory")
    s.add_argument("puzzle", help='e.g. "4 9 10 13"')
    _add_run_flags(s)

    v = sub.add_parser("verify", help="re-check trajectories in a records.jsonl")
    v.add_argument("records")
    return parser


def make_oracle(args):
    from .oracles import ExactOracle, LmOracle, LmOracleConfig, NoisyOracle

    if args.oracle == "exact":
        return ExactOracle(args.epsilon)
    if args.oracle == "noisy":
        return NoisyOracle(args.flip_prob, args.epsilon)
    if not os.environ.get(args.api_key_env):
        logging.getLogger("pot").warning("%s is not set; requests go out without a key", args.api_key_env)
    return LmOracle(
        LmOracleConfig(
            api_base=args.api_base,
            api_key_env=args.api_key_env,
            thought_model=args.thought_model,
            value_model=args.value_model,
            eval_model=args.eval_model,
            thought_endpoint=args.thought_endpoint,
            judge_endpoint=args.judge_endpoint,
            temperature=args.temperature,
            top_logprobs=args.top_logprobs,
            prompt_dir=args.prompt_dir,
            cache_dir=args.cache_dir,
            debug=args.debug,
        )
    )


def make_config(args) -> BenchConfig:
    cfg = BenchConfig(
        solver=SolverConfig(ucb_constant=args.ucb_c, max_depth=args.max_depth, rng_seed=args.seed),
        budget_secs=args.budget_secs,
        sims_per_slice=args.sims_per_slice,
        slice_secs=args.slice_secs,
        max_total_sims=args.max_sims,
        seed=args.seed,
        workers=getattr(args, "workers", 1),
        trials=getattr(args, "trials", 1),
        check_trees=getattr(args, "check_trees", False),
    )
    try:
        cfg.solver.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg.budget_secs <= 0 or cfg.sims_per_slice < 1 or cfg.workers < 1 or cfg.trials < 1:
        raise UsageError("budget, sims per slice, workers and trials must be positive")
    if not 0 <= args.flip_prob < 1 or not 0 <= args.epsilon <= 1:
        raise UsageError("--flip-prob must be in [0, 1) and --epsilon in [0, 1]")
    return cfg


def cmd_bench(args) -> int:
    path = args.puzzles or bundled_puzzles()
    dataset = game24.load_dataset(path)
    try:
        puzzles = game24.slice_puzzles(dataset, args.slice)
    except ValueError as exc:
        raise UsageError(f"--slice: {exc}") from None
    if args.solvable_only:
        puzzles = [(i, p) for i, p in puzzles if game24.solvable(p)]
    if args.limit is not None:
        puzzles = puzzles[: args.limit]
    if not puzzles:
        raise ValueError(f"no puzzles selected from {path}")
    cfg = make_config(args)
    oracle = make_oracle(args)

    def progress(rec):
        status = "solved" if rec.solved else "failed"
        print(f"[{rec.puzzle_index}] {rec.puzzle}: {status} in {rec.wall_time:.2f}s ({rec.simulations} sims)", flush=True)

    report = run_benchmark(puzzles, oracle, cfg, progress=progress)
    report = BenchmarkReport(report.records, report.config, args.horizon_secs, args.buckets)
    paths = emit_reports(report, args.out)
    print(f"success_rate={report.success_rate:.4f} auc_time={report.auc_time:.4f} "
          f"fraction_within_600s={report.histogram['fraction_within']:.4f}")
    print(f"reports written to {paths['metrics'].parent}")
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        puzzle = game24.parse_puzzle(args.puzzle)
    except game24.PuzzleParseError as exc:
        raise UsageError(str(exc)) from None
    cfg = make_config(args)
    report = run_benchmark([(1, puzzle)], make_oracle(args), cfg)
    rec = report.records[0]
    for n, (action, label) in enumerate(zip(rec.actions, rec.labels), start=1):
        print(f"{n:3d}. {action:<9} -> {label}")
    print("trajectory:")
    for line in rec.trajectory:
        print(f"  {line}")
    status = "solved" if rec.solved else "not solved"
    print(f"{status} in {rec.wall_time:.2f}s, {rec.simulations} simulations, {rec.restarts} restarts")
    if rec.error:
        print(f"error: {rec.error}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    records = load_records(args.records)
    bad = 0
    for rec in records:
        ok = verify_trajectory(game24.parse_puzzle(rec.puzzle), rec.trajectory)
        if ok != rec.solved:
            bad += 1
            print(f"[{rec.puzzle_index}] {rec.puzzle}: recorded solved={rec.solved}, replay says {ok}")
    print(f"{len(records) - bad}/{len(records)} records consistent")
    return EXIT_OK if bad == 0 else EXIT_RUNTIME


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "debug", False) else logging.WARNING)
    handler = {"bench": cmd_bench, "solve": cmd_solve, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"pot: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PotError, OSError, ValueError) as exc:
        print(f"pot: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
