"""Benchmark harness: run the planner over puzzles and score the results.

A puzzle counts as solved only when replaying its committed moves through
the game arithmetic reaches 24. The oracle's opinion of success never
decides the outcome.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from . import game24
from .errors import PotError
from .game24 import PuzzleState
from .planner import SearchTree, SolverConfig, check_tree, search
from .pomdp import PotModel, RewardSpec, initial_state

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 3600.0
WITHIN_SECONDS = 600.0


@dataclass
class BenchConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    budget_secs: float = 60.0
    sims_per_slice: int = 200
    slice_secs: float = 5.0
    # Cap on simulations across all slices of one puzzle; None means no cap.
    max_total_sims: int | None = None
    seed: int = 0
    workers: int = 1
    trials: int = 1
    reward: RewardSpec = field(default_factory=RewardSpec)
    oracle_retries: int = 3
    check_trees: bool = False


@dataclass
class RunRecord:
    puzzle_index: int
    puzzle: str
    solved: bool
    wall_time: float
    simulations: int
    actions_taken: int
    oracle_calls: dict[str, int]
    trajectory: list[str]
    labels: list[str] = field(default_factory=list)
    actions: list[str] = field(default_factory=list)
    trial: int = 0
    restarts: int = 0
    tree_violations: int = 0
    error: str | None = None

    def moves(self) -> list[game24.Move]:
        return [game24.parse_move_line(line)[0] for line in self.trajectory]


@dataclass
class BenchmarkReport:
    records: list[RunRecord]
    config: dict[str, Any] = field(default_factory=dict)
    horizon_secs: float = DEFAULT_HORIZON
    bucket_count: int = 10

    @property
    def success_rate(self) -> float:
        return sum(r.solved for r in self.records) / len(self.records)

    @property
    def auc_time(self) -> float:
        return compute_time_auc(self.records, self.horizon_secs)

    @property
    def histogram(self) -> dict:
        return compute_histogram(self.records, self.bucket_count)


def derive_seed(master: int, index: int, trial: int = 0) -> int:
    blob = f"{master}:{index}:{trial}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def verify_trajectory(puzzle: PuzzleState, trajectory: Iterable[str]) -> bool:
    """Replay the recorded move lines; True iff they legally reach {24}."""
    try:
        moves = [game24.parse_move_line(line)[0] for line in trajectory]
        return game24.is_success(game24.replay(puzzle, moves))
    except ValueError:
        return False


def run_puzzle(
    index: int, puzzle: PuzzleState, oracle, config: BenchConfig, trial: int = 0
) -> RunRecord:
    """Plan and act on one puzzle until a proposed solution or the budget runs out.

    The clock starts when the first empty tree is built. A terminal state the
    oracle rejects starts a fresh attempt with a new tree, within the same budget.
    """
    rng = random.Random(derive_seed(config.seed, index, trial))
    model = PotModel(oracle, config.reward, retries=config.oracle_retries)
    q_low, q_high = model.q_bounds(config.solver.max_depth)
    start = time.perf_counter()
    state = initial_state(puzzle)
    tree = SearchTree()
    sims = actions = restarts = violations = 0
    labels: list[str] = []
    executed: list[str] = []
    error = None
    proposed = False
    cap = config.max_total_sims

    def check():
        nonlocal violations
        if config.check_trees:
            problems = check_tree(tree.root, q_low, q_high)
            for p in problems:
                log.error("tree violation on puzzle %d: %s", index, p)
            violations += len(problems)

    try:
        while True:
            elapsed = time.perf_counter() - start
            if elapsed >= config.budget_secs or (cap is not None and sims >= cap):
                break
            n = config.sims_per_slice if cap is None else min(config.sims_per_slice, cap - sims)
            slice_cfg = replace(
                config.solver,
                max_simulations=n,
                time_budget=min(config.slice_secs, config.budget_secs - elapsed),
            )
            action, diag = search(model, lambda _rng: state, slice_cfg, tree=tree, rng=rng)
            sims += diag.simulations + diag.failed_simulations
            check()
            tr = model.step(state, action, rng)
            actions += 1
            labels.append(tr.observation.label.value)
            executed.append(action.name.lower())
            tree.advance(action, tr.observation)
            state = tr.next_state
            if tr.terminal:
                if tr.reward >= config.reward.r_max:
                    proposed = True
                    break
                state, tree = initial_state(puzzle), SearchTree()
                restarts += 1
    except PotError as exc:
        error = f"{type(exc).__name__}: {exc}"
        log.warning("puzzle %d failed: %s", index, error)
    wall = time.perf_counter() - start

    trajectory = [t.text for t in state.trajectory]
    return RunRecord(
        puzzle_index=index,
        puzzle=str(puzzle),
        solved=proposed and verify_trajectory(puzzle, trajectory),
        wall_time=wall,
        simulations=sims,
        actions_taken=actions,
        oracle_calls=dict(sorted(model.counters.items())),
        trajectory=trajectory,
        labels=labels,
        actions=executed,
        trial=trial,
        restarts=restarts,
        tree_violations=violations,
        error=error,
    )


def run_benchmark(
    puzzles: Sequence[tuple[int, PuzzleState]] | Sequence[PuzzleState],
    oracle,
    config: BenchConfig,
    progress: Callable[[RunRecord], None] | None = None,
) -> BenchmarkReport:
    """Run every puzzle (``config.trials`` times each) and collect a report.

    ``puzzles`` may be bare states (indexed from 1) or ``(index, state)`` pairs.
    """
    items = [p if isinstance(p, tuple) else (i, p) for i, p in enumerate(puzzles, start=1)]
    if not items:
        raise ValueError("no puzzles to run")
    jobs = [(i, p, t) for i, p in items for t in range(config.trials)]

    def run(job):
        rec = run_puzzle(job[0], job[1], oracle, config, trial=job[2])
        if progress:
            progress(rec)
        return rec

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            records = list(pool.map(run, jobs))
    else:
        records = [run(j) for j in jobs]
    return BenchmarkReport(records, config=config_echo(config))


def config_echo(config: BenchConfig) -> dict:
    return json.loads(json.dumps(asdict(config), default=str))


def compute_time_auc(records: Sequence[RunRecord], horizon_seconds: float = DEFAULT_HORIZON) -> float:
    """Area under the time-accuracy curve, time rescaled so the horizon is 1.

    The curve y(t) is the fraction of records solved within t seconds. It is
    a step function, so the integral is exact: each puzzle solved at time t
    contributes (1 - t/horizon) / n.
    """
    if not records:
        raise ValueError("no records")
    if not horizon_seconds > 0:
        raise ValueError("horizon must be positive")
    area = sum(max(0.0, 1.0 - r.wall_time / horizon_seconds) for r in records if r.solved)
    return area / len(records)


def time_accuracy_curve(records: Sequence[RunRecord], horizon_seconds: float = DEFAULT_HORIZON) -> list[tuple[float, float]]:
    """Step points (t, fraction solved by t) up to the horizon."""
    times = sorted(r.wall_time for r in records if r.solved and r.wall_time <= horizon_seconds)
    n = len(records)
    points = [(0.0, 0.0)]
    for k, t in enumerate(times, start=1):
        points.append((t, k / n))
    return points


def compute_histogram(records: Sequence[RunRecord], bucket_count: int = 10, within: float = WITHIN_SECONDS) -> dict:
    """Equal-width buckets of solve time over [min, max] of solved records.

    ``fraction_within`` is the share of solved records that finished within
    ``within`` seconds.
    """
    if bucket_count < 1:
        raise ValueError("bucket_count must be >= 1")
    times = sorted(r.wall_time for r in records if r.solved)
    if not times:
        return {"buckets": [], "fraction_within": 0.0, "within_seconds": within}
    lo, hi = times[0], times[-1]
    if hi == lo:
        buckets = [(lo, hi, len(times))]
    else:
        width = (hi - lo) / bucket_count
        counts = [0] * bucket_count
        for t in times:
            counts[min(int((t - lo) / width), bucket_count - 1)] += 1
        buckets = [(lo + k * width, lo + (k + 1) * width if k < bucket_count - 1 else hi, c) for k, c in enumerate(counts)]
    within_frac = sum(t <= within for t in times) / len(times)
    return {"buckets": buckets, "fraction_within": within_frac, "within_seconds": within}


def _sig6(x):
    if isinstance(x, float):
        return float(f"{x:.6g}")
    if isinstance(x, dict):
        return {k: _sig6(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sig6(v) for v in x]
    return x


def _dumps(obj) -> str:
    return json.dumps(_sig6(obj), sort_keys=True)


def emit_reports(report: BenchmarkReport, out_dir: str | Path) -> dict[str, Path]:
    """Write records.jsonl, metrics.json and histogram.csv; returns their paths."""
    out = Path(out_dir)
    paths = {
        "records": out / "records.jsonl",
        "metrics": out / "metrics.json",
        "histogram": out / "histogram.csv",
    }
    hist = report.histogram
    metrics = {
        "n_records": len(report.records),
        "n_puzzles": len({r.puzzle_index for r in report.records}),
        "success_rate": report.success_rate,
        "auc_time": report.auc_time,
        "horizon_seconds": report.horizon_secs,
        "fraction_within_600s": hist["fraction_within"],
        "time_accuracy_curve": time_accuracy_curve(report.records, report.horizon_secs),
        "config": report.config,
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(paths["records"], "w", encoding="utf-8", newline="\n") as f:
            for r in report.records:
                f.write(_dumps(asdict(r)) + "\n")
        paths["metrics"].write_text(json.dumps(_sig6(metrics), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        with open(paths["histogram"], "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["bucket_start", "bucket_end", "count"])
            for start, end, count in hist["buckets"]:
                w.writerow([f"{start:.6g}", f"{end:.6g}", count])
    except OSError as exc:
        raise OSError(f"writing reports to {out}: {exc}") from exc
    return paths


def load_records(path: str | Path) -> list[RunRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(RunRecord(**json.loads(line)))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{n}: bad record: {exc}") from None
    return records


def load_report(out_dir: str | Path) -> BenchmarkReport:
    out = Path(out_dir)
    metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
    return BenchmarkReport(
        load_records(out / "records.jsonl"),
        config=metrics.get("config", {}),
        horizon_secs=metrics.get("horizon_seconds", DEFAULT_HORIZON),
    )
