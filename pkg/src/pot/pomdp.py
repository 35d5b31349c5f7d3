"""A POMDP whose actions commit, retract or redraw proposed reasoning steps.

State is the committed trajectory plus an optional staged thought. The three
actions are ``continue`` (commit the staged thought and stage a new one),
``rollback`` (un-commit the last thought, which becomes staged again) and
``think`` (replace the staged thought with a fresh proposal). Observations
are an oracle value label plus a digest of the staged result, so that
different proposals land in different tree nodes. Reward is paid only on the
transition into a terminal state, as judged by the oracle.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import TYPE_CHECKING, Mapping

from . import game24
from .errors import InvalidThought, OracleExhausted
from .game24 import Move, PuzzleState
from .planner import Transition

if TYPE_CHECKING:
    from .oracles.base import Oracle


class Action(IntEnum):
    CONTINUE = 0
    ROLLBACK = 1
    THINK = 2


class ValueLabel(str, Enum):
    SURE = "sure"
    LIKELY = "likely"
    IMPOSSIBLE = "impossible"

    @property
    def rank(self) -> int:
        return {"sure": 2, "likely": 1, "impossible": 0}[self.value]


LABELS = (ValueLabel.SURE, ValueLabel.LIKELY, ValueLabel.IMPOSSIBLE)


@dataclass(frozen=True)
class Thought:
    """One step and the subproblem it produces."""

    move: Move
    result: PuzzleState

    @classmethod
    def apply(cls, subproblem: PuzzleState, move: Move) -> Thought:
        try:
            return cls(move, game24.apply_move(subproblem, move))
        except game24.IllegalMoveError as exc:
            raise InvalidThought(str(exc)) from None

    @property
    def text(self) -> str:
        return f"{self.move} (left: {self.result})"

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class PotState:
    problem: PuzzleState
    trajectory: tuple[Thought, ...] = ()
    staged: Thought | None = None

    @property
    def subproblem(self) -> PuzzleState:
        return self.trajectory[-1].result if self.trajectory else self.problem


@dataclass(frozen=True)
class PotObservation:
    label: ValueLabel
    staged_digest: str


@dataclass(frozen=True)
class RewardSpec:
    r_max: float = 1.0
    r_min: float = 0.0

    def __post_init__(self):
        if not self.r_max > self.r_min:
            raise ValueError("r_max must exceed r_min")


class Game24Task:
    """Task hooks the POMDP needs; a different task supplies its own."""

    horizon = 3

    def parse(self, text: str) -> PuzzleState:
        return game24.parse_puzzle(text)

    def is_terminal(self, subproblem: PuzzleState) -> bool:
        return len(subproblem) <= 1

    def digest(self, subproblem: PuzzleState | None) -> str:
        return "" if subproblem is None else subproblem.digest()


GAME24 = Game24Task()


def initial_state(problem: PuzzleState | str, task: Game24Task = GAME24) -> PotState:
    if isinstance(problem, str):
        problem = task.parse(problem)
    return PotState(problem)


def is_terminal(state: PotState, task: Game24Task = GAME24) -> bool:
    return task.is_terminal(state.subproblem)


def legal_actions(state: PotState, task: Game24Task = GAME24) -> list[Action]:
    if is_terminal(state, task):
        return []
    actions = []
    if state.staged is not None:
        actions.append(Action.CONTINUE)
    if state.trajectory:
        actions.append(Action.ROLLBACK)
    actions.append(Action.THINK)
    return actions


def propose_valid_thought(
    oracle: Oracle,
    subproblem: PuzzleState,
    mode: str,
    rng: random.Random,
    retries: int = 3,
    counters: Counter | None = None,
) -> Thought:
    """Ask the oracle for a thought, retrying invalid ones up to ``retries`` times in total."""
    counters = counters if counters is not None else Counter()
    for attempt in range(retries):
        counters["propose"] += 1
        try:
            thought = oracle.propose_thought(subproblem, mode, rng, attempt=attempt)
            # Validate unconditionally, whatever the oracle claims.
            return Thought.apply(subproblem, thought.move)
        except InvalidThought:
            counters["invalid_thought"] += 1
    counters["oracle_exhausted"] += 1
    raise OracleExhausted(f"no valid thought for {{{subproblem}}} after {retries} attempts")


def sample_observation_label(
    subproblem: PuzzleState, oracle: Oracle, rng: random.Random, counters: Counter | None = None
) -> ValueLabel:
    if counters is not None:
        counters["value"] += 1
    return sample_label(oracle.value_label(subproblem), rng)


def sample_label(dist: Mapping[ValueLabel, float], rng: random.Random) -> ValueLabel:
    total = sum(max(0.0, dist.get(label, 0.0)) for label in LABELS)
    if not total > 0:
        raise ValueError(f"label distribution covers no label: {dist!r}")
    u = rng.random() * total
    acc = 0.0
    last = None
    for label in LABELS:
        p = max(0.0, dist.get(label, 0.0))
        if p == 0:
            continue
        acc += p
        last = label
        if u < acc:
            return label
    return last


def rollout_value(
    state: PotState,
    depth_remaining: int,
    oracle: Oracle,
    reward_spec: RewardSpec = RewardSpec(),
    rng: random.Random | None = None,
    task: Game24Task = GAME24,
    retries: int = 3,
    counters: Counter | None = None,
) -> float:
    """Greedy chain-of-thought completion scored by the posterior-weighted reward.

    The staged thought, if any, is the leaf being evaluated and is included
    in the trajectory. ``depth_remaining`` counts thoughts still to add.
    """
    if depth_remaining < 0:
        raise ValueError("depth_remaining must be >= 0")
    rng = rng or random.Random(0)
    counters = counters if counters is not None else Counter()
    tau = list(state.trajectory)
    if state.staged is not None:
        tau.append(state.staged)
    current = tau[-1].result if tau else state.problem
    stalled = False
    for _ in range(depth_remaining):
        if task.is_terminal(current):
            break
        try:
            thought = propose_valid_thought(oracle, current, "greedy", rng, retries, counters)
        except OracleExhausted:
            stalled = True
            break
        tau.append(thought)
        current = thought.result
    if stalled:
        p_success = 0.0
    else:
        counters["evaluate"] += 1
        p_success = oracle.evaluate_trajectory(state.problem, tau)
    r_max, r_min = reward_spec.r_max, reward_spec.r_min
    return (r_max * p_success + r_min * (1.0 - p_success)) / (r_max + r_min)


def step(
    state: PotState,
    action: Action,
    oracle: Oracle,
    rng: random.Random,
    reward_spec: RewardSpec = RewardSpec(),
    task: Game24Task = GAME24,
    retries: int = 3,
    counters: Counter | None = None,
) -> Transition:
    counters = counters if counters is not None else Counter()
    if action not in legal_actions(state, task):
        raise ValueError(f"{Action(action).name} is not legal here")

    if action == Action.THINK:
        staged = propose_valid_thought(oracle, state.subproblem, "sample", rng, retries, counters)
        nxt = PotState(state.problem, state.trajectory, staged)
    elif action == Action.CONTINUE:
        trajectory = state.trajectory + (state.staged,)
        subproblem = state.staged.result
        staged = None
        if not task.is_terminal(subproblem):
            staged = propose_valid_thought(oracle, subproblem, "sample", rng, retries, counters)
        nxt = PotState(state.problem, trajectory, staged)
    else:
        nxt = PotState(state.problem, state.trajectory[:-1], state.trajectory[-1])

    # The label judges the staged candidate when there is one, else the subproblem.
    focus = nxt.staged.result if nxt.staged is not None else nxt.subproblem
    label = sample_observation_label(focus, oracle, rng, counters)
    obs = PotObservation(label, task.digest(nxt.staged.result if nxt.staged else None))

    terminal = is_terminal(nxt, task)
    reward = 0.0
    if terminal:
        counters["evaluate"] += 1
        p = oracle.evaluate_trajectory(nxt.problem, nxt.trajectory)
        success = p >= 1.0 or (p > 0.0 and rng.random() < p)
        reward = reward_spec.r_max if success else reward_spec.r_min
    return Transition(nxt, obs, reward, terminal)


@dataclass
class PotModel:
    """Adapts the POMDP to :class:`pot.planner.GenerativeModel` for one puzzle run."""

    oracle: Oracle
    reward_spec: RewardSpec = RewardSpec()
    task: Game24Task = GAME24
    retries: int = 3
    counters: Counter = field(default_factory=Counter)

    def legal_actions(self, state: PotState) -> list[Action]:
        return legal_actions(state, self.task)

    def is_terminal(self, state: PotState) -> bool:
        return is_terminal(state, self.task)

    def step(self, state: PotState, action: Action, rng: random.Random) -> Transition:
        return step(state, action, self.oracle, rng, self.reward_spec, self.task, self.retries, self.counters)

    def rollout(self, state: PotState, depth_remaining: int, rng: random.Random) -> float:
        # The planner's depth counts actions; the rollout counts thoughts left in the task.
        committed = len(state.trajectory) + (state.staged is not None)
        thoughts_left = max(0, self.task.horizon - committed)
        return rollout_value(
            state, thoughts_left, self.oracle, self.reward_spec, rng, self.task, self.retries, self.counters
        )

    def q_bounds(self, max_depth: int) -> tuple[float, float]:
        return max_depth * min(self.reward_spec.r_min, 0.0), max_depth * self.reward_spec.r_max
