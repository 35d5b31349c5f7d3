"""Anytime POMCP over a generative model.

The tree is keyed by histories of ``(action, observation)`` pairs. A node is
expanded on its first visit, which returns a rollout estimate without touching
the node's own counts; after that it selects actions by UCB1. Counts are
updated post-order, only once the recursive call below has returned, so a
simulation that raises leaves the statistics untouched.

Models implement :class:`GenerativeModel`. There is no particle filter: the
root belief is a sampler, and the state is carried down the recursion.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, NamedTuple, Protocol, Sequence

from .errors import PotError, SimulationFailed

Action = Hashable
Observation = Hashable


class Transition(NamedTuple):
    next_state: Any
    observation: Observation
    reward: float
    terminal: bool


class GenerativeModel(Protocol):
    def legal_actions(self, state) -> Sequence[Action]:
        """Legal actions in tie-break order (lowest index first)."""

    def is_terminal(self, state) -> bool: ...

    def step(self, state, action: Action, rng: random.Random) -> Transition: ...

    def rollout(self, state, depth_remaining: int, rng: random.Random) -> float:
        """Value estimate for a freshly expanded leaf."""


class SearchError(PotError):
    pass


@dataclass
class SolverConfig:
    ucb_constant: float = 1.0
    max_depth: int = 12
    max_simulations: int = 1000
    time_budget: float = 5.0
    discount: float = 1.0
    rng_seed: int = 0

    def validate(self) -> None:
        if self.ucb_constant < 0:
            raise ValueError("ucb_constant must be non-negative")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_simulations < 1:
            raise ValueError("max_simulations must be >= 1")
        if not self.time_budget > 0:
            raise ValueError("time_budget must be > 0")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must be in (0, 1]")


class ActionEdge:
    __slots__ = ("visit_count", "value_sum", "children")

    def __init__(self):
        self.visit_count = 0
        self.value_sum = 0.0
        self.children: dict[Observation, SearchNode] = {}

    @property
    def q(self) -> float:
        return self.value_sum / self.visit_count if self.visit_count else 0.0


class SearchNode:
    __slots__ = ("visit_count", "edges", "expanded")

    def __init__(self):
        self.visit_count = 0
        self.edges: dict[Action, ActionEdge] = {}
        self.expanded = False

    def edge(self, action: Action) -> ActionEdge:
        e = self.edges.get(action)
        if e is None:
            e = self.edges[action] = ActionEdge()
        return e

    def child(self, action: Action, observation: Observation) -> SearchNode | None:
        e = self.edges.get(action)
        return None if e is None else e.children.get(observation)

    def q_values(self) -> dict[Action, float]:
        return {a: e.q for a, e in self.edges.items() if e.visit_count}


class SearchTree:
    """Holds the root; :meth:`advance` moves it after a real step."""

    def __init__(self, root: SearchNode | None = None):
        self.root = root or SearchNode()

    def advance(self, action: Action, observation: Observation) -> SearchTree:
        child = self.root.child(action, observation)
        # Dropping the old root releases every sibling branch.
        self.root = child if child is not None else SearchNode()
        return self

    def node_at(self, history: Sequence[tuple[Action, Observation]]) -> SearchNode | None:
        node = self.root
        for a, o in history:
            node = node.child(a, o)
            if node is None:
                return None
        return node


@dataclass
class SearchDiagnostics:
    simulations: int = 0
    failed_simulations: int = 0
    wall_time: float = 0.0
    root_visits: int = 0
    root_q: dict = field(default_factory=dict)
    root_n: dict = field(default_factory=dict)


def ucb_select(node: SearchNode, c: float, actions: Sequence[Action] | None = None) -> Action:
    """UCB1 over ``actions``; untried actions first, ties to the earliest."""
    if actions is None:
        actions = sorted(node.edges)
    if not actions:
        raise SearchError("no legal action")
    best, best_score = None, -math.inf
    log_n = math.log(node.visit_count) if node.visit_count > 0 else 0.0
    for a in actions:
        e = node.edges.get(a)
        if e is None or e.visit_count == 0:
            return a
        score = e.q + c * math.sqrt(log_n / e.visit_count)
        if score > best_score:
            best, best_score = a, score
    return best


def simulate(
    model: GenerativeModel,
    state,
    node: SearchNode,
    depth_remaining: int,
    config: SolverConfig,
    rng: random.Random,
) -> float:
    # Rewards are paid on the transition into a terminal state, so the
    # terminal state itself is worth nothing more.
    if depth_remaining <= 0 or model.is_terminal(state):
        return 0.0
    if not node.expanded:
        value = model.rollout(state, depth_remaining, rng)
        node.expanded = True
        return value
    actions = model.legal_actions(state)
    if not actions:
        return 0.0
    action = ucb_select(node, config.ucb_constant, actions)
    tr = model.step(state, action, rng)
    edge = node.edge(action)
    child = edge.children.get(tr.observation)
    if child is None:
        child = edge.children[tr.observation] = SearchNode()
    value = tr.reward + config.discount * simulate(
        model, tr.next_state, child, depth_remaining - 1, config, rng
    )
    node.visit_count += 1
    edge.visit_count += 1
    edge.value_sum += value
    return value


def best_action(node: SearchNode, actions: Sequence[Action]) -> Action:
    best, best_q = None, -math.inf
    for a in actions:
        e = node.edges.get(a)
        if e is not None and e.visit_count and e.q > best_q:
            best, best_q = a, e.q
    if best is None:
        raise SearchError("no action was tried successfully at the root")
    return best


def search(
    model: GenerativeModel,
    root_belief: Callable[[random.Random], Any],
    config: SolverConfig,
    tree: SearchTree | None = None,
    rng: random.Random | None = None,
) -> tuple[Action, SearchDiagnostics]:
    """Run simulations until the simulation cap or the time budget, whichever first.

    ``tree`` is grown in place when given, so successive calls accumulate.
    ``rng`` defaults to a fresh generator seeded from ``config.rng_seed``.
    """
    config.validate()
    tree = tree if tree is not None else SearchTree()
    rng = rng if rng is not None else random.Random(config.rng_seed)
    root = tree.root
    root_state = root_belief(rng)
    actions = model.legal_actions(root_state)
    if not actions:
        raise SearchError("no legal action at the root")
    root.expanded = True

    diag = SearchDiagnostics()
    start = time.perf_counter()
    deadline = start + config.time_budget
    while diag.simulations + diag.failed_simulations < config.max_simulations:
        state = root_state if diag.simulations == 0 else root_belief(rng)
        try:
            simulate(model, state, root, config.max_depth, config, rng)
        except SimulationFailed:
            diag.failed_simulations += 1
        else:
            diag.simulations += 1
        if time.perf_counter() >= deadline:
            break
    diag.wall_time = time.perf_counter() - start
    diag.root_visits = root.visit_count
    diag.root_q = root.q_values()
    diag.root_n = {a: e.visit_count for a, e in root.edges.items()}
    return best_action(root, actions), diag


def check_tree(node: SearchNode, q_low: float = -math.inf, q_high: float = math.inf) -> list[str]:
    """Walk the tree and report bookkeeping violations (empty list when sound)."""
    problems: list[str] = []
    stack: list[tuple[tuple, SearchNode]] = [((), node)]
    tol = 1e-9 * max(1.0, abs(q_low), abs(q_high))
    while stack:
        path, n = stack.pop()
        total = sum(e.visit_count for e in n.edges.values())
        if n.visit_count != total:
            problems.append(f"{path}: N(h)={n.visit_count} but sum N(h,a)={total}")
        for a, e in n.edges.items():
            if e.visit_count and not q_low - tol <= e.q <= q_high + tol:
                problems.append(f"{path}: Q(h,{a!r})={e.q} outside [{q_low}, {q_high}]")
            for o, child in e.children.items():
                stack.append((path + ((a, o),), child))
    return problems
