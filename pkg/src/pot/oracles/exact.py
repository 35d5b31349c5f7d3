"""Oracles grounded in the brute-force solver.

The latent usefulness of a subproblem is its solvability; the exact oracle
reports it faithfully and the noisy oracle flips it with a fixed probability.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .. import game24
from ..errors import OracleExhausted
from ..game24 import PuzzleState
from ..pomdp import Thought, ValueLabel
from .base import point_mass


@lru_cache(maxsize=1 << 16)
def _partition(subproblem: PuzzleState) -> tuple[tuple[Thought, ...], tuple[Thought, ...]]:
    """Thoughts with solvable and unsolvable results, each in legal_moves order."""
    good, bad = [], []
    for m, nxt in game24.successors(subproblem):
        (good if game24.solvable(nxt) else bad).append(Thought(m, nxt))
    return tuple(good), tuple(bad)


class ExactOracle:
    """``epsilon`` is the chance a sampled thought comes from the unsolvable moves."""

    def __init__(self, epsilon: float = 0.25):
        if not 0 <= epsilon <= 1:
            raise ValueError("epsilon must be in [0, 1]")
        self.epsilon = epsilon

    def propose_thought(
        self, subproblem: PuzzleState, mode: str = "greedy", rng: random.Random | None = None, attempt: int = 0
    ) -> Thought:
        good, bad = _partition(subproblem)
        if not good and not bad:
            raise OracleExhausted(f"no legal move from {{{subproblem}}}")
        if mode == "greedy":
            return good[0] if good else bad[0]
        rng = rng or random.Random()
        if not good:
            return rng.choice(bad)
        if bad and rng.random() < self.epsilon:
            return rng.choice(bad)
        return rng.choice(good)

    def value_label(self, subproblem: PuzzleState) -> dict[ValueLabel, float]:
        return point_mass(ValueLabel.SURE if game24.solvable(subproblem) else ValueLabel.IMPOSSIBLE)

    def evaluate_trajectory(self, problem: PuzzleState, trajectory: Sequence[Thought]) -> float:
        try:
            final = game24.replay(problem, (t.move for t in trajectory))
        except game24.IllegalMoveError:
            return 0.0
        return 1.0 if game24.is_success(final) else 0.0


@dataclass(frozen=True)
class NoiseSpec:
    flip_probability: float = 0.0

    def __post_init__(self):
        if not 0 <= self.flip_probability < 1:
            raise ValueError("flip_probability must be in [0, 1)")


class NoisyOracle(ExactOracle):
    """Exact oracle whose value label is flipped to the opposite extreme.

    The label is returned as a distribution; the caller's seeded generator
    draws from it, so the oracle holds no random state of its own.
    """

    _FLIP = {ValueLabel.SURE: ValueLabel.IMPOSSIBLE, ValueLabel.IMPOSSIBLE: ValueLabel.SURE}

    def __init__(self, noise: NoiseSpec | float = NoiseSpec(), epsilon: float = 0.25):
        super().__init__(epsilon)
        self.noise = noise if isinstance(noise, NoiseSpec) else NoiseSpec(noise)

    def value_label(self, subproblem: PuzzleState) -> dict[ValueLabel, float]:
        exact = super().value_label(subproblem)
        p = self.noise.flip_probability
        out = {label: 0.0 for label in exact}
        for label, mass in exact.items():
            out[label] += (1 - p) * mass
            out[self._FLIP.get(label, label)] += p * mass
        return out
