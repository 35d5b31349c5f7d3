from __future__ import annotations

import random
from typing import Mapping, Protocol, Sequence

from ..game24 import PuzzleState
from ..pomdp import LABELS, Thought, ValueLabel


class Oracle(Protocol):
    """Stand-in for the language model's three roles.

    Implementations must tolerate concurrent calls from several solver
    instances.
    """

    def propose_thought(
        self, subproblem: PuzzleState, mode: str, rng: random.Random, attempt: int = 0
    ) -> Thought:
        """One next step; ``mode`` is ``"sample"`` or ``"greedy"``."""

    def value_label(self, subproblem: PuzzleState) -> Mapping[ValueLabel, float]:
        """Probability of each label; sums to 1."""

    def evaluate_trajectory(self, problem: PuzzleState, trajectory: Sequence[Thought]) -> float:
        """Probability that the trajectory solves ``problem``."""


def point_mass(label: ValueLabel) -> dict[ValueLabel, float]:
    return {lab: 1.0 if lab is label else 0.0 for lab in LABELS}


def normalize(weights: Mapping[ValueLabel, float]) -> dict[ValueLabel, float]:
    total = sum(weights.get(lab, 0.0) for lab in LABELS)
    if not total > 0:
        raise ValueError("no probability mass on any label")
    return {lab: weights.get(lab, 0.0) / total for lab in LABELS}
