"""Task definitions and fitness accounting for navigation and foraging."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import neuro


class TaskKind(Enum):
    NAVIGATION = "navigation"
    FORAGING = "foraging"

    @classmethod
    def from_token(cls, token: str) -> "TaskKind":
        try:
            return cls(token)
        except ValueError:
            raise ValueError(f"unknown task {token!r}; expected navigation or foraging") from None

    @property
    def n_inputs(self) -> int:
        return neuro.NAV_INPUTS if self is TaskKind.NAVIGATION else neuro.FORAGING_INPUTS

    @property
    def genome_length(self) -> int:
        return neuro.genome_length(self.n_inputs)

    @property
    def uses_food(self) -> bool:
        return self is TaskKind.FORAGING


def navigation_step_fitness(v_trans: float, v_rot: float, proximity: np.ndarray) -> float:
    """Per-step reward for fast, straight, obstacle-free motion.

    v_trans * (1 - |v_rot|) * min(proximity); signed, so reversing scores
    negatively.
    """
    return float(v_trans * (1.0 - abs(v_rot)) * np.min(proximity))


def foraging_step_fitness(items_collected: int) -> float:
    """Per-step reward for foraging is simply the pickup count."""
    if items_collected < 0:
        raise ValueError("pickup count cannot be negative")
    return float(items_collected)


def swarm_fitness(per_agent_fitness: np.ndarray) -> float:
    """Swarm-level fitness at one generation: the plain sum over agents."""
    return float(np.sum(per_agent_fitness))


@dataclass
class RunTrace:
    """Per-generation swarm fitness series for one run; input to all measures."""

    swarm_fitness: list[float] = field(default_factory=list)
    method: str = ""
    seed: int = 0

    def __len__(self) -> int:
        return len(self.swarm_fitness)
