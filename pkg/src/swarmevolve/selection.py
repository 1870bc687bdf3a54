"""Selection operators over an agent's local genome list.

A local population is a non-empty sequence of (genome, fitness) pairs in
arrival order. All four operators depend on fitness only through its
ordering, and all ties break toward the lowest list index.
"""
from __future__ import annotations

import numpy as np

from .neuro import Genome

Entry = tuple[Genome, float]

METHOD_TOKENS = ("best", "rank", "tournament", "random")


def _require_nonempty(entries) -> None:
    if len(entries) == 0:
        raise ValueError("selection requires a non-empty local population")


def select_best(entries: list[Entry]) -> Genome:
    """Deterministic argmax over fitness; ties go to the earliest entry."""
    _require_nonempty(entries)
    best = max(range(len(entries)), key=lambda i: (entries[i][1], -i))
    return entries[best][0]


def rank_probabilities(n: int) -> np.ndarray:
    """Selection probability of each descending-fitness rank: (n+1-i) / (1+2+...+n)."""
    ranks = np.arange(1, n + 1)
    return (n + 1 - ranks) / (n * (n + 1) / 2)


def select_rank_based(entries: list[Entry], rng: np.random.Generator) -> Genome:
    """Linear rank selection on the fitness-sorted list (stable sort, descending)."""
    _require_nonempty(entries)
    n = len(entries)
    order = sorted(range(n), key=lambda i: -entries[i][1])
    u = rng.random() * (n * (n + 1) / 2)
    acc = 0.0
    for rank, i in enumerate(order, start=1):
        acc += n + 1 - rank
        if u < acc:
            return entries[i][0]
    return entries[order[-1]][0]  # u landed exactly on the total


def select_tournament(entries: list[Entry], k: int, rng: np.random.Generator) -> Genome:
    """Sample k entries without replacement, return the fittest of the sample.

    k is clamped to the population size, so k >= n degenerates to best
    selection and k = 1 to random selection.
    """
    _require_nonempty(entries)
    if k < 1:
        raise ValueError(f"tournament size must be >= 1, got {k}")
    n = len(entries)
    k = min(k, n)
    sampled = rng.choice(n, size=k, replace=False)
    best = min(sampled, key=lambda i: (-entries[i][1], i))
    return entries[best][0]


def select_random(entries: list[Entry], rng: np.random.Generator) -> Genome:
    """Uniform choice, fitness ignored."""
    _require_nonempty(entries)
    return entries[int(rng.integers(len(entries)))][0]


def select(method: str, entries: list[Entry], rng: np.random.Generator, tournament_k: int = 2) -> Genome:
    """Dispatch on a method token: best | rank | tournament | random."""
    if method == "best":
        return select_best(entries)
    if method == "rank":
        return select_rank_based(entries, rng)
    if method == "tournament":
        return select_tournament(entries, tournament_k, rng)
    if method == "random":
        return select_random(entries, rng)
    raise ValueError(f"unknown selection method {method!r}")
