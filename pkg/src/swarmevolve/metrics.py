"""Swarm-performance measures over fitness traces and pairwise rank statistics.

All trace arguments are plain sequences of per-generation swarm fitness
values. Window arithmetic uses epsilon-guarded floor/ceil so that, at the
default fractions, the fixed-budget generation is exactly the first
generation of the tail-average window for every trace length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MW_EXACT_LIMIT = 8  # exact p-value whenever min(n1, n2) is below this
_EPS = 1e-9


def _check_nonempty(trace) -> np.ndarray:
    values = np.asarray(trace, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("measure requires a non-empty fitness trace")
    return values


def tail_window_start(n_generations: int, tail_fraction: float = 0.08) -> int:
    """First generation of the tail window averaged by avg_accumulated."""
    count = max(1, math.ceil(tail_fraction * n_generations - _EPS))
    return n_generations - min(count, n_generations)


def avg_accumulated(trace, tail_fraction: float = 0.08) -> float:
    """Mean swarm fitness over the final ceil(fraction * G) generations."""
    values = _check_nonempty(trace)
    return float(values[tail_window_start(len(values), tail_fraction):].mean())


def fixed_budget(trace, budget_fraction: float = 0.92) -> float:
    """Swarm fitness at generation floor(fraction * G), clamped to the last one."""
    values = _check_nonempty(trace)
    idx = min(math.floor(budget_fraction * len(values) + _EPS), len(values) - 1)
    return float(values[idx])


def time_to_target(trace, target: float) -> int:
    """First generation reaching the target, or the last generation if never."""
    values = _check_nonempty(trace)
    hits = np.nonzero(values >= target)[0]
    return int(hits[0]) if hits.size else len(values) - 1


def accumulated_above(trace, target: float) -> float:
    """Sum of the excess of swarm fitness over the target, zero when never reached."""
    values = _check_nonempty(trace)
    return float(np.maximum(values - target, 0.0).sum())


def compute_target(all_traces, fraction: float = 0.8) -> float:
    """Target fitness: fraction of the maximum over every generation of every trace."""
    best = None
    for trace in all_traces:
        values = np.asarray(trace, dtype=float)
        if values.size:
            peak = float(values.max())
            best = peak if best is None else max(best, peak)
    if best is None:
        raise ValueError("target needs at least one non-empty trace")
    return fraction * best


@dataclass(frozen=True)
class MeasureSet:
    """The four per-run summary measures."""

    f_c: float  # average accumulated swarm fitness (tail window mean)
    f_b: float  # fixed budget swarm fitness
    g_f: int  # first generation reaching the target
    f_a: float  # accumulated fitness above the target

    @classmethod
    def from_trace(cls, trace, target: float, tail_fraction: float = 0.08,
                   budget_fraction: float = 0.92) -> "MeasureSet":
        return cls(
            f_c=avg_accumulated(trace, tail_fraction),
            f_b=fixed_budget(trace, budget_fraction),
            g_f=time_to_target(trace, target),
            f_a=accumulated_above(trace, target),
        )

    def value(self, name: str) -> float:
        return getattr(self, name)


MEASURE_NAMES = ("f_c", "f_b", "g_f", "f_a")


@dataclass(frozen=True)
class ComparisonCell:
    """One pairwise test: (method pair, measure) with its U statistic and p-value."""

    method_a: str
    method_b: str
    measure: str
    u: float
    p: float
    significant: bool  # two-sided p < 0.01


def median_curve(traces) -> np.ndarray:
    """Elementwise median across traces, truncated to the shortest one."""
    if len(traces) == 0:
        raise ValueError("median curve needs at least one trace")
    n = min(len(t) for t in traces)
    stacked = np.array([np.asarray(t, dtype=float)[:n] for t in traces])
    return np.median(stacked, axis=0)


# ---------------------------------------------------------------------------
# Mann-Whitney U

def _midranks(pooled: np.ndarray) -> np.ndarray:
    """Ranks 1..N with tied values sharing the mean of their rank block."""
    values, inverse, counts = np.unique(pooled, return_inverse=True, return_counts=True)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return (starts + (counts + 1) / 2.0)[inverse]


def _u_statistic(a: np.ndarray, b: np.ndarray) -> float:
    ranks = _midranks(np.concatenate([a, b]))
    r1 = ranks[: len(a)].sum()
    return float(r1 - len(a) * (len(a) + 1) / 2.0)


def _exact_deviation_sf(doubled_ranks: np.ndarray, n1: int, dev: float) -> float:
    """P(|U - n1*n2/2| >= dev) under the exact permutation distribution.

    Counts size-n1 subsets of the pooled (doubled, hence integer) midranks by
    rank sum with a subset-sum DP, which handles ties and stays cheap for the
    small group sizes the exact path is used for.
    """
    n = len(doubled_ranks)
    n2 = n - n1
    total_sum = int(doubled_ranks.sum())
    dp = np.zeros((n1 + 1, total_sum + 1))
    dp[0, 0] = 1.0
    for r in doubled_ranks:
        r = int(r)
        for j in range(n1, 0, -1):
            dp[j, r:] += dp[j - 1, : total_sum + 1 - r]
    counts = dp[n1]
    sums = np.arange(total_sum + 1)
    u_values = sums / 2.0 - n1 * (n1 + 1) / 2.0
    deviations = np.abs(u_values - n1 * n2 / 2.0)
    mask = deviations >= dev - 1e-9
    return float(counts[mask].sum() / counts.sum())


def _normal_p(u: float, n1: int, n2: int, ranks: np.ndarray) -> float:
    """Two-sided normal approximation with midrank tie correction and continuity."""
    n = n1 + n2
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float((counts.astype(float) ** 3 - counts).sum())
    correction = 1.0 - tie_term / (n**3 - n) if n > 1 else 0.0
    sd = math.sqrt(correction * n1 * n2 * (n + 1) / 12.0)
    if sd == 0.0:
        return 1.0
    z = max(abs(u - n1 * n2 / 2.0) - 0.5, 0.0) / sd
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def mann_whitney_u(sample_a, sample_b, method: str = "auto") -> tuple[float, float]:
    """Two-sided Mann-Whitney test; returns (U of sample_a, p-value).

    U counts pairs where sample_a exceeds sample_b (half credit for ties),
    so U(a, b) + U(b, a) = n1 * n2. The p-value is exact (full enumeration
    of rank assignments) when the smaller sample has fewer than 8 values,
    and a tie-corrected, continuity-corrected normal approximation
    otherwise; `method` can force "exact" or "normal".
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    if np.all(pooled == pooled[0]):
        return u, 1.0
    if method == "exact" or (method == "auto" and min(n1, n2) < MW_EXACT_LIMIT):
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        dev = abs(u - n1 * n2 / 2.0)
        return u, _exact_deviation_sf(doubled, n1, dev)
    return u, _normal_p(u, n1, n2, ranks)


def pairwise_comparisons(
    samples_by_method: dict[str, dict[str, list[float]]],
    method_order,
    alpha: float = 0.01,
) -> list[ComparisonCell]:
    """All (method pair, measure) tests, pairs oriented by `method_order`."""
    cells = []
    methods = [m for m in method_order if m in samples_by_method]
    for i, m_a in enumerate(methods):
        for m_b in methods[i + 1:]:
            for measure in MEASURE_NAMES:
                u, p = mann_whitney_u(samples_by_method[m_a][measure],
                                      samples_by_method[m_b][measure])
                cells.append(ComparisonCell(m_a, m_b, measure, u, p, p < alpha))
    return cells
