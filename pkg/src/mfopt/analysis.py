"""Post-run analysis: transfer-matrix aggregation, Wilcoxon rank-sum
comparison, and best-solution complementarity.

All functions here are pure and operate on immutable run outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .tsplib import TspInstance

__all__ = [
    "Z_CRITICAL_95",
    "TransferLedger",
    "aggregate_transfer",
    "pair_intensities",
    "WilcoxonResult",
    "wilcoxon_rank_sum",
    "ComparisonOutcome",
    "compare_task_costs",
    "best_solution_overlap",
]

#: One-sided 95% critical value; a comparison is significant when z < this.
Z_CRITICAL_95 = -1.64


@dataclass(eq=False)
class TransferLedger:
    """Per-run positive-transfer episode counts between skill factors.

    ``counts[src][dst]`` is the number of crossover-winning replacements in
    which the mating neighbour held skill factor ``src + 1`` and the replaced
    cell ``dst + 1``. The diagonal holds intra-task exchanges.
    """

    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError("ledger counts must be a square matrix")
        if (self.counts < 0).any():
            raise ValueError("ledger counts must be non-negative")

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    def total(self) -> int:
        return int(self.counts.sum())

    def pair_intensity(self, i: int, j: int) -> int:
        """Both-direction exchange count between tasks ``i`` and ``j`` (1-based)."""
        return int(self.counts[i - 1, j - 1] + self.counts[j - 1, i - 1])


def aggregate_transfer(ledgers: Sequence[TransferLedger | np.ndarray]) -> np.ndarray:
    """Element-wise mean episode counts over a collection of runs."""
    if len(ledgers) == 0:
        raise ValueError("need at least one ledger to aggregate")
    mats = [np.asarray(l.counts if isinstance(l, TransferLedger) else l,
                       dtype=np.float64) for l in ledgers]
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise ValueError("ledgers disagree on the number of tasks")
    return np.mean(mats, axis=0)


def pair_intensities(matrix: np.ndarray) -> list[tuple[tuple[int, int], float]]:
    """Symmetrized inter-task pair intensities, strongest first.

    Returns ``((i, j), counts[i][j] + counts[j][i])`` for every 1-based pair
    ``i < j``, sorted by descending intensity (ties by pair order).
    """
    m = np.asarray(matrix, dtype=np.float64)
    k = m.shape[0]
    pairs = [((i + 1, j + 1), float(m[i, j] + m[j, i]))
             for i in range(k) for j in range(i + 1, k)]
    return sorted(pairs, key=lambda e: (-e[1], e[0]))


class WilcoxonResult(NamedTuple):
    z: float
    p: float
    u: float


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ascending ranks with ties assigned the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    sv = values[order]
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < sv.size:
        j = i
        while j + 1 < sv.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_rank_sum(a, b) -> WilcoxonResult:
    """One-sided Wilcoxon rank-sum (Mann-Whitney) test.

    Alternative hypothesis: ``a`` is stochastically smaller than ``b`` (on a
    minimization benchmark, solver A better). Midranks handle ties; the
    normal approximation uses the tie-corrected variance and a 0.5 continuity
    correction:

        R_a  = rank sum of ``a`` over the pooled sample (size N = n + m)
        U    = R_a - n(n+1)/2          (#{a_i > b_j} + half-ties)
        z    = (R_a - n(N+1)/2 -/+ 0.5) / sqrt(nm/12 * (N+1 - T/(N(N-1))))
        T    = sum of (t^3 - t) over tie groups
        p    = Phi(z)

    ``z < Z_CRITICAL_95`` is significance at the 95% level. Degenerate
    all-equal samples return ``(0.0, 0.5, nm/2)`` by convention.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, m = a.size, b.size
    if n < 2 or m < 2:
        raise ValueError("need at least two observations per sample")
    N = n + m
    combined = np.concatenate([a, b])
    ranks = _midranks(combined)
    r_a = float(ranks[:n].sum())
    u = r_a - n * (n + 1) / 2.0

    _, counts = np.unique(combined, return_counts=True)
    c = counts.astype(np.float64)
    tie_term = float((c ** 3 - c).sum())
    var = n * m / 12.0 * ((N + 1) - tie_term / (N * (N - 1.0)))
    if var <= 0.0:
        return WilcoxonResult(0.0, 0.5, u)

    num = r_a - n * (N + 1) / 2.0
    if num > 0.0:
        num -= 0.5
    elif num < 0.0:
        num += 0.5
    z = num / math.sqrt(var)
    p = 0.5 * math.erfc(-z / math.sqrt(2.0))
    return WilcoxonResult(z, p, u)


@dataclass
class ComparisonOutcome:
    """Per-instance summary of a two-solver comparison.

    ``mean``/``best``/``std`` are keyed by solver id; ``z``/``p`` test the
    first solver's costs against the second one's (one-sided, first smaller).
    """

    instance: str
    mean: dict[str, float]
    best: dict[str, float]
    std: dict[str, float]
    z: float
    p: float
    significant: bool


def compare_task_costs(instance: str, costs_a, costs_b,
                       solver_a: str = "mfcga",
                       solver_b: str = "mfea") -> ComparisonOutcome:
    """Build a ComparisonOutcome from two per-run cost samples."""
    ca = np.asarray(costs_a, dtype=np.float64)
    cb = np.asarray(costs_b, dtype=np.float64)
    z, p, _ = wilcoxon_rank_sum(ca, cb)
    return ComparisonOutcome(
        instance=instance,
        mean={solver_a: float(ca.mean()), solver_b: float(cb.mean())},
        best={solver_a: float(ca.min()), solver_b: float(cb.min())},
        std={solver_a: float(ca.std(ddof=0)), solver_b: float(cb.std(ddof=0))},
        z=z,
        p=p,
        significant=z < Z_CRITICAL_95,
    )


def _induced_cyclic_edges(instance: TspInstance, tour,
                          shared: frozenset) -> set[frozenset]:
    seq = [(float(instance.coords[c - 1, 0]), float(instance.coords[c - 1, 1]))
           for c in tour]
    seq = [pt for pt in seq if pt in shared]
    s = len(seq)
    if s < 2:
        return set()
    if s == 2:
        return {frozenset((seq[0], seq[1]))}
    return {frozenset((seq[i], seq[(i + 1) % s])) for i in range(s)}


def best_solution_overlap(a: TspInstance, tour_a,
                          b: TspInstance, tour_b) -> float:
    """Edge agreement between two best tours on their shared cities.

    Cities are matched across instances by exact coordinate equality; each
    tour is projected onto the shared cities preserving its cyclic order, and
    the score is ``100 * |common undirected edges| / min(edge counts)``.
    Returns 0.0 when fewer than two cities are shared.
    """
    shared = a.coord_set() & b.coord_set()
    if len(shared) < 2:
        return 0.0
    edges_a = _induced_cyclic_edges(a, tour_a, shared)
    edges_b = _induced_cyclic_edges(b, tour_b, shared)
    denom = min(len(edges_a), len(edges_b))
    if denom == 0:
        return 0.0
    return 100.0 * len(edges_a & edges_b) / denom
