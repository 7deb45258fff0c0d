"""Multifactorial bookkeeping: unified search space, factorial costs and
ranks, scalar fitness and skill factors.

A unified individual is a permutation of ``{1..d_max}`` shared by all K
tasks; evaluating it on task k first decodes the genome by keeping the
labels ``<= dimension_k`` in genome order. Task indices are 1-based in the
public API (task k drives instance ``problem.tasks[k - 1]``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .tsplib import TspInstance, tour_length

__all__ = [
    "MultitaskProblem",
    "UnifiedIndividual",
    "EvalCounter",
    "InvariantViolation",
    "decode",
    "evaluate_all",
    "compute_factorial_ranks",
    "assign_scalar_fitness_and_skill",
    "initialize_population",
    "UNEVALUATED",
]

#: Factorial-cost sentinel for tasks an individual was never evaluated on.
UNEVALUATED = np.inf


class InvariantViolation(RuntimeError):
    """An engine runtime invariant was broken (bug guard, not user error)."""


@dataclass(eq=False)
class MultitaskProblem:
    """An ordered bundle of K tasks sharing one unified permutation space.

    Task order is fixed for the lifetime of a run; task k (1-based) is
    ``tasks[k - 1]``. ``d_max`` is the largest task dimension and the length
    of every unified genome.
    """

    tasks: tuple[TspInstance, ...]

    def __post_init__(self) -> None:
        self.tasks = tuple(self.tasks)
        if len(self.tasks) < 1:
            raise ValueError("a multitask problem needs at least one task")
        self._dims = np.array([t.dimension for t in self.tasks], dtype=np.int64)
        # padded (K, d_max, d_max) stack so compiled loops can index any task
        dmax = int(self._dims.max())
        dist = np.zeros((len(self.tasks), dmax, dmax), dtype=np.int64)
        for k, t in enumerate(self.tasks):
            dist[k, :t.dimension, :t.dimension] = t.distance_matrix
        self._dist = dist

    @property
    def k(self) -> int:
        return len(self.tasks)

    @property
    def d_max(self) -> int:
        return int(self._dims.max())

    @property
    def dims(self) -> np.ndarray:
        """Per-task dimensions D_k as an int64 array (index 0 = task 1)."""
        return self._dims

    @property
    def task_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tasks)


@dataclass
class UnifiedIndividual:
    """One member of the unified population with its multitask bookkeeping.

    ``factorial_costs[k-1]`` is the cost on task k (``UNEVALUATED`` when the
    task was never evaluated), ``factorial_ranks`` the 1-based rank per task
    once a population has been ranked, ``scalar_fitness`` the reciprocal of
    the best rank and ``skill_factor`` the 1-based task index on which the
    individual ranks best.
    """

    genome: np.ndarray
    factorial_costs: np.ndarray
    factorial_ranks: np.ndarray | None = None
    scalar_fitness: float | None = None
    skill_factor: int | None = None

    def validate(self) -> None:
        n = self.genome.size
        counts = np.bincount(self.genome, minlength=n + 1)[1:]
        if not (counts == 1).all():
            raise ValueError("genome is not a permutation of 1..d_max")
        if self.scalar_fitness is not None and self.factorial_ranks is not None:
            expected = 1.0 / self.factorial_ranks.min()
            if abs(self.scalar_fitness - expected) > 1e-12:
                raise ValueError("scalar fitness inconsistent with ranks")


@dataclass
class EvalCounter:
    """Budget accounting: one unit per decode-and-measure of one task."""

    count: int = 0

    def add(self, n: int) -> None:
        self.count += n


def decode(genome, k: int, problem: MultitaskProblem) -> np.ndarray:
    """Project a unified genome onto task k (1-based).

    Keeps the labels ``<= D_k`` in genome order; the result is a permutation
    of ``{1..D_k}``.
    """
    if not 1 <= k <= problem.k:
        raise ValueError(f"task index {k} outside 1..{problem.k}")
    g = np.ascontiguousarray(genome, dtype=np.int64)
    dk = int(problem.dims[k - 1])
    out = np.empty(dk, dtype=np.int64)
    m = _kernels.decode_into(g, dk, out)
    if m != dk:
        raise ValueError("genome is not a valid unified permutation "
                         f"(found {m} labels <= {dk})")
    return out


def evaluate_all(genome, problem: MultitaskProblem,
                 counter: EvalCounter | None = None) -> np.ndarray:
    """Factorial costs of a genome on every task (K evaluation units)."""
    costs = np.empty(problem.k, dtype=np.float64)
    for k in range(1, problem.k + 1):
        costs[k - 1] = tour_length(problem.tasks[k - 1], decode(genome, k, problem))
    if counter is not None:
        counter.add(problem.k)
    return costs


def compute_factorial_ranks(costs) -> np.ndarray:
    """1-based factorial ranks per task for a (P, K) cost matrix.

    Rank 1 is the lowest cost; ties break by original population order;
    ``UNEVALUATED`` entries sort last. Each column of the result is a
    permutation of 1..P.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim == 1:
        costs = costs[:, None]
    P = costs.shape[0]
    ranks = np.empty_like(costs, dtype=np.int64)
    for k in range(costs.shape[1]):
        order = np.argsort(costs[:, k], kind="stable")
        ranks[order, k] = np.arange(1, P + 1)
    return ranks


def assign_scalar_fitness_and_skill(ranks) -> tuple[np.ndarray, np.ndarray]:
    """Scalar fitness and 1-based skill factors from a (P, K) rank matrix.

    ``phi = 1 / min_k rank``. The skill factor is the arg-min task; when
    several tasks tie, the individual goes to the tied task currently having
    the fewest holders (then the lowest task index), scanning the population
    in order, which keeps the initial allocation balanced across tasks.
    """
    ranks = np.ascontiguousarray(ranks, dtype=np.int64)
    if ranks.ndim == 1:
        ranks = ranks[:, None]
    phi, skill0 = _kernels.assign_skill_balanced(ranks)
    return phi, skill0 + 1


def initialize_population(problem: MultitaskProblem, population_size: int,
                          rng: np.random.Generator,
                          counter: EvalCounter | None = None,
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Uniform random unified genomes with full K-task evaluation.

    Returns ``(genomes, costs)`` of shapes (P, d_max) and (P, K); consumes
    ``P * K`` evaluation units.
    """
    genomes = np.empty((population_size, problem.d_max), dtype=np.int64)
    costs = np.empty((population_size, problem.k), dtype=np.float64)
    for p in range(population_size):
        genomes[p] = rng.permutation(problem.d_max) + 1
        costs[p] = evaluate_all(genomes[p], problem, counter)
    return genomes, costs
