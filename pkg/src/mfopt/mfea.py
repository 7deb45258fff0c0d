"""Canonical multifactorial evolutionary algorithm (generational baseline).

Each generation draws P/2 random parent pairs and produces P offspring. A
pair crosses over (order crossover, both children) when the parents share a
skill factor or an independent uniform draw falls below the crossover
probability; otherwise both parents are copied. Every child is assigned its
evaluation task (a uniformly chosen parent's skill factor for crossover
children, the copying parent's own for copies), then with the mutation
probability receives one improving 2-opt move on its tour for that task,
and is evaluated on that task only. Survival is elitist on scalar fitness
over the combined 2P pool, which also refreshes every survivor's scalar
fitness and skill factor.

A crossover child of mixed-skill parents that survives into the next
population counts as one positive transfer episode from the non-evaluating
parent's task to the task the child was evaluated on.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .analysis import TransferLedger
from .core import (InvariantViolation, MultitaskProblem, UnifiedIndividual,
                   assign_scalar_fitness_and_skill, compute_factorial_ranks,
                   initialize_population)
from .mfcga import ConfigurationError
from .results import RunResults, TaskResult

__all__ = ["MfeaConfig", "Mfea", "scalar_fitness_survival"]


@dataclass
class MfeaConfig:
    """Run parameters for the generational baseline.

    The population size must be even (pairs produce two children each). The
    budget counts task evaluations: ``P * K`` for initialization plus P per
    generation; the loop stops before a generation would overrun it.
    """

    seed: int
    population_size: int = 200
    crossover_probability: float = 0.9
    mutation_probability: float = 0.1
    evaluation_budget: int = 500_000

    def __post_init__(self) -> None:
        if self.population_size < 2 or self.population_size % 2:
            raise ConfigurationError("population size must be even and >= 2")
        if not 0.0 <= self.crossover_probability <= 1.0:
            raise ConfigurationError("crossover probability outside [0, 1]")
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise ConfigurationError("mutation probability outside [0, 1]")
        if self.evaluation_budget < 1:
            raise ConfigurationError("evaluation budget must be positive")


def scalar_fitness_survival(pool_costs, population_size: int,
                            ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Elitist scalar-fitness selection over a combined parent+offspring pool.

    Recomputes factorial ranks per task over the pool (unevaluated entries
    rank last, ties by stable pool order), reassigns scalar fitness and skill
    factors, and returns ``(kept pool indices, phi, skill)`` where the kept
    indices are the best ``population_size`` rows by descending scalar
    fitness, ties resolved by pool order (parents first). ``phi``/``skill``
    cover the whole pool; ``skill`` is 1-based.
    """
    pool_costs = np.asarray(pool_costs, dtype=np.float64)
    ranks = compute_factorial_ranks(pool_costs)
    phi, skill = assign_scalar_fitness_and_skill(ranks)
    order = np.argsort(-phi, kind="stable")
    return order[:population_size], phi, skill


class Mfea:
    """One engine instance owns one population; ``run()`` may be called once."""

    SOLVER_ID = "mfea"

    def __init__(self, problem: MultitaskProblem, config: MfeaConfig):
        if int(problem.dims.min()) < 2:
            raise ConfigurationError("every task needs at least two cities")
        if config.evaluation_budget < config.population_size * problem.k:
            raise ConfigurationError(
                f"budget {config.evaluation_budget} cannot cover the "
                f"initial {config.population_size} x {problem.k} evaluations")
        self.problem = problem
        self.config = config
        self._rng = np.random.default_rng(config.seed)
        self._initialized = False
        self._ran = False

    def initialize(self) -> None:
        if self._initialized:
            raise RuntimeError("engine already initialized")
        P = self.config.population_size
        K = self.problem.k
        D = self.problem.d_max

        self._genomes, self._costs = initialize_population(
            self.problem, P, self._rng)
        self._evals = P * K
        ranks = compute_factorial_ranks(self._costs)
        phi, skill1 = assign_scalar_fitness_and_skill(ranks)
        self._phi = phi
        self._skill = skill1 - 1

        self._best_cost = np.empty(K, dtype=np.int64)
        self._best_tour = np.zeros((K, D), dtype=np.int64)
        for k in range(K):
            p = int(np.argmin(self._costs[:, k]))
            self._best_cost[k] = int(self._costs[p, k])
            dk = int(self.problem.dims[k])
            out = np.empty(dk, dtype=np.int64)
            _kernels.decode_into(self._genomes[p], dk, out)
            self._best_tour[k, :dk] = out

        self._trajectory: list[tuple[int, np.ndarray]] = [
            (self._evals, self._best_cost.copy())]
        self._ledger = np.zeros((K, K), dtype=np.int64)

        self._off_genomes = np.empty((P, D), dtype=np.int64)
        self._off_costs = np.empty((P, K), dtype=np.float64)
        self._off_tau = np.empty(P, dtype=np.int64)
        self._off_src = np.empty(P, dtype=np.int64)
        self._off_iscx = np.empty(P, dtype=np.bool_)
        self._seen = np.zeros(D + 1, dtype=np.bool_)
        self._tour_buf = np.empty(D, dtype=np.int64)
        self._pos_buf = np.empty(D, dtype=np.int64)
        self._initialized = True

    def run_generation(self) -> None:
        """Produce P offspring, evaluate selectively, apply elitist survival."""
        if not self._initialized:
            raise RuntimeError("initialize() first")
        P = self.config.population_size
        K = self.problem.k
        D = self.problem.d_max
        rng = self._rng
        half = P // 2

        # randomness for the whole generation, fixed field order
        r_pa = rng.integers(0, P, size=half)
        r_pb = rng.integers(0, P - 1, size=half)
        r_pb = r_pb + (r_pb >= r_pa)
        r_gate = rng.random(half)
        r_taupick = rng.integers(0, 2, size=P)
        r_mutgate = rng.random(P)
        a = rng.integers(0, D, size=P)
        b = rng.integers(0, D - 1, size=P)
        b = b + (b >= a)
        r_oxlo, r_oxhi = np.minimum(a, b), np.maximum(a, b)
        r_mutorigin = rng.integers(0, D, size=P)

        used = _kernels.mfea_offspring(
            self._genomes, self._skill, self.problem._dist, self.problem.dims,
            r_pa, r_pb, r_gate, self.config.crossover_probability,
            r_taupick, r_mutgate, self.config.mutation_probability,
            r_oxlo, r_oxhi, r_mutorigin,
            self._off_genomes, self._off_costs, self._off_tau, self._off_src,
            self._off_iscx,
            self._best_cost, self._best_tour, self._seen, self._tour_buf,
            self._pos_buf)
        self._evals += int(used)

        finite_per_child = np.isfinite(self._off_costs).sum(axis=1)
        if not (finite_per_child == 1).all():
            raise InvariantViolation("offspring must have exactly one finite "
                                     "factorial cost")

        prev_min = self._population_minima()
        pool_genomes = np.vstack([self._genomes, self._off_genomes])
        pool_costs = np.vstack([self._costs, self._off_costs])
        keep, phi, skill1 = scalar_fitness_survival(pool_costs, P)

        surviving_offspring = keep[keep >= P] - P
        for c in surviving_offspring:
            if self._off_iscx[c]:
                self._ledger[self._off_src[c], self._off_tau[c]] += 1

        self._genomes = pool_genomes[keep]
        self._costs = pool_costs[keep]
        self._phi = phi[keep]
        self._skill = skill1[keep] - 1

        new_min = self._population_minima()
        if (new_min > prev_min).any():
            raise InvariantViolation("per-task best cost in the population "
                                     "increased across a generation")
        if self._genomes.shape[0] != P:
            raise InvariantViolation("population size drifted")
        self._trajectory.append((self._evals, self._best_cost.copy()))

    def _population_minima(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.nanmin(np.where(np.isfinite(self._costs),
                                      self._costs, np.nan), axis=0)

    def run(self, case_id: str = "") -> RunResults:
        """Generational loop until the next generation would exceed the budget."""
        if self._ran:
            raise RuntimeError("an engine instance runs once; build a new one")
        t0 = time.perf_counter()
        self.initialize()
        self._ran = True
        P = self.config.population_size
        K = self.problem.k
        budget = self.config.evaluation_budget
        generations = (budget - self._evals) // P
        for _ in range(generations):
            self.run_generation()

        expected = P * K + generations * P
        if self._evals != expected or self._evals > budget:
            raise InvariantViolation(
                f"evaluation accounting broke: used {self._evals}, "
                f"expected {expected} within budget {budget}")

        wall = time.perf_counter() - t0
        tasks = []
        for k in range(K):
            dk = int(self.problem.dims[k])
            traj = [(int(e), int(bc[k])) for e, bc in self._trajectory]
            tasks.append(TaskResult(
                instance=self.problem.tasks[k].name,
                best_cost=int(self._best_cost[k]),
                best_tour=[int(v) for v in self._best_tour[k, :dk]],
                trajectory=traj,
            ))
        meta = {
            "population_size": P,
            "evaluation_budget": budget,
            "crossover_probability": self.config.crossover_probability,
            "mutation_probability": self.config.mutation_probability,
            "trajectory_sample_every": P,
            "mutation": "first-improving-2-opt-move-on-own-task-tour",
            "assortative_gate": "crossover iff skill factors match or "
                                "uniform draw < crossover probability",
            "skill_tie_rule": "fewest-holders-then-lowest-task",
            "rank_tie_rule": "stable-pool-order-parents-first",
            "invariants_checked": True,
        }
        return RunResults(solver=self.SOLVER_ID, test_case=case_id,
                          seed=self.config.seed, tasks=tasks,
                          transfer=self._ledger.copy(),
                          evaluations_used=int(self._evals),
                          metadata=meta, wall_time_s=wall)

    @property
    def evaluations_used(self) -> int:
        return int(self._evals)

    @property
    def transfer_ledger(self) -> TransferLedger:
        return TransferLedger(self._ledger.copy())

    def population(self) -> list[UnifiedIndividual]:
        out = []
        for p in range(self.config.population_size):
            out.append(UnifiedIndividual(
                genome=self._genomes[p].copy(),
                factorial_costs=self._costs[p].copy(),
                scalar_fitness=float(self._phi[p]),
                skill_factor=int(self._skill[p]) + 1,
            ))
        return out
