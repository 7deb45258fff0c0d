"""Multifactorial cellular genetic algorithm.

The population lives on a toroidal grid and every individual only ever mates
inside its Moore neighborhood. Cells are updated asynchronously in a fixed
row-major sweep: each update mates the incumbent with one random neighbor
(order crossover) and applies one improving 2-opt move to the incumbent's
own-task tour (identity once the tour is 2-opt optimal), evaluating both
offspring on the cell's own task only. An offspring replaces the incumbent
only when it strictly improves it, so newly injected genetic material
diffuses through the grid immediately. A crossover replacement is a positive
transfer episode from the neighbor's task to the cell's task.

Skill factors are frozen after initialization: a cell is devoted to one task
for the whole run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .analysis import TransferLedger
from .core import (InvariantViolation, MultitaskProblem, UnifiedIndividual,
                   assign_scalar_fitness_and_skill, compute_factorial_ranks,
                   evaluate_all, initialize_population)
from .results import RunResults, TaskResult

__all__ = ["ConfigurationError", "GridTopology", "EngineConfig",
           "default_grid", "moore_neighbors", "StepOutcome", "Mfcga"]


class ConfigurationError(ValueError):
    """Engine configuration cannot be run."""


@dataclass(frozen=True)
class GridTopology:
    """A rows x cols toroidal grid; rows * cols must equal the population size."""

    rows: int
    cols: int

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigurationError("grid dimensions must be positive")

    @property
    def cells(self) -> int:
        return self.rows * self.cols


def default_grid(population_size: int) -> GridTopology:
    """Most-square factorization of the population size (rows <= cols)."""
    best = (1, population_size)
    r = int(np.sqrt(population_size))
    while r >= 1:
        if population_size % r == 0:
            best = (r, population_size // r)
            break
        r -= 1
    return GridTopology(rows=best[0], cols=best[1])


def moore_neighbors(cell: tuple[int, int], grid: GridTopology) -> set[tuple[int, int]]:
    """The 8 surrounding positions of ``cell`` with toroidal wraparound.

    Positions are 1-based ``(row, col)``. Grids narrower than 3 in either
    dimension would wrap a neighbor onto the cell itself and are rejected.
    """
    if grid.rows < 3 or grid.cols < 3:
        raise ConfigurationError(
            f"Moore neighborhoods need at least a 3x3 grid, got "
            f"{grid.rows}x{grid.cols}")
    r, c = cell
    if not (1 <= r <= grid.rows and 1 <= c <= grid.cols):
        raise ValueError(f"cell {cell!r} outside {grid.rows}x{grid.cols} grid")
    out = set()
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            out.add(((r - 1 + dr) % grid.rows + 1, (c - 1 + dc) % grid.cols + 1))
    return out


@dataclass
class EngineConfig:
    """Run parameters for the cellular engine.

    The evaluation budget counts task evaluations (one decode + one tour
    length = 1); initialization costs ``P * K`` units and every cell update
    2 more. A budget of exactly ``P * K`` is legal and yields the statistics
    of the random initial population.
    """

    seed: int
    population_size: int = 200
    grid: GridTopology | None = None
    evaluation_budget: int = 500_000

    def __post_init__(self) -> None:
        if self.population_size < 9:
            raise ConfigurationError("population must fill at least a 3x3 grid")
        if self.grid is None:
            self.grid = default_grid(self.population_size)
        if self.grid.cells != self.population_size:
            raise ConfigurationError(
                f"grid {self.grid.rows}x{self.grid.cols} does not hold "
                f"{self.population_size} individuals")
        if self.grid.rows < 3 or self.grid.cols < 3:
            raise ConfigurationError("grid must be at least 3x3 for Moore "
                                     "neighborhoods")
        if self.evaluation_budget < 1:
            raise ConfigurationError("evaluation budget must be positive")


@dataclass
class StepOutcome:
    """What one cell update did."""

    cell: tuple[int, int]
    winner: str                      # "parent" | "crossover" | "mutation"
    cost_before: float
    cost_after: float
    transfer: tuple[int, int] | None  # (src task, dst task), 1-based


class Mfcga:
    """One engine instance owns one population; a run is sequential.

    ``run()`` drives a fresh engine to budget exhaustion. For finer-grained
    experiments call ``initialize()`` and then ``step_cell`` repeatedly; the
    random draws are consumed per step in a fixed order, so stepping cells in
    row-major order reproduces ``run()`` exactly.
    """

    SOLVER_ID = "mfcga"

    def __init__(self, problem: MultitaskProblem, config: EngineConfig):
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

        grid = config.grid
        P = config.population_size
        nbr = np.empty((P, 8), dtype=np.int64)
        for flat in range(P):
            r, c = divmod(flat, grid.cols)
            cells = moore_neighbors((r + 1, c + 1), grid)
            nbr[flat] = sorted((rr - 1) * grid.cols + (cc - 1) for rr, cc in cells)
        self._nbr_idx = nbr

    # -- state set up ------------------------------------------------------

    def initialize(self) -> None:
        """Random population, full K-task evaluation, skill-factor assignment."""
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
        self._phi0 = phi
        self._skill = skill1 - 1
        self._skill_census = np.bincount(self._skill, minlength=K).copy()

        self._best_cost = np.empty(K, dtype=np.int64)
        self._best_tour = np.zeros((K, D), dtype=np.int64)
        for k in range(K):
            p = int(np.argmin(self._costs[:, k]))
            self._best_cost[k] = int(self._costs[p, k])
            dk = int(self.problem.dims[k])
            out = np.empty(dk, dtype=np.int64)
            _kernels.decode_into(self._genomes[p], dk, out)
            self._best_tour[k, :dk] = out

        budget = self.config.evaluation_budget
        self._sample_every = P
        max_points = budget // self._sample_every + 2
        self._traj_evals = np.zeros(max_points, dtype=np.int64)
        self._traj_cost = np.zeros((max_points, K), dtype=np.int64)
        self._traj_evals[0] = self._evals
        self._traj_cost[0] = self._best_cost
        self._traj_n = 1
        self._next_sample = (self._evals // self._sample_every + 1) * self._sample_every

        self._ledger = np.zeros((K, K), dtype=np.int64)
        self._scratch_cx = np.empty(D, dtype=np.int64)
        self._scratch_mut = np.empty(D, dtype=np.int64)
        self._scratch_seen = np.zeros(D + 1, dtype=np.bool_)
        self._scratch_tour = np.empty(D, dtype=np.int64)
        self._scratch_pos = np.empty(D, dtype=np.int64)
        self._buf_cursor = P  # empty buffer; refilled lazily
        self._initialized = True

    def _refill_draws(self) -> None:
        # one sweep worth of randomness, drawn in a fixed field order
        P = self.config.population_size
        D = self.problem.d_max
        rng = self._rng
        self._r_nbr = rng.integers(0, 8, size=P)
        a = rng.integers(0, D, size=P)
        b = rng.integers(0, D - 1, size=P)
        b = b + (b >= a)
        self._r_oxlo = np.minimum(a, b)
        self._r_oxhi = np.maximum(a, b)
        self._r_mutorigin = rng.integers(0, D, size=P)
        self._buf_cursor = 0

    # -- stepping ----------------------------------------------------------

    def _run_steps(self, start_cell: int, n: int) -> None:
        c = self._buf_cursor
        (self._evals, self._next_sample, self._traj_n) = _kernels.mfcga_sweep(
            self._genomes, self._costs, self._skill, self._nbr_idx,
            self.problem._dist, self.problem.dims,
            self._r_nbr[c:c + n], self._r_oxlo[c:c + n], self._r_oxhi[c:c + n],
            self._r_mutorigin[c:c + n],
            start_cell, n,
            self._evals, self._sample_every, self._next_sample,
            self._best_cost, self._best_tour,
            self._traj_evals, self._traj_cost, self._traj_n,
            self._ledger,
            self._scratch_cx, self._scratch_mut, self._scratch_seen,
            self._scratch_tour, self._scratch_pos)
        self._buf_cursor = c + n

    def step_cell(self, cell: tuple[int, int]) -> StepOutcome:
        """One asynchronous update of the given 1-based (row, col) cell."""
        if not self._initialized:
            raise RuntimeError("initialize() first")
        grid = self.config.grid
        r, c = cell
        if not (1 <= r <= grid.rows and 1 <= c <= grid.cols):
            raise ValueError(f"cell {cell!r} outside the grid")
        flat = (r - 1) * grid.cols + (c - 1)
        if self._buf_cursor >= self.config.population_size:
            self._refill_draws()
        tau = int(self._skill[flat])
        before = float(self._costs[flat, tau])
        ledger_before = self._ledger.copy()
        genome_before = self._genomes[flat].copy()
        self._run_steps(flat, 1)
        after = float(self._costs[flat, tau])
        if after > before:
            raise InvariantViolation("stored cost increased in a cell update")
        delta = np.argwhere(self._ledger > ledger_before)
        if delta.size:
            src, dst = delta[0]
            winner, transfer = "crossover", (int(src) + 1, int(dst) + 1)
        elif not np.array_equal(genome_before, self._genomes[flat]):
            winner, transfer = "mutation", None
        else:
            winner, transfer = "parent", None
        return StepOutcome(cell=cell, winner=winner, cost_before=before,
                           cost_after=after, transfer=transfer)

    # -- full run ----------------------------------------------------------

    def run(self, case_id: str = "") -> RunResults:
        """Sweep the grid row-major until the evaluation budget is exhausted."""
        if self._ran:
            raise RuntimeError("an engine instance runs once; build a new one")
        t0 = time.perf_counter()
        self.initialize()
        self._ran = True

        P = self.config.population_size
        K = self.problem.k
        budget = self.config.evaluation_budget
        total_steps = (budget - self._evals) // 2

        rows = np.arange(P)
        done = 0
        while done < total_steps:
            if self._buf_cursor >= P:
                self._refill_draws()
            n = int(min(total_steps - done, P - self._buf_cursor))
            tau_costs_before = self._costs[rows, self._skill].copy()
            self._run_steps(done % P, n)
            tau_costs_after = self._costs[rows, self._skill]
            if (tau_costs_after > tau_costs_before).any():
                raise InvariantViolation("per-cell stored cost increased")
            done += n

        expected = P * K + 2 * total_steps
        if self._evals != expected or self._evals > budget:
            raise InvariantViolation(
                f"evaluation accounting broke: used {self._evals}, "
                f"expected {expected} within budget {budget}")
        census = np.bincount(self._skill, minlength=K)
        if not np.array_equal(census, self._skill_census):
            raise InvariantViolation("skill-factor census changed during run")

        wall = time.perf_counter() - t0
        return self._collect(case_id, wall)

    def _collect(self, case_id: str, wall: float) -> RunResults:
        K = self.problem.k
        tasks = []
        for k in range(K):
            dk = int(self.problem.dims[k])
            traj = [(int(self._traj_evals[i]), int(self._traj_cost[i, k]))
                    for i in range(self._traj_n)]
            tasks.append(TaskResult(
                instance=self.problem.tasks[k].name,
                best_cost=int(self._best_cost[k]),
                best_tour=[int(v) for v in self._best_tour[k, :dk]],
                trajectory=traj,
            ))
        grid = self.config.grid
        meta = {
            "population_size": self.config.population_size,
            "grid": [grid.rows, grid.cols],
            "evaluation_budget": self.config.evaluation_budget,
            "trajectory_sample_every": self._sample_every,
            "mutation": "first-improving-2-opt-move-on-own-task-tour",
            "skill_tie_rule": "fewest-holders-then-lowest-task",
            "rank_tie_rule": "stable-population-order",
            "replacement_rule": "strict-improvement; crossover must beat the "
                                "mutant to count as transfer",
            "invariants_checked": True,
        }
        return RunResults(solver=self.SOLVER_ID, test_case=case_id,
                          seed=self.config.seed, tasks=tasks,
                          transfer=self._ledger.copy(),
                          evaluations_used=int(self._evals),
                          metadata=meta, wall_time_s=wall)

    # -- inspection --------------------------------------------------------

    @property
    def evaluations_used(self) -> int:
        return int(self._evals)

    @property
    def transfer_ledger(self) -> TransferLedger:
        return TransferLedger(self._ledger.copy())

    def population(self) -> list[UnifiedIndividual]:
        """Current grid contents as individuals (row-major order)."""
        out = []
        for p in range(self.config.population_size):
            out.append(UnifiedIndividual(
                genome=self._genomes[p].copy(),
                factorial_costs=self._costs[p].copy(),
                scalar_fitness=float(self._phi0[p]),
                skill_factor=int(self._skill[p]) + 1,
            ))
        return out
