"""Per-run result records and their canonical JSON form.

One record per seeded execution. The canonical serialization deliberately
excludes wall time so that re-running a (solver, case, seed) triple yields a
byte-identical file; timings are logged separately by the harness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TaskResult", "RunResults"]


@dataclass
class TaskResult:
    """Best solution and convergence trace for one task of one run."""

    instance: str
    best_cost: int
    best_tour: list[int]
    #: (evaluations-used, best-cost-so-far) pairs, sampled on a fixed grid.
    trajectory: list[tuple[int, int]]


@dataclass
class RunResults:
    """Everything one seeded execution produced."""

    solver: str
    test_case: str
    seed: int
    tasks: list[TaskResult]
    #: (K, K) positive-transfer episode counts; [src][dst], 0-based task order.
    transfer: np.ndarray
    evaluations_used: int
    metadata: dict = field(default_factory=dict)
    wall_time_s: float | None = None

    def task(self, instance: str) -> TaskResult:
        for t in self.tasks:
            if t.instance == instance:
                return t
        raise KeyError(instance)

    def to_json(self) -> str:
        d = {
            "solver": self.solver,
            "test_case": self.test_case,
            "seed": self.seed,
            "evaluations_used": self.evaluations_used,
            "metadata": self.metadata,
            "transfer": np.asarray(self.transfer).astype(int).tolist(),
            "tasks": [
                {
                    "instance": t.instance,
                    "best_cost": int(t.best_cost),
                    "best_tour": [int(v) for v in t.best_tour],
                    "trajectory": [[int(e), int(c)] for e, c in t.trajectory],
                }
                for t in self.tasks
            ],
        }
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunResults":
        d = json.loads(text)
        tasks = [
            TaskResult(
                instance=t["instance"],
                best_cost=int(t["best_cost"]),
                best_tour=[int(v) for v in t["best_tour"]],
                trajectory=[(int(e), int(c)) for e, c in t["trajectory"]],
            )
            for t in d["tasks"]
        ]
        return cls(
            solver=d["solver"],
            test_case=d["test_case"],
            seed=int(d["seed"]),
            tasks=tasks,
            transfer=np.asarray(d["transfer"], dtype=np.int64),
            evaluations_used=int(d["evaluations_used"]),
            metadata=d.get("metadata", {}),
            wall_time_s=None,
        )
