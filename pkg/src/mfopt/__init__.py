"""Multifactorial optimization for evolutionary multitasking on TSP bundles.

A population of unified permutations solves K traveling-salesman tasks at
once. The package provides the cellular engine (``Mfcga``), the canonical
generational baseline (``Mfea``), TSPLIB ingestion, the shared permutation
operators, post-run analysis (transfer matrices, Wilcoxon rank-sum,
best-solution complementarity) and a benchmark harness with a CLI
(``mfopt``).

Conventions: city labels, task indices, cut positions and grid coordinates
are all 1-based, as in TSPLIB; matrices returned as numpy arrays are indexed
0-based positionally.
"""

from .analysis import (TransferLedger, WilcoxonResult, Z_CRITICAL_95,
                       aggregate_transfer, best_solution_overlap,
                       compare_task_costs, pair_intensities,
                       wilcoxon_rank_sum)
from .bench import (ExperimentConfig, TestCase, builtin_test_cases,
                    case_by_id, load_results, report, run_experiment)
from .core import (EvalCounter, InvariantViolation, MultitaskProblem,
                   UnifiedIndividual, assign_scalar_fitness_and_skill,
                   compute_factorial_ranks, decode, evaluate_all,
                   initialize_population)
from .mfcga import (ConfigurationError, EngineConfig, GridTopology, Mfcga,
                    StepOutcome, default_grid, moore_neighbors)
from .mfea import Mfea, MfeaConfig, scalar_fitness_survival
from .operators import (OperatorError, order_crossover, random_cut_pair,
                        two_opt_improvement, two_opt_move)
from .results import RunResults, TaskResult
from .tsplib import (BUNDLED_INSTANCES, DimensionMismatchError, TspInstance,
                     TsplibError, UnsupportedFormatError,
                     bundled_instances_dir, load_instance, load_opt_tour,
                     node_overlap, overlap_stats, parse_tsplib,
                     read_opt_tour, shared_node_count, tour_length)

__version__ = "0.1.0"
