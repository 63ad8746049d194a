"""uflkit: metric uncapacitated facility location toolkit.

LP relaxation, gamma-scaled randomized rounding with facility splitting,
a greedy baseline, service-profile (step function) algebra, and the
two-coordinate approachability frontier analysis.
"""

__version__ = "0.1.0"

from .charfn import (DegenerateFunctionError, PiecewiseConstant, ThresholdTerm,
                     characteristic_of_client, characteristic_of_instance,
                     connection_bound, decompose, integral, normalize,
                     reconstruct, sum_functions, threshold,
                     unit_connection_bound)
from .game import (CROSSOVER_GAMMA, BestResponse, BetaCheck, FrontierResult,
                   GameGrid, GameMatrices, HalfspaceResult, PayoffVector,
                   ReferenceStrategy, StrategyA, WitnessProfile,
                   best_response, build_matrices, check_beta,
                   evaluate_strategy, frontier, halfspace_value,
                   hardness_curve, payoff, strategy_coordinates,
                   witness_profile)
from .instance import (InstanceFormatError, UflInstance, ValidationReport,
                       generate_euclidean, read_instance, validate,
                       write_instance)
from .jms import CONNECTION_FACTOR, FACILITY_FACTOR, jms_solve
from .linprog import (LpError, LpProblem, LpSolution, MatrixGameResult,
                      NoConvergenceError, solve_lp, solve_matrix_game)
from .relaxation import (FractionalSolution, build_relaxation,
                         solve_relaxation)
from .rounding import (BackupDistanceCheck, ClusterStructure, DistanceStats,
                       FilteredSolution, IntegralSolution, MonteCarloEstimate,
                       backup_distance_check, client_cost_diagnostic, cluster,
                       distance_stats, estimate_cost, filter_solution,
                       open_copy_frequencies, round_once)

__all__ = [name for name in dir() if not name.startswith("_")]
