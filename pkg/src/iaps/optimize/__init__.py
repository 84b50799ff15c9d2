"""Power allocation: LP solver and SINR-constrained allocation problems."""

from iaps.optimize.lp import LPResult, read_problem, simplex, write_problem
from iaps.optimize.power import (
    AllocationResult,
    QosRow,
    algorithm1,
    algorithm1_rows,
    build_qos_rows,
    grid_upper_bound,
    limited_outcome,
    objective_gains,
    qos_system,
    replay_sinr,
    solve_p2,
    solve_pa,
    stepsize_tradeoff,
)

__all__ = [
    "AllocationResult", "LPResult", "QosRow", "algorithm1", "algorithm1_rows", "build_qos_rows",
    "grid_upper_bound", "limited_outcome", "objective_gains", "qos_system", "read_problem",
    "replay_sinr", "simplex", "solve_p2", "solve_pa", "stepsize_tradeoff", "write_problem",
]
