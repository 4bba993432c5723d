"""Solver library for discounted finite Markov decision processes.

The outer algorithm is inexact policy iteration: greedy policy extraction
alternating with an approximate solve of the policy-evaluation linear system
by a configurable iterative method (Richardson, GMRES, BiCGStab, TFQMR) and
preconditioner.  Fixed-sweep configurations recover the classic dynamic
programming algorithms; see :func:`mdpsolve.preset`.
"""

from .bellman import (
    GreedyResult,
    bellman_residual,
    greedy_policy,
    policy_cost_exact,
    policy_residual,
)
from .bench import AmdahlFit, fit_amdahl, measure_solve_runtimes
from .driver import SolveOptions, SolveResult, SolveStatus, preset, solve
from .fileio import (
    FileFormatError,
    export_grid_artifacts,
    read_matrix,
    write_matrix,
)
from .inner import (
    InnerSolveReport,
    InnerSolver,
    Preconditioner,
    build_preconditioner,
    inner_solve,
)
from .model import (
    MdpInstance,
    Mode,
    Partition,
    ValidationError,
    flatten_index,
    make_partition,
    require_valid,
    validate,
)
from .parallel import Workers
from .problems import (
    GridMeta,
    MazeParams,
    PendulumParams,
    RandomParams,
    SisParams,
    build_from_callbacks,
    gen_maze,
    gen_pendulum,
    gen_random,
    gen_sis,
    maze_distances,
    maze_grid_meta,
    pendulum_grid_meta,
)
from .sparse import (
    CsrMatrix,
    DimensionError,
    PolicyOperator,
    ResourceLimitError,
    assemble_explicit,
    dot,
    gather_policy_cost,
    gather_policy_matrix,
    norm,
    spmv,
)

__version__ = "0.1.0"

__all__ = [
    "AmdahlFit",
    "CsrMatrix",
    "DimensionError",
    "FileFormatError",
    "GreedyResult",
    "GridMeta",
    "InnerSolveReport",
    "InnerSolver",
    "MazeParams",
    "MdpInstance",
    "Mode",
    "Partition",
    "PendulumParams",
    "PolicyOperator",
    "Preconditioner",
    "RandomParams",
    "ResourceLimitError",
    "SisParams",
    "SolveOptions",
    "SolveResult",
    "SolveStatus",
    "ValidationError",
    "Workers",
    "assemble_explicit",
    "bellman_residual",
    "build_from_callbacks",
    "build_preconditioner",
    "dot",
    "export_grid_artifacts",
    "fit_amdahl",
    "flatten_index",
    "gather_policy_cost",
    "gather_policy_matrix",
    "gen_maze",
    "gen_pendulum",
    "gen_random",
    "gen_sis",
    "greedy_policy",
    "inner_solve",
    "make_partition",
    "maze_distances",
    "maze_grid_meta",
    "measure_solve_runtimes",
    "norm",
    "pendulum_grid_meta",
    "policy_cost_exact",
    "policy_residual",
    "preset",
    "read_matrix",
    "require_valid",
    "solve",
    "spmv",
    "validate",
    "write_matrix",
]
