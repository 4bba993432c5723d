"""Command-line interface: solve, generate, bench-amdahl and presets.

Solver hyperparameters use the same option spellings as the library's
documented surface (-max_iter_pi, -max_iter_ksp, -atol_pi, -alpha,
-ksp_type, -pc_type, -ksp_max_it, -ksp_richardson_scale, -pc_sor_forward).
Exit codes: 0 when the solve converged, 2 when an iteration cap or stall
ended it, 1 for usage, validation and I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .bench import fit_amdahl, measure_solve_runtimes
from .driver import SolveOptions, SolveStatus, preset, solve
from .fileio import (
    FileFormatError,
    export_grid_artifacts,
    read_matrix,
    write_matrix,
    write_residuals_csv,
    write_vector_csv,
)
from .inner import InnerSolver, Preconditioner
from .model import MdpInstance, Mode, ValidationError
from .problems import (
    MazeParams,
    PendulumParams,
    RandomParams,
    SisParams,
    gen_maze,
    gen_pendulum,
    gen_random,
    gen_sis,
    maze_grid_meta,
    pendulum_grid_meta,
)
from .sparse import CsrMatrix, ResourceLimitError

_FAMILIES = ("random", "sis", "pendulum", "maze")


def _ksp_type(value: str) -> InnerSolver:
    try:
        return InnerSolver.from_name(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _pc_type(value: str) -> Preconditioner:
    try:
        return Preconditioner.from_name(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _mode(value: str) -> Mode:
    try:
        return Mode.from_name(value)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _worker_list(value: str) -> list[int]:
    try:
        counts = [int(tok) for tok in value.replace(" ", "").split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse worker list {value!r}") from None
    if not counts:
        raise argparse.ArgumentTypeError("worker list is empty")
    return counts


def _cell_list(value: str) -> list[int]:
    try:
        return [int(tok) for tok in value.replace(" ", "").split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse cell list {value!r}") from None


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("solver options")
    g.add_argument("-max_iter_pi", dest="max_iter_pi", type=int, help="outer iteration cap (default 1000)")
    g.add_argument("-max_iter_ksp", dest="max_iter_ksp", type=int, help="inner iteration cap (default 1000)")
    g.add_argument("-atol_pi", dest="atol_pi", type=float, help="outer residual tolerance (default 1e-8)")
    g.add_argument("-alpha", dest="alpha", type=float, help="inexactness factor in (0,1) (default 1e-4)")
    g.add_argument("-ksp_type", dest="ksp_type", type=_ksp_type,
                   help="inner solver: richardson|gmres|bicgstab|tfqmr (default gmres)")
    g.add_argument("-pc_type", dest="pc_type", type=_pc_type,
                   help="preconditioner: none|jacobi|sor|svd (default none)")
    g.add_argument("-ksp_max_it", dest="ksp_max_it", type=int,
                   help="run exactly this many inner iterations (disables the alpha test)")
    g.add_argument("-ksp_richardson_scale", dest="ksp_richardson_scale", type=float,
                   help="step size for the richardson inner solver (default 1)")
    g.add_argument("-pc_sor_forward", dest="pc_sor_forward", action="store_true",
                   help="use the forward SOR sweep (the only variant; accepted for compatibility)")
    g.add_argument("-pc_sor_omega", dest="pc_sor_omega", type=float,
                   help="SOR relaxation factor in (0,2) (default 1)")
    g.add_argument("--workers", type=int, default=None, help="data-parallel worker count (default 1)")
    g.add_argument("--preset", default=None,
                   help="start from a classic configuration: VI|PI|OPI|BETA_VI|GS_VI|J_VI")
    g.add_argument("--preset-w", dest="preset_w", type=int, default=None,
                   help="sweep count for the OPI preset")
    g.add_argument("--preset-beta", dest="preset_beta", type=float, default=None,
                   help="damping factor for the BETA_VI preset")


def _add_problem_flags(parser: argparse.ArgumentParser, with_files: bool) -> None:
    g = parser.add_argument_group("problem selection")
    if with_files:
        g.add_argument("--cost", type=Path, help="stage-cost matrix file (dense binary)")
        g.add_argument("--transitions", type=Path, help="transition matrix file (CSR binary)")
        g.add_argument("--problem", choices=_FAMILIES, help="generate the instance instead of loading files")
    g.add_argument("--discount", type=float, default=None, help="discount factor in (0,1)")
    g.add_argument("--mode", type=_mode, default=None, help="optimization mode: min|max")
    g.add_argument("--seed", type=int, default=0, help="random family seed (default 0)")
    g.add_argument("--states", type=int, default=100, help="random family: state count")
    g.add_argument("--actions", type=int, default=10, help="random family: action count")
    g.add_argument("--nnz", type=int, default=5, help="random family: successors per (s,a)")
    g.add_argument("--population", type=int, default=100, help="sis family: population size")
    g.add_argument("--grid-points", dest="grid_points", type=int, default=11,
                   help="pendulum family: nodes per state dimension")
    g.add_argument("--torque-points", dest="torque_points", type=int, default=51,
                   help="pendulum family: torque nodes (odd)")
    g.add_argument("--time-step", dest="time_step", type=float, default=0.01,
                   help="pendulum family: integration step")
    g.add_argument("--height", type=int, default=9, help="maze family: rows")
    g.add_argument("--width", type=int, default=9, help="maze family: columns")
    g.add_argument("--obstacles", type=_cell_list, default=[],
                   help="maze family: comma-separated obstacle cell indices")
    g.add_argument("--goal", type=int, default=None, help="maze family: goal cell (default bottom-right)")
    g.add_argument("--wall-cost", dest="wall_cost", type=float, default=1e20, help="maze family: wall penalty")
    g.add_argument("--goal-cost", dest="goal_cost", type=float, default=-100.0, help="maze family: goal reward")


def _build_instance(args, family: str | None):
    """Instantiate the requested problem family, or load matrices from files."""
    if family is None:
        if args.cost is None or args.transitions is None:
            raise ValidationError("either --problem or both --cost and --transitions are required")
        if args.discount is None:
            raise ValidationError("--discount is required when loading matrices from files")
        cost = read_matrix(args.cost)
        trans = read_matrix(args.transitions)
        if not isinstance(cost, np.ndarray):
            raise ValidationError(f"{args.cost} holds a sparse matrix; the stage cost must be dense")
        if not isinstance(trans, CsrMatrix):
            raise ValidationError(f"{args.transitions} holds a dense matrix; transitions must be CSR")
        n, m = cost.shape
        mdp = MdpInstance(n=n, m=m, gamma=args.discount, stage_cost=cost,
                          transitions=trans, mode=args.mode or Mode.MIN)
        return mdp, None
    if family == "random":
        p = RandomParams(n=args.states, m=args.actions, nnz_per_row=args.nnz,
                         gamma=args.discount if args.discount is not None else 0.9, seed=args.seed)
        return gen_random(p), None
    if family == "sis":
        p = SisParams(population=args.population,
                      **({"gamma": args.discount} if args.discount is not None else {}))
        return gen_sis(p), None
    if family == "pendulum":
        p = PendulumParams(grid_points=args.grid_points, torque_points=args.torque_points,
                           time_step=args.time_step,
                           **({"gamma": args.discount} if args.discount is not None else {}))
        return gen_pendulum(p), pendulum_grid_meta(p)
    if family == "maze":
        p = MazeParams(height=args.height, width=args.width, obstacles=frozenset(args.obstacles),
                       goal=args.goal, wall_cost=args.wall_cost, goal_cost=args.goal_cost,
                       **({"gamma": args.discount} if args.discount is not None else {}))
        return gen_maze(p), maze_grid_meta(p)
    raise ValidationError(f"unknown problem family {family!r}")


def _build_options(args) -> SolveOptions:
    if args.preset:
        opts = preset(args.preset, w=args.preset_w, beta=args.preset_beta)
    else:
        opts = SolveOptions()
    if args.max_iter_pi is not None:
        opts.max_outer = args.max_iter_pi
    if args.max_iter_ksp is not None:
        opts.max_inner = args.max_iter_ksp
    if args.atol_pi is not None:
        opts.tol = args.atol_pi
    if args.alpha is not None:
        opts.alpha = args.alpha
    if args.ksp_type is not None:
        opts.inner = args.ksp_type
    if args.pc_type is not None:
        opts.pc = args.pc_type
    if args.ksp_max_it is not None:
        opts.ksp_max_it = args.ksp_max_it
    if args.ksp_richardson_scale is not None:
        opts.richardson_scale = args.ksp_richardson_scale
    if args.pc_sor_omega is not None:
        opts.sor_omega = args.pc_sor_omega
    if args.workers is not None:
        opts.workers = args.workers
    if args.mode is not None:
        opts.mode = args.mode
    return opts


def _stats_lines(mdp, opts: SolveOptions, result) -> list[str]:
    return [
        f"status={result.status.value}",
        f"outer_iterations={result.outer_iterations}",
        f"inner_iterations_total={result.inner_iterations_total}",
        f"final_residual={result.residual_history[-1]!r}",
        f"wall_time_s={result.wall_time:.6f}",
        f"time_greedy_s={result.time_greedy:.6f}",
        f"time_assembly_s={result.time_assembly:.6f}",
        f"time_inner_s={result.time_inner:.6f}",
        f"states={mdp.n}",
        f"actions={mdp.m}",
        f"discount={mdp.gamma!r}",
        f"ksp_type={opts.inner.value}",
        f"pc_type={opts.pc.value}",
        f"workers={opts.workers}",
        f"atol_pi={opts.tol!r}",
        f"alpha={opts.alpha!r}",
    ]


def _cmd_solve(args) -> int:
    mdp, grid_meta = _build_instance(args, args.problem)
    opts = _build_options(args)
    result = solve(mdp, opts)
    lines = _stats_lines(mdp, opts, result)
    print("\n".join(lines))
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_matrix(out / "values.bin", result.values.reshape(-1, 1))
        write_matrix(out / "policy.bin", result.policy.reshape(-1, 1).astype(np.float64))
        write_vector_csv(out / "values.csv", result.values, column="cost_to_go")
        write_vector_csv(out / "policy.csv", result.policy, column="action")
        write_residuals_csv(out / "residuals.csv", result.residual_history)
        (out / "stats.txt").write_text("\n".join(lines) + "\n")
        if args.export_grid:
            if grid_meta is None:
                raise ValidationError("--export-grid needs a 2-D grid problem (maze or pendulum)")
            export_grid_artifacts(result.values, result.policy, grid_meta, out)
    return 0 if result.status is SolveStatus.CONVERGED else 2


def _cmd_generate(args) -> int:
    mdp, _ = _build_instance(args, args.family)
    prefix = Path(args.out_prefix)
    if prefix.parent != Path("."):
        prefix.parent.mkdir(parents=True, exist_ok=True)
    cost_path = prefix.parent / (prefix.name + "_cost.bin")
    trans_path = prefix.parent / (prefix.name + "_transitions.bin")
    write_matrix(cost_path, mdp.stage_cost)
    write_matrix(trans_path, mdp.transitions)
    print(f"cost={cost_path}")
    print(f"transitions={trans_path}")
    print(f"states={mdp.n}")
    print(f"actions={mdp.m}")
    print(f"discount={mdp.gamma:.17g}")
    return 0


def _cmd_bench_amdahl(args) -> int:
    mdp, _ = _build_instance(args, args.problem)
    opts = _build_options(args)
    samples = measure_solve_runtimes(mdp, opts, args.workers_list, repeats=args.repeats)
    fit = fit_amdahl(samples)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "samples.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["workers", "runtime_s"])
            for r, t in samples:
                writer.writerow([r, f"{t:.9f}"])
        (out / "fit.txt").write_text(
            f"parallel_fraction={fit.p:.6f}\nmax_speedup={fit.s_max:.6f}\n"
        )
    print(f"parallel_fraction={fit.p:.6f}")
    print(f"max_speedup={fit.s_max:.6f}")
    return 0


def _cmd_presets(_args) -> int:
    rows = [
        ("VI", "-ksp_type richardson -pc_type none -ksp_max_it 1"),
        ("PI", "-ksp_type richardson -pc_type svd"),
        ("OPI(W)", "-ksp_type richardson -pc_type none -ksp_max_it W"),
        ("BETA_VI", "-ksp_type richardson -pc_type none -ksp_max_it 1 -ksp_richardson_scale beta"),
        ("GS_VI", "-ksp_type richardson -pc_type sor -pc_sor_forward -ksp_max_it 1"),
        ("J_VI", "-ksp_type richardson -pc_type jacobi -ksp_max_it 1"),
    ]
    for name, flags in rows:
        print(f"{name}: {flags}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdpsolve",
        description="Solve discounted MDPs with inexact policy iteration and Krylov inner solvers.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve an instance from files or a generator",
                             allow_abbrev=False)
    _add_problem_flags(p_solve, with_files=True)
    _add_solver_flags(p_solve)
    p_solve.add_argument("--out", type=Path, default=None, help="directory for result files")
    p_solve.add_argument("--export-grid", dest="export_grid", action="store_true",
                         help="also write 2-D value/policy grids (maze and pendulum)")
    p_solve.set_defaults(func=_cmd_solve)

    p_gen = sub.add_parser("generate", help="write a benchmark instance to matrix files",
                           allow_abbrev=False)
    p_gen.add_argument("family", choices=_FAMILIES)
    _add_problem_flags(p_gen, with_files=False)
    p_gen.add_argument("--out-prefix", dest="out_prefix", default="mdp",
                       help="prefix for <prefix>_cost.bin and <prefix>_transitions.bin")
    p_gen.set_defaults(func=_cmd_generate)

    p_bench = sub.add_parser("bench-amdahl", help="sweep worker counts and fit the parallel fraction",
                             allow_abbrev=False)
    _add_problem_flags(p_bench, with_files=True)
    _add_solver_flags(p_bench)
    p_bench.add_argument("--workers-list", dest="workers_list", type=_worker_list, default=[1, 2, 4],
                         help="comma-separated worker counts, must include 1")
    p_bench.add_argument("--repeats", type=int, default=3, help="solves per worker count")
    p_bench.add_argument("--out", type=Path, default=None, help="directory for samples.csv and fit.txt")
    p_bench.set_defaults(func=_cmd_bench_amdahl)

    p_presets = sub.add_parser("presets", help="list classic algorithm configurations",
                               allow_abbrev=False)
    p_presets.set_defaults(func=_cmd_presets)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValidationError, FileFormatError, ResourceLimitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
