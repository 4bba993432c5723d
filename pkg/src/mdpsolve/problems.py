"""Benchmark problem generators and callback-driven instance construction.

Four families: seeded sparse random instances, an epidemic-control model
whose driving event is a binomial count of new infections, a discretized
inverted pendulum, and a deterministic 2-D maze.  Every generator produces
rows that depend only on the (state, action) pair and the parameters, so
parallel generation over state blocks is bitwise equal to sequential
generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import MdpInstance, Mode, ValidationError
from .parallel import Workers
from .sparse import CsrMatrix, csr_from_entries

PMF_TRUNCATION = 1e-15


@dataclass(frozen=True)
class GridMeta:
    """2-D layout of a grid problem's states, for exporting plots as CSV."""

    height: int
    width: int
    action_labels: tuple[str, ...]


# ---------------------------------------------------------------------------
# seeded random instances


@dataclass(frozen=True)
class RandomParams:
    n: int
    m: int
    nnz_per_row: int
    gamma: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ValidationError("state and action counts must be >= 1")
        if not (1 <= self.nnz_per_row <= self.n):
            raise ValidationError(f"nnz_per_row must lie in [1, {self.n}], got {self.nnz_per_row}")
        if not (0.0 < self.gamma < 1.0):
            raise ValidationError(f"discount factor must lie in (0, 1), got {self.gamma}")


def gen_random(p: RandomParams) -> MdpInstance:
    """Uniformly sampled costs and transitions with a fixed reachable-set size.

    Each (state, action) row picks ``nnz_per_row`` distinct successor states
    uniformly without replacement and normalizes uniform weights over them.
    Deterministic in the seed.
    """
    rng = np.random.default_rng(p.seed)
    cost = rng.random((p.n, p.m))
    nrows = p.n * p.m
    col_chunks = np.empty((nrows, p.nnz_per_row), dtype=np.int64)
    val_chunks = np.empty((nrows, p.nnz_per_row))
    full = np.arange(p.n, dtype=np.int64)
    for row in range(nrows):
        cols = full if p.nnz_per_row == p.n else rng.choice(p.n, size=p.nnz_per_row, replace=False)
        col_chunks[row] = np.sort(cols)
        vals = rng.random(p.nnz_per_row)
        val_chunks[row] = vals / vals.sum()
    row_ptr = np.arange(nrows + 1, dtype=np.int64) * p.nnz_per_row
    transitions = CsrMatrix(nrows, p.n, row_ptr, col_chunks.ravel(), val_chunks.ravel())
    return MdpInstance(n=p.n, m=p.m, gamma=p.gamma, stage_cost=cost, transitions=transitions)


# ---------------------------------------------------------------------------
# epidemic control (susceptible-infectious-susceptible dynamics)


@dataclass(frozen=True)
class SisParams:
    """Population model with hygiene levels (5) crossed with distancing levels (4).

    The action index flattens the pair as ``a = hygiene * 4 + distancing``.
    Coefficient vectors are configuration, not ground truth: defaults are
    monotone in measure severity (financial cost up, infection probability
    and contact rate down) and every value can be overridden.
    """

    population: int
    w_f: float = 1.0
    w_q: float = 0.1
    w_h: float = 2.0
    cf_hm: tuple[float, ...] = (0.0, 1.0, 2.0, 4.0, 8.0)
    cf_sd: tuple[float, ...] = (0.0, 2.0, 4.0, 8.0)
    cq_hm: tuple[float, ...] = (1.0, 0.9, 0.8, 0.7, 0.5)
    cq_sd: tuple[float, ...] = (1.0, 0.8, 0.5, 0.2)
    psi: tuple[float, ...] = (0.30, 0.25, 0.15, 0.08, 0.02)
    lam: tuple[float, ...] = (5.0, 3.0, 1.5, 0.5)
    gamma: float = 0.99

    def __post_init__(self) -> None:
        if self.population < 1:
            raise ValidationError("population must be >= 1")
        for name, arr, length in (
            ("cf_hm", self.cf_hm, 5),
            ("cf_sd", self.cf_sd, 4),
            ("cq_hm", self.cq_hm, 5),
            ("cq_sd", self.cq_sd, 4),
            ("psi", self.psi, 5),
            ("lam", self.lam, 4),
        ):
            if len(arr) != length:
                raise ValidationError(f"{name} must have {length} entries, got {len(arr)}")
        for name in ("cq_hm", "cq_sd", "psi"):
            vals = getattr(self, name)
            if any(not (0.0 <= x <= 1.0) for x in vals):
                raise ValidationError(f"{name} entries must lie in [0, 1]")
        if any(x < 0 for x in self.lam) or any(w < 0 for w in (self.w_f, self.w_q, self.w_h)):
            raise ValidationError("contact rates and weights must be non-negative")
        if not (0.0 < self.gamma < 1.0):
            raise ValidationError(f"discount factor must lie in (0, 1), got {self.gamma}")


def sis_infection_probability(p: SisParams, s: int, a1: int, a2: int) -> float:
    """Probability that one susceptible person gets infected this period."""
    beta = 1.0 - s / p.population  # chance the next contact is infectious
    return -math.expm1(-p.lam[a2] * beta * p.psi[a1])


def gen_sis(p: SisParams) -> MdpInstance:
    """Epidemic-control instance with states = susceptible count 0..population.

    Infections this period follow Binomial(s, q); every currently infectious
    person recovers (unit infectious period), so the successor susceptible
    count is ``population - infections``.  The full-population state is
    absorbing: nobody is infectious, so q = 0 there.  Binomial weights are
    evaluated in log space, tails below 1e-15 are dropped and each row is
    renormalized.
    """
    n_pop = p.population
    n = n_pop + 1
    m = 20
    # log-factorials once; good to ~1e-11 relative, and rows get renormalized
    lfact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n_pop + 1, dtype=np.float64)))))

    a1_grid, a2_grid = np.divmod(np.arange(m), 4)
    rate = np.array([p.lam[a2] * p.psi[a1] for a1, a2 in zip(a1_grid, a2_grid)])

    cf = np.array([p.cf_hm[a1] + p.cf_sd[a2] for a1, a2 in zip(a1_grid, a2_grid)])
    cq = np.array([p.cq_hm[a1] * p.cq_sd[a2] for a1, a2 in zip(a1_grid, a2_grid)])
    s_grid = np.arange(n, dtype=np.float64)
    c_h = (n_pop - s_grid) ** 1.1
    cost = p.w_f * cf[None, :] - p.w_q * cq[None, :] + p.w_h * c_h[:, None]

    col_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    lengths = np.empty(n * m, dtype=np.int64)
    for s in range(n):
        i = np.arange(s + 1)
        lc = lfact[s] - lfact[i] - lfact[s - i]
        beta = 1.0 - s / n_pop
        q_all = -np.expm1(-rate * beta)
        for a in range(m):
            q = q_all[a]
            if q <= 0.0:
                cols = np.array([n_pop], dtype=np.int64)  # no new infections
                vals = np.array([1.0])
            elif q >= 1.0:
                cols = np.array([n_pop - s], dtype=np.int64)  # everyone susceptible infected
                vals = np.array([1.0])
            else:
                pmf = np.exp(lc + i * math.log(q) + (s - i) * math.log1p(-q))
                keep = pmf >= PMF_TRUNCATION
                kept_i = i[keep]
                kept = pmf[keep]
                cols = (n_pop - kept_i)[::-1].astype(np.int64)  # ascending successor index
                vals = (kept / kept.sum())[::-1]
            row = s * m + a
            lengths[row] = cols.size
            col_parts.append(cols)
            val_parts.append(vals)
    row_ptr = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
    transitions = CsrMatrix(n * m, n, row_ptr, np.concatenate(col_parts), np.concatenate(val_parts))
    return MdpInstance(n=n, m=m, gamma=p.gamma, stage_cost=cost, transitions=transitions)


# ---------------------------------------------------------------------------
# inverted pendulum on a grid


@dataclass(frozen=True)
class PendulumParams:
    """Grid discretization of a torque-controlled pendulum.

    The angle lives on a periodic grid over [0, 2*pi) with ``grid_points``
    nodes; angular velocity on a symmetric inclusive grid over [-10, 10];
    torque on a symmetric inclusive grid over [-3, 3] with an odd number of
    nodes so zero torque is always available.
    """

    grid_points: int  # nodes per state dimension
    torque_points: int = 51
    time_step: float = 0.01
    gravity: float = 9.80665
    gamma: float = 0.999

    def __post_init__(self) -> None:
        if self.grid_points < 2:
            raise ValidationError("state grid needs at least 2 points per dimension")
        if self.torque_points < 1 or self.torque_points % 2 == 0:
            raise ValidationError("torque grid size must be odd so zero torque is on the grid")
        if self.time_step <= 0:
            raise ValidationError("time step must be positive")
        if not (0.0 < self.gamma < 1.0):
            raise ValidationError(f"discount factor must lie in (0, 1), got {self.gamma}")


OMEGA_LIMIT = 10.0
TORQUE_LIMIT = 3.0
TWO_PI = 2.0 * math.pi


def pendulum_theta_grid(ns: int) -> np.ndarray:
    """Periodic angle grid, mirror-built so index i and ns-i pair to 2*pi exactly."""
    h = TWO_PI / ns
    idx = np.arange(ns)
    lower = idx * h
    upper = TWO_PI - (ns - idx) * h
    return np.where(idx <= ns // 2, lower, upper)


def symmetric_grid(points: int, limit: float) -> np.ndarray:
    """Inclusive uniform grid over [-limit, limit], bitwise sign-symmetric."""
    if points == 1:
        return np.zeros(1)
    if points % 2:
        half = points // 2
        pos = np.linspace(0.0, limit, half + 1)[1:]
        return np.concatenate((-pos[::-1], [0.0], pos))
    step = 2.0 * limit / (points - 1)
    pos = (2.0 * np.arange(points // 2) + 1.0) * (step / 2.0)
    pos[-1] = limit
    return np.concatenate((-pos[::-1], pos))


def gen_pendulum(p: PendulumParams) -> MdpInstance:
    """Forward-Euler discretized pendulum with bilinear successor interpolation.

    State index is ``angle_index * grid_points + velocity_index``.  The Euler
    successor is wrapped in angle, clamped in velocity, and its probability
    mass is split over the four surrounding nodes by bilinear weights;
    weights below 1e-15 are dropped and the row renormalized, so an on-grid
    successor yields a single unit entry.
    """
    ns, na = p.grid_points, p.torque_points
    n = ns * ns
    theta = pendulum_theta_grid(ns)
    omega = symmetric_grid(ns, OMEGA_LIMIT)
    torque = symmetric_grid(na, TORQUE_LIMIT)

    # squared deviations built once and mirrored so the cost is exactly
    # symmetric under (theta, omega, F) -> (2*pi - theta, -omega, -F)
    h_theta = TWO_PI / ns
    half = np.arange(ns // 2 + 1) * h_theta
    dtheta2 = np.empty(ns)
    dtheta2[: ns // 2 + 1] = (half - math.pi) ** 2
    upper_idx = np.arange(ns // 2 + 1, ns)
    dtheta2[upper_idx] = dtheta2[ns - upper_idx]
    omega2 = omega * omega
    state_cost = 2.0 * (dtheta2[:, None] + omega2[None, :]).reshape(n)
    cost = state_cost[:, None] + (torque * torque)[None, :]

    # Euler step for every (state, action) row at once
    i_theta, i_omega = np.divmod(np.arange(n), ns)
    th = np.repeat(theta[i_theta], na)
    om = np.repeat(omega[i_omega], na)
    f = np.tile(torque, n)
    accel = f - p.gravity * np.sin(th)
    th_next = np.mod(th + p.time_step * om, TWO_PI)
    om_next = np.clip(om + p.time_step * accel, omega[0], omega[-1])

    u = th_next / h_theta
    i0 = np.floor(u)
    ft = u - i0
    i0 = i0.astype(np.int64) % ns
    i1 = (i0 + 1) % ns
    h_omega = (omega[-1] - omega[0]) / (ns - 1)
    t = (om_next - omega[0]) / h_omega
    j0 = np.clip(np.floor(t).astype(np.int64), 0, ns - 2)
    fo = t - j0
    j1 = j0 + 1

    nrows = n * na
    rows = np.repeat(np.arange(nrows, dtype=np.int64), 4)
    cols = np.stack([i0 * ns + j0, i1 * ns + j0, i0 * ns + j1, i1 * ns + j1], axis=1).ravel()
    vals = np.stack(
        [(1.0 - ft) * (1.0 - fo), ft * (1.0 - fo), (1.0 - ft) * fo, ft * fo], axis=1
    ).ravel()
    raw = csr_from_entries(rows, cols, vals, (nrows, n), drop_below=PMF_TRUNCATION)
    sums = raw.row_sums()
    scaled = raw.values / np.repeat(sums, raw.row_lengths())
    transitions = CsrMatrix(nrows, n, raw.row_ptr, raw.col_idx, scaled)
    return MdpInstance(n=n, m=na, gamma=p.gamma, stage_cost=cost, transitions=transitions)


def pendulum_grid_meta(p: PendulumParams) -> GridMeta:
    labels = tuple(f"{f:g}" for f in symmetric_grid(p.torque_points, TORQUE_LIMIT))
    return GridMeta(height=p.grid_points, width=p.grid_points, action_labels=labels)


# ---------------------------------------------------------------------------
# deterministic 2-D maze


MAZE_ACTIONS = ("stay", "N", "E", "S", "W")
_MAZE_MOVES = ((0, 0), (-1, 0), (0, 1), (1, 0), (0, -1))


@dataclass(frozen=True)
class MazeParams:
    height: int
    width: int
    obstacles: frozenset[int] = field(default_factory=frozenset)
    goal: int | None = None  # defaults to the bottom-right cell
    wall_cost: float = 1e20
    goal_cost: float = -100.0
    gamma: float = 0.99

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValidationError("maze dimensions must be >= 1")
        n = self.height * self.width
        if self.goal is None:
            object.__setattr__(self, "goal", n - 1)
        if not (0 <= self.goal < n):
            raise ValidationError(f"goal cell {self.goal} out of range [0, {n})")
        obstacles = frozenset(int(c) for c in self.obstacles)
        object.__setattr__(self, "obstacles", obstacles)
        if any(not (0 <= c < n) for c in obstacles):
            raise ValidationError("obstacle cells must lie inside the grid")
        if self.goal in obstacles:
            raise ValidationError(f"goal cell {self.goal} cannot be an obstacle")
        if not (0.0 < self.gamma < 1.0):
            raise ValidationError(f"discount factor must lie in (0, 1), got {self.gamma}")


def gen_maze(p: MazeParams) -> MdpInstance:
    """Deterministic grid world, row-major cells, actions stay/N/E/S/W.

    Moves that would leave the grid or enter an obstacle keep the agent in
    place at the wall cost.  Obstacle cells self-loop at the wall cost; the
    goal self-loops at the goal cost (absorbing).  Every transition row has a
    single unit entry.
    """
    h, w = p.height, p.width
    n = h * w
    m = len(MAZE_ACTIONS)
    cells = np.arange(n, dtype=np.int64)
    row, col = np.divmod(cells, w)
    blocked = np.zeros(n, dtype=bool)
    if p.obstacles:
        blocked[np.fromiter(p.obstacles, dtype=np.int64)] = True

    dest = np.empty((n, m), dtype=np.int64)
    cost = np.empty((n, m))
    for a, (dr, dc) in enumerate(_MAZE_MOVES):
        r2, c2 = row + dr, col + dc
        inside = (r2 >= 0) & (r2 < h) & (c2 >= 0) & (c2 < w)
        target = np.where(inside, r2 * w + c2, cells)
        bad = ~inside | blocked[target]
        dest[:, a] = np.where(bad, cells, target)
        cost[:, a] = np.where(bad, p.wall_cost, 0.0)
    dest[blocked] = cells[blocked, None]
    cost[blocked] = p.wall_cost
    dest[p.goal] = p.goal
    cost[p.goal] = p.goal_cost

    nrows = n * m
    row_ptr = np.arange(nrows + 1, dtype=np.int64)
    transitions = CsrMatrix(nrows, n, row_ptr, dest.ravel(), np.ones(nrows))
    return MdpInstance(n=n, m=m, gamma=p.gamma, stage_cost=cost, transitions=transitions)


def maze_grid_meta(p: MazeParams) -> GridMeta:
    return GridMeta(height=p.height, width=p.width, action_labels=MAZE_ACTIONS)


def maze_distances(p: MazeParams) -> np.ndarray:
    """Breadth-first shortest-path move counts to the goal (-1 = unreachable)."""
    h, w = p.height, p.width
    n = h * w
    dist = np.full(n, -1, dtype=np.int64)
    blocked = p.obstacles
    dist[p.goal] = 0
    frontier = [p.goal]
    while frontier:
        nxt = []
        for cell in frontier:
            r, c = divmod(cell, w)
            for dr, dc in _MAZE_MOVES[1:]:
                r2, c2 = r + dr, c + dc
                if 0 <= r2 < h and 0 <= c2 < w:
                    nb = r2 * w + c2
                    if dist[nb] < 0 and nb not in blocked:
                        dist[nb] = dist[cell] + 1
                        nxt.append(nb)
        frontier = nxt
    return dist


# ---------------------------------------------------------------------------
# callback-driven construction


def build_from_callbacks(
    n: int,
    m: int,
    gamma: float,
    cost_fn: Callable[[int, int], float],
    trans_fn: Callable[[int, int], tuple[Sequence[int], Sequence[float]]],
    mode: Mode = Mode.MIN,
    prealloc: int | None = None,
    workers: int = 1,
) -> MdpInstance:
    """Assemble an instance by calling plain functions once per (state, action).

    ``trans_fn`` returns parallel sequences of successor states and
    probabilities summing to 1 within 1e-9 (rows are renormalized exactly).
    ``prealloc`` is an optional per-row nonzero bound; exceeding it is an
    error rather than a truncation.  Generation runs per partition block and
    is bitwise identical to sequential generation.
    """
    if n < 1 or m < 1:
        raise ValidationError("state and action counts must be >= 1")

    cost = np.empty((n, m))

    def block(_r: int, lo: int, hi: int):
        cols_acc: list[np.ndarray] = []
        vals_acc: list[np.ndarray] = []
        lens = np.empty((hi - lo) * m, dtype=np.int64)
        for s in range(lo, hi):
            for a in range(m):
                cost[s, a] = float(cost_fn(s, a))
                cols_raw, probs_raw = trans_fn(s, a)
                cols = np.asarray(cols_raw, dtype=np.int64)
                probs = np.asarray(probs_raw, dtype=np.float64)
                where = f"trans_fn(s={s}, a={a})"
                if cols.ndim != 1 or probs.shape != cols.shape:
                    raise ValidationError(f"{where} must return two equal-length sequences")
                if cols.size == 0:
                    raise ValidationError(f"{where} returned an empty distribution")
                if prealloc is not None and cols.size > prealloc:
                    raise ValidationError(
                        f"{where} returned {cols.size} entries, exceeding the pre-allocation "
                        f"hint of {prealloc}"
                    )
                if cols.min() < 0 or cols.max() >= n:
                    raise ValidationError(f"{where} has successor states outside [0, {n})")
                if not np.isfinite(probs).all() or probs.min() < 0.0:
                    raise ValidationError(f"{where} has negative or non-finite probabilities")
                total = probs.sum()
                if abs(total - 1.0) > 1e-9:
                    raise ValidationError(f"{where} probabilities sum to {total!r}, not 1")
                order = np.argsort(cols, kind="stable")
                cols, probs = cols[order], probs[order]
                if cols.size > 1 and (np.diff(cols) == 0).any():
                    raise ValidationError(f"{where} lists a successor state twice")
                cols_acc.append(cols)
                vals_acc.append(probs / total)
                lens[(s - lo) * m + a] = cols.size
        return cols_acc, vals_acc, lens

    if workers <= 1:
        parts = [block(0, 0, n)]
    else:
        with Workers(n, workers) as pool:
            parts = pool.run_blocks(block)
    col_parts = [c for part in parts for c in part[0]]
    val_parts = [v for part in parts for v in part[1]]
    lengths = np.concatenate([part[2] for part in parts])
    row_ptr = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
    transitions = CsrMatrix(n * m, n, row_ptr, np.concatenate(col_parts), np.concatenate(val_parts))
    return MdpInstance(n=n, m=m, gamma=gamma, stage_cost=cost, transitions=transitions, mode=mode)
