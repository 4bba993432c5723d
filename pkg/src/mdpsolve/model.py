"""Core data model: MDP instances, policies, cost vectors and state partitions.

A problem is described by state count ``n``, action count ``m``, a discount
factor in (0, 1), a dense ``n x m`` stage-cost matrix and a sparse ``nm x n``
transition matrix in which row ``s*m + a`` holds the distribution over
successor states for playing action ``a`` in state ``s``.  Keeping all rows
of one state contiguous lets every parallel operation work on contiguous
row blocks.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .sparse import CsrMatrix

ROW_SUM_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates a documented contract."""


class Mode(enum.Enum):
    """Optimization sense: minimize (default) or maximize discounted cost."""

    MIN = "min"
    MAX = "max"

    @classmethod
    def from_name(cls, name: str) -> "Mode":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown mode {name!r}; expected 'min' or 'max'") from None


def flatten_index(s: int, a: int, m: int, n: int | None = None) -> int:
    """Row index of the (state, action) pair in the row-stacked transition matrix.

    Parameters
    ----------
    s, a : int
        State and action index, both 0-based.
    m : int
        Action count.
    n : int, optional
        State count; when given, ``s`` is range-checked against it.
    """
    if m < 1:
        raise ValidationError(f"action count must be >= 1, got {m}")
    if a < 0 or a >= m:
        raise ValidationError(f"action index {a} out of range [0, {m})")
    if s < 0 or (n is not None and s >= n):
        raise ValidationError(f"state index {s} out of range [0, {n})")
    return s * m + a


@dataclass(frozen=True)
class Partition:
    """Ownership map assigning a contiguous block of states to each worker.

    ``block_starts`` has ``worker_count + 1`` entries; worker ``r`` owns
    states ``[block_starts[r], block_starts[r+1])``.  Blocks may be empty
    when there are more workers than states.
    """

    worker_count: int
    block_starts: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.worker_count < 1:
            raise ValidationError(f"worker count must be >= 1, got {self.worker_count}")
        bs = self.block_starts
        if len(bs) != self.worker_count + 1 or bs[0] != 0:
            raise ValidationError("block_starts must have worker_count+1 entries starting at 0")
        if any(bs[i] > bs[i + 1] for i in range(self.worker_count)):
            raise ValidationError("block_starts must be non-decreasing")

    @property
    def n(self) -> int:
        return self.block_starts[-1]

    def block(self, r: int) -> tuple[int, int]:
        return self.block_starts[r], self.block_starts[r + 1]

    def block_sizes(self) -> list[int]:
        return [self.block_starts[r + 1] - self.block_starts[r] for r in range(self.worker_count)]


def make_partition(n: int, worker_count: int) -> Partition:
    """Balanced partition of ``n`` states over ``worker_count`` workers.

    Worker ``r`` gets ``floor(n / R) + 1`` states when ``r < n mod R`` and
    ``floor(n / R)`` otherwise, so block sizes differ by at most one.
    """
    if n < 0:
        raise ValidationError(f"state count must be >= 0, got {n}")
    if worker_count < 1:
        raise ValidationError(f"worker count must be >= 1, got {worker_count}")
    base, extra = divmod(n, worker_count)
    starts = [0]
    for r in range(worker_count):
        starts.append(starts[-1] + base + (1 if r < extra else 0))
    return Partition(worker_count=worker_count, block_starts=tuple(starts))


@dataclass(frozen=True, eq=False)
class MdpInstance:
    """Complete description of a finite discounted MDP.

    Attributes
    ----------
    n, m : int
        State and action counts.
    gamma : float
        Discount factor, strictly inside (0, 1).
    mode : Mode
        Whether greedy extraction minimizes or maximizes.
    stage_cost : ndarray
        Dense ``(n, m)`` matrix of immediate costs.
    transitions : CsrMatrix
        Row-stacked ``(n*m, n)`` transition matrix; row ``s*m + a`` is the
        distribution over successor states.
    """

    n: int
    m: int
    gamma: float
    stage_cost: np.ndarray
    transitions: CsrMatrix
    mode: Mode = Mode.MIN

    def __post_init__(self) -> None:
        cost = np.ascontiguousarray(self.stage_cost, dtype=np.float64)
        cost.setflags(write=False)
        object.__setattr__(self, "stage_cost", cost)

    def policy_is_valid(self, pi: np.ndarray) -> bool:
        pi = np.asarray(pi)
        return pi.shape == (self.n,) and bool(np.all((pi >= 0) & (pi < self.m)))


def validate(mdp: MdpInstance) -> list[str]:
    """Check every model invariant; return a list of violations (empty = pass).

    Reported problems include out-of-range discount factors, shape
    mismatches between the cost matrix and the transition matrix, rows that
    do not sum to one (with their row indices) and non-finite entries.
    """
    problems: list[str] = []
    if mdp.n < 1:
        problems.append(f"state count must be >= 1, got {mdp.n}")
    if mdp.m < 1:
        problems.append(f"action count must be >= 1, got {mdp.m}")
    if not (0.0 < mdp.gamma < 1.0) or not math.isfinite(mdp.gamma):
        problems.append(f"discount factor must lie in (0, 1), got {mdp.gamma}")
    if mdp.stage_cost.shape != (mdp.n, mdp.m):
        problems.append(
            f"stage cost shape {mdp.stage_cost.shape} does not match (n, m) = ({mdp.n}, {mdp.m})"
        )
    elif not np.isfinite(mdp.stage_cost).all():
        bad = np.argwhere(~np.isfinite(mdp.stage_cost))
        s, a = bad[0]
        problems.append(f"stage cost has non-finite entries, first at (s={s}, a={a})")

    t = mdp.transitions
    if (t.rows, t.cols) != (mdp.n * mdp.m, mdp.n):
        problems.append(
            f"transition matrix shape ({t.rows}, {t.cols}) does not match (n*m, n) = "
            f"({mdp.n * mdp.m}, {mdp.n})"
        )
        return problems  # row checks below assume matching shape

    structural = t.check()
    if structural:
        problems.extend(f"transition matrix: {msg}" for msg in structural)
        return problems

    if t.values.size and (t.values.min() < 0.0 or t.values.max() > 1.0):
        bad = int(np.argmax((t.values < 0.0) | (t.values > 1.0)))
        problems.append(f"transition probabilities must lie in [0, 1]; entry {bad} is {t.values[bad]}")
    sums = t.row_sums()
    off = np.abs(sums - 1.0) > ROW_SUM_TOL
    if off.any():
        rows = np.flatnonzero(off)
        shown = ", ".join(f"row {r} sums to {sums[r]:.15g}" for r in rows[:5])
        more = "" if rows.size <= 5 else f" (and {rows.size - 5} more)"
        problems.append(f"transition rows must sum to 1 within {ROW_SUM_TOL}: {shown}{more}")
    return problems


def require_valid(mdp: MdpInstance) -> None:
    problems = validate(mdp)
    if problems:
        raise ValidationError("; ".join(problems))
