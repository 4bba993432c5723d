"""CSR sparse kernels, deterministic reductions and the policy-evaluation operator.

All kernels are pure over immutable inputs.  Row results of the sparse
matrix-vector product depend only on the row's own entries, so blocking the
computation over a partition cannot change them; the only place worker count
can influence rounding is the scalar reductions, which combine per-block
partials in a fixed pairwise tree (see :mod:`mdpsolve.parallel`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - type-only import, avoids a cycle
    from .parallel import Workers


class DimensionError(ValueError):
    """Operand shapes do not line up."""


class ResourceLimitError(RuntimeError):
    """An operation would exceed a configured memory/size cap."""


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Compressed sparse row matrix over float64.

    Row ``i`` stores its column indices in ``col_idx[row_ptr[i]:row_ptr[i+1]]``
    (strictly increasing, no duplicates) and the matching entries in
    ``values``.  Arrays are frozen at construction.
    """

    rows: int
    cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        rp = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        ci = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        for arr, name in ((rp, "row_ptr"), (ci, "col_idx"), (vals, "values")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        problems = self.check()
        if problems:
            raise ValueError("invalid CSR structure: " + "; ".join(problems))

    def check(self) -> list[str]:
        """Structural invariant check; returns violations instead of raising."""
        problems: list[str] = []
        rp, ci, vals = self.row_ptr, self.col_idx, self.values
        if self.rows < 0 or self.cols < 0:
            problems.append(f"negative shape ({self.rows}, {self.cols})")
            return problems
        if rp.shape != (self.rows + 1,):
            problems.append(f"row_ptr length {rp.shape[0]} != rows+1 = {self.rows + 1}")
            return problems
        if rp[0] != 0 or (np.diff(rp) < 0).any():
            problems.append("row_ptr must be non-decreasing and start at 0")
            return problems
        nnz = int(rp[-1])
        if ci.shape != (nnz,) or vals.shape != (nnz,):
            problems.append(f"col_idx/values length must equal nnz = {nnz}")
            return problems
        if nnz:
            if ci.min() < 0 or ci.max() >= self.cols:
                problems.append(f"column indices must lie in [0, {self.cols})")
            # within-row strict increase; diffs crossing a row boundary are exempt
            d = np.diff(ci)
            ok = d > 0
            boundary = rp[1:-1]
            boundary = boundary[(boundary >= 1) & (boundary <= nnz - 1)]
            ok[boundary - 1] = True
            if not ok.all():
                problems.append("column indices must be strictly increasing within each row")
            if not np.isfinite(vals).all():
                problems.append("values must all be finite")
        return problems

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def row_lengths(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def row_sums(self) -> np.ndarray:
        return _segment_sums(self.values, self.row_ptr)

    def diagonal(self) -> np.ndarray:
        """Main-diagonal entries as a dense vector (zeros where absent)."""
        k = min(self.rows, self.cols)
        d = np.zeros(k)
        entry_rows = np.repeat(np.arange(self.rows, dtype=np.int64), self.row_lengths())
        mask = entry_rows == self.col_idx
        d[self.col_idx[mask]] = self.values[mask]
        return d

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols))
        entry_rows = np.repeat(np.arange(self.rows, dtype=np.int64), self.row_lengths())
        out[entry_rows, self.col_idx] = self.values
        return out

    def equals(self, other: "CsrMatrix") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.values, other.values)
        )


def _segment_sums(data: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Sum ``data`` over the segments delimited by ``ptr`` (empty segments -> 0)."""
    nseg = len(ptr) - 1
    out = np.zeros(nseg)
    if data.size == 0 or nseg == 0:
        return out
    lengths = np.diff(ptr)
    nonempty = lengths > 0
    if nonempty.any():
        # reduceat over the starts of non-empty segments sums exactly those
        # segments: empty segments contribute no elements in between.
        starts = np.asarray(ptr[:-1])[nonempty]
        out[nonempty] = np.add.reduceat(data, starts)
    return out


def csr_identity(n: int) -> CsrMatrix:
    idx = np.arange(n, dtype=np.int64)
    return CsrMatrix(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))


def csr_from_dense(a: np.ndarray) -> CsrMatrix:
    a = np.asarray(a, dtype=np.float64)
    rows, cols = a.shape
    mask = a != 0.0
    counts = mask.sum(axis=1)
    row_ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    r, c = np.nonzero(mask)
    return CsrMatrix(rows, cols, row_ptr, c.astype(np.int64), a[r, c])


def csr_from_entries(
    entry_rows: np.ndarray,
    entry_cols: np.ndarray,
    entry_vals: np.ndarray,
    shape: tuple[int, int],
    drop_below: float = 0.0,
) -> CsrMatrix:
    """Assemble a CSR matrix from unordered (row, col, value) triplets.

    Duplicate coordinates are summed.  After merging, entries with
    ``|value| <= drop_below`` are discarded.  Assembly is deterministic: a
    stable lexsort by (row, col) fixes the merge order.
    """
    rows, cols = shape
    entry_rows = np.asarray(entry_rows, dtype=np.int64)
    entry_cols = np.asarray(entry_cols, dtype=np.int64)
    entry_vals = np.asarray(entry_vals, dtype=np.float64)
    order = np.lexsort((entry_cols, entry_rows))
    er, ec, ev = entry_rows[order], entry_cols[order], entry_vals[order]
    if er.size:
        key = er * np.int64(cols) + ec
        first = np.concatenate(([True], key[1:] != key[:-1]))
        starts = np.flatnonzero(first)
        merged = np.add.reduceat(ev, starts)
        er, ec, ev = er[first], ec[first], merged
    keep = np.abs(ev) > drop_below
    er, ec, ev = er[keep], ec[keep], ev[keep]
    counts = np.bincount(er, minlength=rows)
    row_ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return CsrMatrix(rows, cols, row_ptr, ec, ev)


def spmv(
    a: CsrMatrix,
    x: np.ndarray,
    workers: "Workers | None" = None,
    block_scale: int = 1,
) -> np.ndarray:
    """Sparse matrix-vector product ``y = A x``.

    When ``workers`` is given, output rows are produced per partition block
    (``block_scale`` rows of ``A`` per owned state); per-row sums do not
    depend on the blocking.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (a.cols,):
        raise DimensionError(f"spmv: vector length {x.shape} incompatible with {a.shape}")
    y = np.empty(a.rows)

    def block(_r: int, lo: int, hi: int) -> None:
        p0, p1 = a.row_ptr[lo], a.row_ptr[hi]
        prod = a.values[p0:p1] * x[a.col_idx[p0:p1]]
        y[lo:hi] = _segment_sums(prod, a.row_ptr[lo : hi + 1] - p0)

    if workers is None or a.rows == 0:
        block(0, 0, a.rows)
    else:
        workers.run_blocks(block, scale=block_scale)
    return y


def dot(x: np.ndarray, y: np.ndarray, workers: "Workers | None" = None) -> float:
    """Inner product with deterministic per-block tree reduction."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"dot: length mismatch {x.shape} vs {y.shape}")
    if workers is None:
        return float(np.dot(x, y))
    return workers.reduce_blocks(lambda _r, lo, hi: float(np.dot(x[lo:hi], y[lo:hi])), lambda p, q: p + q)


def norm(x: np.ndarray, kind: str = "two", workers: "Workers | None" = None) -> float:
    """Vector norm; ``kind`` is ``"two"`` (Euclidean) or ``"inf"`` (max)."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "inf":
        if workers is None:
            return float(np.max(np.abs(x))) if x.size else 0.0
        return workers.reduce_blocks(
            lambda _r, lo, hi: float(np.max(np.abs(x[lo:hi]))) if hi > lo else 0.0, max
        )
    if kind == "two":
        return math.sqrt(dot(x, x, workers))
    raise ValueError(f"unknown norm kind {kind!r}; expected 'two' or 'inf'")


def gather_policy_matrix(mdp, pi: np.ndarray) -> CsrMatrix:
    """Extract the ``n x n`` transition matrix of a policy.

    Row ``s`` of the result is row ``s*m + pi[s]`` of the row-stacked
    transition matrix, copied into a fresh CSR structure (one allocation per
    call).
    """
    pi = np.asarray(pi, dtype=np.int64)
    if not mdp.policy_is_valid(pi):
        raise ValueError("policy has wrong length or out-of-range action indices")
    t = mdp.transitions
    src_rows = np.arange(mdp.n, dtype=np.int64) * mdp.m + pi
    starts = t.row_ptr[src_rows]
    lengths = t.row_ptr[src_rows + 1] - starts
    row_ptr = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
    total = int(row_ptr[-1])
    # positions of the gathered entries in the source arrays
    take = np.repeat(starts - row_ptr[:-1], lengths) + np.arange(total, dtype=np.int64)
    return CsrMatrix(mdp.n, mdp.n, row_ptr, t.col_idx[take], t.values[take])


def gather_policy_cost(mdp, pi: np.ndarray) -> np.ndarray:
    """Stage-cost vector of a policy: ``g_pi[s] = stage_cost[s, pi[s]]``."""
    pi = np.asarray(pi, dtype=np.int64)
    if not mdp.policy_is_valid(pi):
        raise ValueError("policy has wrong length or out-of-range action indices")
    return mdp.stage_cost[np.arange(mdp.n), pi].copy()


@dataclass(frozen=True, eq=False)
class PolicyOperator:
    """Matrix-free action of the policy-evaluation coefficient matrix.

    Represents ``I - gamma * P`` for a gathered ``n x n`` policy transition
    matrix ``P`` without materializing it; ``apply(x)`` computes
    ``x - gamma * (P x)`` with exactly that two-step rounding.
    """

    p_pi: CsrMatrix
    gamma: float

    def __post_init__(self) -> None:
        if self.p_pi.rows != self.p_pi.cols:
            raise DimensionError("policy transition matrix must be square")
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"discount factor must lie in [0, 1), got {self.gamma}")

    @property
    def n(self) -> int:
        return self.p_pi.rows

    def apply(self, x: np.ndarray, workers: "Workers | None" = None) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) - self.gamma * spmv(self.p_pi, x, workers)


def assemble_explicit(op: PolicyOperator, cap_nnz: int | None = None) -> CsrMatrix:
    """Materialize ``I - gamma * P`` with a diagonal slot in every row.

    Needed only by methods that index matrix entries directly (forward SOR
    sweeps, dense factorization).  ``cap_nnz`` bounds the allocation.
    """
    p = op.p_pi
    n = p.rows
    budget = p.nnz + n
    if cap_nnz is not None and budget > cap_nnz:
        raise ResourceLimitError(
            f"explicit assembly needs {budget} entries but the cap is {cap_nnz}; "
            "raise the cap or choose a matrix-free preconditioner"
        )
    entry_rows = np.concatenate(
        [np.repeat(np.arange(n, dtype=np.int64), p.row_lengths()), np.arange(n, dtype=np.int64)]
    )
    entry_cols = np.concatenate([p.col_idx, np.arange(n, dtype=np.int64)])
    entry_vals = np.concatenate([-op.gamma * p.values, np.ones(n)])
    return csr_from_entries(entry_rows, entry_cols, entry_vals, (n, n))
