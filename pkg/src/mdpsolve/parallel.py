"""In-process data parallelism over contiguous state blocks.

A :class:`Workers` object owns a balanced partition of the state range and,
for more than one worker, a thread pool.  Kernels submit one task per block
and results are always collected in block order; scalar reductions combine
per-block partials in a fixed pairwise tree ordered by block index, so a run
with a given worker count is bit-reproducible and results across worker
counts differ only by reduction rounding.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

from .model import Partition, make_partition

T = TypeVar("T")


def tree_reduce(parts: Sequence[T], combine: Callable[[T, T], T]) -> T:
    """Combine partial results pairwise, always in block-index order."""
    if not parts:
        raise ValueError("tree_reduce needs at least one partial result")
    level = list(parts)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(combine(level[i], level[i + 1]))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


class Workers:
    """Executes block kernels for one solve; cheap pass-through when R == 1."""

    def __init__(self, n: int, count: int = 1):
        self.partition: Partition = make_partition(n, count)
        self._pool = ThreadPoolExecutor(max_workers=count) if count > 1 else None

    @property
    def count(self) -> int:
        return self.partition.worker_count

    def run_blocks(self, fn: Callable[[int, int, int], T], scale: int = 1) -> list[T]:
        """Call ``fn(block_index, start, stop)`` per block; results in block order.

        ``scale`` stretches the state blocks to row blocks of a matrix with
        ``scale`` rows per state (the row-stacked transition matrix).
        """
        blocks = [
            (r, self.partition.block_starts[r] * scale, self.partition.block_starts[r + 1] * scale)
            for r in range(self.count)
        ]
        if self._pool is None:
            return [fn(r, lo, hi) for r, lo, hi in blocks]
        futures = [self._pool.submit(fn, r, lo, hi) for r, lo, hi in blocks]
        return [f.result() for f in futures]

    def reduce_blocks(
        self,
        fn: Callable[[int, int, int], T],
        combine: Callable[[T, T], T],
        scale: int = 1,
    ) -> T:
        return tree_reduce(self.run_blocks(fn, scale=scale), combine)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self) -> "Workers":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
