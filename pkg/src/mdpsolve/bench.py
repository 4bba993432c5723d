"""Strong-scaling harness: speedup measurement and parallel-fraction fitting.

The speedup model is ``S(R) = 1 / (1 - p + p/R)`` for parallelizable code
fraction ``p``.  The fit minimizes the sum of absolute errors between
observed and modeled speedups, which tolerates outliers better than least
squares; the objective is one-dimensional and piecewise smooth, so a coarse
grid scan refined by a golden-section search is enough.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

GRID_RESOLUTION = 1e-4
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AmdahlFit:
    """Fitted parallel fraction and the speedup ceiling it implies."""

    samples: tuple[tuple[int, float], ...]
    p: float
    s_max: float


def speedup_model(p: float, r: int) -> float:
    return 1.0 / (1.0 - p + p / r)


def fit_amdahl(samples: Sequence[tuple[int, float]]) -> AmdahlFit:
    """Fit the parallel fraction from (worker count, runtime) samples.

    Repeated worker counts are reduced to their median runtime.  A single
    worker sample must be present to define the speedup baseline; runtimes
    must be positive.
    """
    if not samples:
        raise ValueError("no samples given")
    by_r: dict[int, list[float]] = {}
    for r, t in samples:
        r = int(r)
        t = float(t)
        if r < 1:
            raise ValueError(f"worker count must be >= 1, got {r}")
        if not (t > 0.0) or not math.isfinite(t):
            raise ValueError(f"runtimes must be positive and finite, got {t} for R={r}")
        by_r.setdefault(r, []).append(t)
    if 1 not in by_r:
        raise ValueError("a single-worker sample is required as the speedup baseline")
    if len(by_r) < 2:
        raise ValueError("need samples for at least two distinct worker counts")
    medians = {r: statistics.median(ts) for r, ts in by_r.items()}
    base = medians[1]
    observed = sorted((r, base / t) for r, t in medians.items())

    def objective(p: float) -> float:
        return sum(abs(s - speedup_model(p, r)) for r, s in observed)

    steps = round(1.0 / GRID_RESOLUTION)
    grid = np.linspace(0.0, 1.0, steps + 1)
    rs = np.array([r for r, _ in observed], dtype=np.float64)
    ss = np.array([s for _, s in observed])
    losses = np.abs(ss[None, :] - 1.0 / (1.0 - grid[:, None] + grid[:, None] / rs[None, :])).sum(axis=1)
    best_i = int(np.argmin(losses))
    lo = max(0.0, (best_i - 1) / steps)
    hi = min(1.0, (best_i + 1) / steps)
    refined = _golden_section(objective, lo, hi)
    # the golden section never lands exactly on the bracket edges; keep the
    # boundary or grid point when it is at least as good (exact p = 0 or 1)
    p_hat = min((refined, best_i / steps, lo, hi), key=objective)
    s_max = math.inf if p_hat >= 1.0 else 1.0 / (1.0 - p_hat)
    return AmdahlFit(samples=tuple((int(r), float(t)) for r, t in samples), p=p_hat, s_max=s_max)


def _golden_section(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return min(max((a + b) / 2.0, 0.0), 1.0)


def measure_solve_runtimes(mdp, opts, worker_counts: Sequence[int], repeats: int = 3):
    """Time repeated solves over a worker-count sweep; returns (R, seconds) samples."""
    from .driver import solve  # local import keeps bench importable standalone

    samples: list[tuple[int, float]] = []
    for r in worker_counts:
        run_opts = replace(opts, workers=int(r))
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            solve(mdp, run_opts)
            samples.append((int(r), time.perf_counter() - t0))
    return samples
