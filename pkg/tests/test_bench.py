import math

import numpy as np
import pytest

from mdpsolve import SolveOptions, fit_amdahl, gen_random, measure_solve_runtimes
from mdpsolve.bench import speedup_model
from mdpsolve.problems import RandomParams


def synthetic_samples(p, counts=(1, 2, 4, 8, 16, 32, 48)):
    return [(r, 1.0 - p + p / r) for r in counts]


class TestFit:
    @pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 0.95, 1.0])
    def test_recovers_parallel_fraction_on_noiseless_data(self, p):
        fit = fit_amdahl(synthetic_samples(p))
        assert abs(fit.p - p) <= 1e-4

    def test_full_sweep_like_reported_benchmark(self):
        fit = fit_amdahl([(r, 1.0 - 0.95 + 0.95 / r) for r in range(1, 49)])
        assert abs(fit.p - 0.95) <= 0.005
        assert 19.0 <= fit.s_max <= 21.0

    def test_fully_parallel_reports_unbounded_ceiling(self):
        fit = fit_amdahl([(r, 1.0 / r) for r in (1, 2, 4, 8)])
        assert fit.p == 1.0
        assert math.isinf(fit.s_max)

    def test_fully_serial(self):
        fit = fit_amdahl([(r, 3.5) for r in (1, 2, 4)])
        assert fit.p == 0.0
        assert fit.s_max == 1.0

    def test_repeated_counts_reduced_by_median(self):
        p = 0.5
        noisy = []
        for r in (1, 2, 4, 8):
            t = 1.0 - p + p / r
            noisy += [(r, t), (r, t * 100.0), (r, t)]  # one wild outlier per count
        fit = fit_amdahl(noisy)
        assert abs(fit.p - p) <= 1e-4

    def test_ceiling_matches_fraction(self):
        fit = fit_amdahl(synthetic_samples(0.8))
        assert abs(fit.s_max - 1.0 / (1.0 - fit.p)) <= 1e-9

    def test_missing_baseline_rejected(self):
        with pytest.raises(ValueError, match="single-worker"):
            fit_amdahl([(2, 1.0), (4, 0.6)])

    def test_single_count_rejected(self):
        with pytest.raises(ValueError, match="two distinct"):
            fit_amdahl([(1, 1.0), (1, 1.1)])

    def test_nonpositive_runtime_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            fit_amdahl([(1, 1.0), (2, 0.0)])

    def test_model_shape(self):
        assert speedup_model(0.95, 1) == 1.0
        assert abs(speedup_model(0.95, 10**9) - 20.0) < 1e-6


def test_measure_solve_runtimes_produces_fit_input():
    mdp = gen_random(RandomParams(n=30, m=3, nnz_per_row=5, gamma=0.9, seed=7))
    samples = measure_solve_runtimes(mdp, SolveOptions(), worker_counts=(1, 2), repeats=2)
    assert len(samples) == 4
    assert {r for r, _ in samples} == {1, 2}
    assert all(t > 0 for _, t in samples)
    fit = fit_amdahl(samples)
    assert 0.0 <= fit.p <= 1.0
