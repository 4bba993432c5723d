import numpy as np
import pytest

from mdpsolve import (
    CsrMatrix,
    MdpInstance,
    ValidationError,
    flatten_index,
    gen_maze,
    gen_pendulum,
    gen_random,
    gen_sis,
    make_partition,
    validate,
)
from mdpsolve.problems import MazeParams, PendulumParams, RandomParams, SisParams

from conftest import mdp_from_dense


class TestFlattenIndex:
    def test_first_row(self):
        assert flatten_index(0, 0, m=5) == 0

    def test_row_after_first_state_block(self):
        assert flatten_index(1, 0, m=5) == 5

    def test_against_layout_enumeration(self):
        # brute force: list layout rows of a 3-state 4-action tensor in order
        layout = [(s, a) for s in range(3) for a in range(4)]
        assert layout.index((2, 3)) == 11
        assert flatten_index(2, 3, m=4) == 11
        for s in range(3):
            for a in range(4):
                assert flatten_index(s, a, m=4) == layout.index((s, a))

    def test_bijective_with_inverse(self):
        n, m = 7, 3
        seen = set()
        for s in range(n):
            for a in range(m):
                row = flatten_index(s, a, m, n=n)
                assert divmod(row, m) == (s, a)
                seen.add(row)
        assert seen == set(range(n * m))

    @pytest.mark.parametrize("s,a,m,n", [(-1, 0, 2, 3), (0, 2, 2, 3), (3, 0, 2, 3), (0, -1, 2, 3)])
    def test_out_of_range(self, s, a, m, n):
        with pytest.raises(ValidationError):
            flatten_index(s, a, m, n=n)


class TestMakePartition:
    def test_ten_over_three(self):
        assert make_partition(10, 3).block_sizes() == [4, 3, 3]

    def test_single_worker(self):
        assert make_partition(5, 1).block_sizes() == [5]

    def test_more_workers_than_states(self):
        # trailing empty blocks are legal
        part = make_partition(3, 5)
        assert part.block_sizes() == [1, 1, 1, 0, 0]
        assert part.block(4) == (3, 3)

    def test_formula_sweep(self):
        for n in range(0, 40):
            for r in range(1, 9):
                sizes = make_partition(n, r).block_sizes()
                assert sum(sizes) == n
                assert max(sizes) - min(sizes) <= 1
                base, extra = divmod(n, r)
                assert sizes == [base + 1 if rho < extra else base for rho in range(r)]

    def test_zero_workers_rejected(self):
        with pytest.raises(ValidationError):
            make_partition(4, 0)


def _toy(gamma=0.5, p=1.0, g=1.0):
    trans = CsrMatrix(1, 1, np.array([0, 1]), np.array([0]), np.array([p]))
    return MdpInstance(n=1, m=1, gamma=gamma, stage_cost=np.array([[g]]), transitions=trans)


class TestValidate:
    def test_minimal_instance_passes(self):
        assert validate(_toy()) == []

    def test_substochastic_row_reported_with_index(self):
        report = validate(_toy(p=0.9))
        assert len(report) == 1
        assert "row 0" in report[0]

    def test_shape_mismatch_reported(self):
        trans = CsrMatrix(3, 2, np.array([0, 1, 2, 3]), np.array([0, 1, 0]), np.ones(3))
        bad = MdpInstance(n=2, m=2, gamma=0.5, stage_cost=np.zeros((2, 2)), transitions=trans)
        report = validate(bad)
        assert any("shape" in msg for msg in report)

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.2, 1.5])
    def test_discount_out_of_range(self, gamma):
        report = validate(_toy(gamma=gamma))
        assert any("discount" in msg for msg in report)

    def test_nonfinite_cost_reported(self):
        trans = CsrMatrix(1, 1, np.array([0, 1]), np.array([0]), np.array([1.0]))
        bad = MdpInstance(n=1, m=1, gamma=0.5, stage_cost=np.array([[np.inf]]), transitions=trans)
        assert any("finite" in msg for msg in validate(bad))

    def test_huge_finite_sentinel_is_fine(self):
        assert validate(_toy(g=1e20)) == []

    def test_probability_above_one_reported(self):
        p = np.zeros((2, 1, 2))
        p[0, 0] = [1.5, -0.5]
        p[1, 0] = [0.0, 1.0]
        bad = mdp_from_dense(p, np.zeros((2, 1)), 0.9)
        assert any("[0, 1]" in msg for msg in validate(bad))


@pytest.mark.parametrize(
    "instance",
    [
        gen_random(RandomParams(n=30, m=4, nnz_per_row=6, gamma=0.9, seed=5)),
        gen_random(RandomParams(n=8, m=2, nnz_per_row=8, gamma=0.5, seed=1)),
        gen_sis(SisParams(population=25)),
        gen_pendulum(PendulumParams(grid_points=7, torque_points=5)),
        gen_maze(MazeParams(height=4, width=6, obstacles=frozenset({7, 8}))),
    ],
    ids=["random", "random-dense", "sis", "pendulum", "maze"],
)
def test_every_generator_output_validates(instance):
    assert validate(instance) == []
