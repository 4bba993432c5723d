import numpy as np
import pytest

import mdpsolve.driver as driver_mod
from mdpsolve import (
    InnerSolveReport,
    InnerSolver,
    Mode,
    Preconditioner,
    SolveOptions,
    SolveStatus,
    ValidationError,
    bellman_residual,
    gen_random,
    preset,
    solve,
)
from mdpsolve.problems import RandomParams

from conftest import (
    dense_tensor,
    mdp_from_dense,
    oracle_bellman_apply,
    oracle_optimal_values,
    oracle_policy_value,
    random_dense_mdp,
)

ALL_KINDS = list(InnerSolver)


def toy():
    return mdp_from_dense(np.ones((1, 1, 1)), np.array([[1.0]]), 0.5)


FIXTURE_INSTANCE = gen_random(RandomParams(n=20, m=4, nnz_per_row=6, gamma=0.9, seed=123))


class TestSolveBasics:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=[k.value for k in ALL_KINDS])
    def test_single_state_fixed_point(self, kind):
        res = solve(toy(), SolveOptions(inner=kind))
        np.testing.assert_allclose(res.values, [2.0], atol=1e-8)
        assert res.status is SolveStatus.CONVERGED
        assert res.outer_iterations <= 2

    def test_zero_cost_instance(self, rng):
        mdp = random_dense_mdp(rng, 5, 3, 0.9)
        zeroed = mdp_from_dense(dense_tensor(mdp), np.zeros((5, 3)), 0.9)
        res = solve(zeroed)
        assert np.array_equal(res.values, np.zeros(5))
        assert np.array_equal(res.policy, np.zeros(5))  # tie-break
        assert res.outer_iterations <= 1

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=[k.value for k in ALL_KINDS])
    def test_matches_policy_enumeration_oracle(self, kind, rng):
        mdp = random_dense_mdp(rng, 5, 3, 0.9)
        v_star = oracle_optimal_values(dense_tensor(mdp), np.asarray(mdp.stage_cost), 0.9)
        res = solve(mdp, SolveOptions(inner=kind, tol=1e-9))
        assert res.status is SolveStatus.CONVERGED
        assert np.max(np.abs(res.values - v_star)) <= 1e-6

    def test_converged_residual_recomputed_independently(self):
        res = solve(FIXTURE_INSTANCE, SolveOptions(tol=1e-8))
        assert res.status is SolveStatus.CONVERGED
        _, rn = bellman_residual(FIXTURE_INSTANCE, res.values)
        assert rn <= 1e-8
        assert res.residual_history[-1] <= 1e-8

    def test_solver_agnostic_fixed_point(self):
        tol = 1e-9
        results = [
            solve(FIXTURE_INSTANCE, SolveOptions(inner=kind, tol=tol)) for kind in ALL_KINDS
        ]
        for other in results[1:]:
            assert np.max(np.abs(results[0].values - other.values)) <= 10 * tol

    def test_worker_count_does_not_change_result(self):
        base = solve(FIXTURE_INSTANCE, SolveOptions(workers=1))
        for r in (2, 4):
            res = solve(FIXTURE_INSTANCE, SolveOptions(workers=r))
            assert np.max(np.abs(res.values - base.values)) <= 1e-10
            assert np.array_equal(res.policy, base.policy)

    def test_fixed_worker_rerun_bitwise_identical(self):
        a = solve(FIXTURE_INSTANCE, SolveOptions(workers=2))
        b = solve(FIXTURE_INSTANCE, SolveOptions(workers=2))
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.policy, b.policy)
        assert a.residual_history == b.residual_history

    def test_warm_start_at_solution_converges_immediately(self, rng):
        mdp = random_dense_mdp(rng, 6, 2, 0.8)
        v_star = oracle_optimal_values(dense_tensor(mdp), np.asarray(mdp.stage_cost), 0.8)
        res = solve(mdp, SolveOptions(tol=1e-6, v0=v_star))
        assert res.outer_iterations == 0
        assert res.status is SolveStatus.CONVERGED

    def test_max_mode_equals_negated_min_solve(self, rng):
        mdp = random_dense_mdp(rng, 6, 3, 0.9)
        negated = mdp_from_dense(dense_tensor(mdp), -np.asarray(mdp.stage_cost), 0.9)
        res_max = solve(mdp, SolveOptions(mode=Mode.MAX, tol=1e-10))
        res_min = solve(negated, SolveOptions(tol=1e-10))
        np.testing.assert_allclose(res_max.values, -res_min.values, atol=1e-8)
        assert np.array_equal(res_max.policy, res_min.policy)

    def test_residual_history_and_timings_populated(self):
        res = solve(FIXTURE_INSTANCE)
        assert len(res.residual_history) == res.outer_iterations + 1
        assert res.wall_time > 0
        assert res.time_greedy >= 0 and res.time_inner >= 0 and res.time_assembly >= 0
        assert res.inner_iterations_total >= res.outer_iterations


class TestTermination:
    def test_outer_cap(self):
        res = solve(FIXTURE_INSTANCE, preset("VI", max_outer=3, tol=1e-12))
        assert res.status is SolveStatus.OUTER_CAP
        assert res.outer_iterations == 3
        assert len(res.residual_history) == 4

    def test_stall_detection(self):
        # tolerance below what double precision can deliver; the residual
        # saturates near machine epsilon and stops decreasing
        res = solve(FIXTURE_INSTANCE, SolveOptions(tol=1e-18, max_outer=1000))
        assert res.status is SolveStatus.STALLED
        assert res.outer_iterations < 1000

    def test_residual_bump_transient_does_not_stall(self):
        # value propagation across a goal-reward grid raises the residual two
        # orders above its starting point for ~60 iterations; that healthy
        # transient must not be classified as a stall
        from mdpsolve import MazeParams, gen_maze

        inst = gen_maze(MazeParams(height=33, width=33))
        res = solve(inst, SolveOptions())
        assert res.status is SolveStatus.CONVERGED
        h = res.residual_history
        assert max(h) > h[0]  # the bump actually happened

    def test_breakdown_falls_back_to_one_sweep(self, rng, monkeypatch):
        mdp = random_dense_mdp(rng, 6, 2, 0.9)
        calls = {"n": 0}
        real_inner = driver_mod.inner_solve

        def sabotaged(op, b, theta0, target, cap, **kw):
            calls["n"] += 1
            if calls["n"] == 1:
                junk = np.full_like(b, 1e6)
                return junk, InnerSolveReport(
                    iterations=3,
                    final_linear_residual_2norm=np.inf,
                    converged=False,
                    breakdown=True,
                    target_2norm=target,
                )
            return real_inner(op, b, theta0, target, cap, **kw)

        monkeypatch.setattr(driver_mod, "inner_solve", sabotaged)
        res = solve(mdp, SolveOptions(tol=1e-8))
        assert res.status is SolveStatus.CONVERGED  # junk iterate was discarded
        # first history step after the fallback must equal the plain sweep result
        tensor = dense_tensor(mdp)
        pi0, tv0 = oracle_bellman_apply(tensor, np.asarray(mdp.stage_cost), 0.9, np.zeros(6))
        v1 = oracle_policy_value(tensor, np.asarray(mdp.stage_cost), 0.9, pi0)
        # fallback applied one evaluation sweep from V0=0: theta = g_pi + gamma*P_pi*0
        g_pi = np.array([mdp.stage_cost[s, pi0[s]] for s in range(6)])
        _, rn = bellman_residual(mdp, g_pi)
        assert abs(res.residual_history[1] - rn) <= 1e-12

    def test_invalid_options_rejected(self):
        with pytest.raises(ValidationError):
            solve(toy(), SolveOptions(tol=0.0))
        with pytest.raises(ValidationError):
            solve(toy(), SolveOptions(alpha=1.0))
        with pytest.raises(ValidationError):
            solve(toy(), SolveOptions(workers=0))
        with pytest.raises(ValidationError):
            solve(toy(), SolveOptions(pc=Preconditioner.EXACT, inner=InnerSolver.GMRES))

    def test_invalid_instance_rejected(self):
        from mdpsolve import CsrMatrix, MdpInstance

        trans = CsrMatrix(1, 1, np.array([0, 1]), np.array([0]), np.array([0.7]))
        bad = MdpInstance(n=1, m=1, gamma=0.5, stage_cost=np.zeros((1, 1)), transitions=trans)
        with pytest.raises(ValidationError):
            solve(bad)

    def test_bad_v0_rejected(self):
        with pytest.raises(ValidationError):
            solve(toy(), SolveOptions(v0=np.zeros(3)))


class TestOptions:
    def test_defaults_match_documented_table(self):
        opts = SolveOptions()
        assert opts.max_outer == 1000
        assert opts.max_inner == 1000
        assert opts.tol == 1e-8
        assert opts.alpha == 1e-4
        assert opts.inner is InnerSolver.GMRES
        assert opts.pc is Preconditioner.NONE
        assert opts.richardson_scale == 1.0
        assert opts.workers == 1
        assert opts.ksp_max_it is None

    def test_more_workers_than_states_is_legal(self):
        mdp = toy()
        res = solve(mdp, SolveOptions(workers=5))
        np.testing.assert_allclose(res.values, [2.0], atol=1e-8)
        assert res.status is SolveStatus.CONVERGED


class TestPresets:
    def test_vi_preset_fields(self):
        opts = preset("VI")
        assert opts.inner is InnerSolver.RICHARDSON
        assert opts.pc is Preconditioner.NONE
        assert opts.ksp_max_it == 1
        assert opts.richardson_scale == 1.0

    def test_gs_vi_preset_fields(self):
        opts = preset("GS_VI")
        assert opts.inner is InnerSolver.RICHARDSON
        assert opts.pc is Preconditioner.SOR_FORWARD
        assert opts.ksp_max_it == 1
        assert opts.sor_omega == 1.0

    def test_other_preset_fields(self):
        assert preset("PI").pc is Preconditioner.EXACT
        assert preset("OPI", w=7).ksp_max_it == 7
        beta_vi = preset("BETA_VI", beta=0.5)
        assert beta_vi.richardson_scale == 0.5 and beta_vi.ksp_max_it == 1
        assert preset("J_VI").pc is Preconditioner.JACOBI
        assert preset("gs-vi").pc is Preconditioner.SOR_FORWARD  # spelling variants

    def test_preset_argument_validation(self):
        with pytest.raises(ValidationError):
            preset("OPI")
        with pytest.raises(ValidationError):
            preset("BETA_VI", beta=1.5)
        with pytest.raises(ValidationError):
            preset("VI", w=3)
        with pytest.raises(ValidationError):
            preset("does-not-exist")

    def test_pi_preset_reproduces_textbook_policy_iteration(self, rng):
        mdp = random_dense_mdp(rng, 4, 3, 0.9)
        tensor = dense_tensor(mdp)
        cost = np.asarray(mdp.stage_cost)

        # textbook PI oracle: greedy wrt V, then exact evaluation, repeat
        oracle_policies = []
        v = np.zeros(4)
        for _ in range(30):
            pi, _ = oracle_bellman_apply(tensor, cost, 0.9, v)
            oracle_policies.append(pi.copy())
            v_new = oracle_policy_value(tensor, cost, 0.9, pi)
            if np.max(np.abs(v_new - v)) < 1e-13:
                break
            v = v_new

        for k in range(1, len(oracle_policies) + 1):
            res = solve(mdp, preset("PI", tol=1e-30, max_outer=k))
            assert np.array_equal(res.policy, oracle_policies[min(k, len(oracle_policies) - 1)])

    def test_pi_policy_sequence_finitely_terminating(self, rng):
        mdp = random_dense_mdp(rng, 5, 3, 0.9)
        seen = []
        for k in range(1, 12):
            res = solve(mdp, preset("PI", tol=1e-30, max_outer=k))
            seen.append(tuple(res.policy))
        converged_at = seen.index(seen[-1])
        # no policy repeats before the sequence settles
        assert len(set(seen[: converged_at + 1])) == converged_at + 1
        v_star = oracle_optimal_values(dense_tensor(mdp), np.asarray(mdp.stage_cost), 0.9)
        final = solve(mdp, preset("PI"))
        assert np.max(np.abs(final.values - v_star)) <= 1e-8

    def test_vi_contracts_residuals(self):
        res = solve(FIXTURE_INSTANCE, preset("VI"))
        h = res.residual_history
        for k in range(len(h) - 1):
            assert h[k + 1] <= 0.9 * h[k] + 1e-12
