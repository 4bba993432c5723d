"""Bellman operators: greedy policy extraction, residuals, exact evaluation.

Greedy extraction uses the reshape strategy: one product of the full
row-stacked transition matrix with the cost vector (length ``n*m``),
reshaped to ``n x m``, scaled by the discount factor and added to the stage
costs; the row-wise argmin (argmax when maximizing) gives the policy.  This
costs O(n*m) memory but needs a single allocation, which beats looping over
actions with one gathered matrix per action.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .model import MdpInstance, Mode, ValidationError
from .sparse import (
    ResourceLimitError,
    gather_policy_cost,
    gather_policy_matrix,
    norm,
    spmv,
)

if TYPE_CHECKING:  # pragma: no cover
    from .parallel import Workers


@dataclass(frozen=True)
class GreedyResult:
    """A greedy policy together with the value it achieves.

    ``applied[s]`` is ``stage_cost[s, policy[s]] + gamma * (P_policy V)[s]``
    for the cost vector the extraction was run on, i.e. the Bellman operator
    applied to that vector.
    """

    policy: np.ndarray
    applied: np.ndarray


def greedy_policy(
    mdp: MdpInstance,
    v: np.ndarray,
    mode: Mode | None = None,
    workers: "Workers | None" = None,
) -> GreedyResult:
    """Extract a greedy policy for cost vector ``v``; ties pick the smallest action."""
    v = _check_cost_vector(mdp, v)
    mode = mode or mdp.mode
    pv = spmv(mdp.transitions, v, workers, block_scale=mdp.m)
    policy = np.empty(mdp.n, dtype=np.int64)
    applied = np.empty(mdp.n)

    def block(_r: int, lo: int, hi: int) -> None:
        q = mdp.stage_cost[lo:hi] + mdp.gamma * pv[lo * mdp.m : hi * mdp.m].reshape(hi - lo, mdp.m)
        # argmin/argmax return the first hit, i.e. the smallest action index
        pi = q.argmax(axis=1) if mode is Mode.MAX else q.argmin(axis=1)
        policy[lo:hi] = pi
        applied[lo:hi] = q[np.arange(hi - lo), pi]

    if workers is None:
        block(0, 0, mdp.n)
    else:
        workers.run_blocks(block)
    return GreedyResult(policy=policy, applied=applied)


def bellman_residual(
    mdp: MdpInstance,
    v: np.ndarray,
    mode: Mode | None = None,
    workers: "Workers | None" = None,
) -> tuple[np.ndarray, float]:
    """Optimality residual ``r = v - Tv`` and its infinity norm."""
    r = np.asarray(v, dtype=np.float64) - greedy_policy(mdp, v, mode, workers).applied
    return r, norm(r, "inf", workers)


def policy_residual(
    mdp: MdpInstance,
    pi: np.ndarray,
    v: np.ndarray,
    workers: "Workers | None" = None,
) -> tuple[np.ndarray, float]:
    """Evaluation residual ``r = v - (g_pi + gamma * P_pi v)`` and its infinity norm."""
    v = _check_cost_vector(mdp, v)
    p_pi = gather_policy_matrix(mdp, pi)
    g_pi = gather_policy_cost(mdp, pi)
    r = v - (g_pi + mdp.gamma * spmv(p_pi, v, workers))
    return r, norm(r, "inf", workers)


def policy_cost_exact(mdp: MdpInstance, pi: np.ndarray, dense_cap: int = 4096) -> np.ndarray:
    """Discounted cost of a fixed policy by dense factorization.

    Solves ``(I - gamma * P_pi) v = g_pi`` directly; intended as an oracle
    and for the exact policy-iteration configuration, so the state count is
    capped (``dense_cap``) to keep the dense matrix affordable.
    """
    if mdp.n > dense_cap:
        raise ResourceLimitError(
            f"dense policy evaluation needs an {mdp.n} x {mdp.n} matrix but the cap is "
            f"{dense_cap}; raise dense_cap explicitly if this size is intended"
        )
    p_pi = gather_policy_matrix(mdp, pi)
    g_pi = gather_policy_cost(mdp, pi)
    a = np.eye(mdp.n) - mdp.gamma * p_pi.to_dense()
    try:
        v = np.linalg.solve(a, g_pi)
    except np.linalg.LinAlgError as exc:  # cannot happen for stochastic rows, gamma < 1
        raise ArithmeticError(f"policy evaluation system is singular: {exc}") from exc
    resid = float(np.max(np.abs(a @ v - g_pi)))
    if resid > 1e-10 * max(1.0, float(np.max(np.abs(g_pi)))):
        raise ArithmeticError(
            f"dense policy evaluation residual {resid:.3e} exceeds tolerance; input data corrupt?"
        )
    return v


def _check_cost_vector(mdp: MdpInstance, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (mdp.n,):
        raise ValidationError(f"cost vector length {v.shape} does not match n = {mdp.n}")
    if not np.isfinite(v).all():
        raise ValidationError("cost vector has non-finite entries")
    return v
