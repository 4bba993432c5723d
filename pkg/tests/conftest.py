"""Shared helpers: dense-tensor construction and independent dense oracles.

Oracle code here deliberately sticks to plain numpy loops and dense algebra
so it shares nothing with the library's sparse/iterative code paths.
"""

from __future__ import annotations

import numpy as np
import pytest

from mdpsolve import CsrMatrix, MdpInstance, Mode


def mdp_from_dense(p_tensor: np.ndarray, cost: np.ndarray, gamma: float, mode=Mode.MIN) -> MdpInstance:
    """Build an instance from a dense (n, m, n) transition tensor."""
    n, m, n2 = p_tensor.shape
    assert n == n2
    rows = []
    cols = []
    vals = []
    ptr = [0]
    for s in range(n):
        for a in range(m):
            row = p_tensor[s, a]
            nz = np.flatnonzero(row != 0.0)
            cols.append(nz)
            vals.append(row[nz])
            ptr.append(ptr[-1] + nz.size)
    trans = CsrMatrix(
        n * m,
        n,
        np.array(ptr, dtype=np.int64),
        np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64),
        np.concatenate(vals) if vals else np.zeros(0),
    )
    return MdpInstance(n=n, m=m, gamma=gamma, stage_cost=np.asarray(cost, dtype=float),
                       transitions=trans, mode=mode)


def dense_tensor(mdp: MdpInstance) -> np.ndarray:
    """Recover the dense (n, m, n) tensor from an instance."""
    flat = mdp.transitions.to_dense()
    return flat.reshape(mdp.n, mdp.m, mdp.n)


def random_dense_mdp(rng: np.random.Generator, n: int, m: int, gamma: float,
                     mode=Mode.MIN) -> MdpInstance:
    """Fully dense random instance with row-stochastic transitions."""
    p = rng.random((n, m, n))
    p /= p.sum(axis=2, keepdims=True)
    g = rng.random((n, m))
    return mdp_from_dense(p, g, gamma, mode)


def oracle_bellman_apply(p_tensor: np.ndarray, cost: np.ndarray, gamma: float,
                         v: np.ndarray, maximize: bool = False):
    """Double loop over states and actions: returns (policy, Tv)."""
    n, m, _ = p_tensor.shape
    policy = np.zeros(n, dtype=int)
    tv = np.zeros(n)
    for s in range(n):
        best_a, best_q = 0, None
        for a in range(m):
            q = cost[s, a] + gamma * sum(p_tensor[s, a, t] * v[t] for t in range(n))
            if best_q is None or (q > best_q if maximize else q < best_q):
                best_a, best_q = a, q
        policy[s] = best_a
        tv[s] = best_q
    return policy, tv


def oracle_policy_value(p_tensor: np.ndarray, cost: np.ndarray, gamma: float,
                        policy: np.ndarray) -> np.ndarray:
    """Dense solve of the evaluation system for a fixed policy."""
    n = p_tensor.shape[0]
    p_pi = np.stack([p_tensor[s, policy[s]] for s in range(n)])
    g_pi = np.array([cost[s, policy[s]] for s in range(n)])
    return np.linalg.solve(np.eye(n) - gamma * p_pi, g_pi)


def oracle_optimal_values(p_tensor: np.ndarray, cost: np.ndarray, gamma: float,
                          maximize: bool = False) -> np.ndarray:
    """Brute force over all m^n policies; componentwise best value."""
    n, m, _ = p_tensor.shape
    best = None
    for flat in range(m**n):
        policy = [(flat // m**s) % m for s in range(n)]
        v = oracle_policy_value(p_tensor, cost, gamma, np.array(policy))
        if best is None:
            best = v
        else:
            best = np.maximum(best, v) if maximize else np.minimum(best, v)
    return best


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
