"""Small helpers for the front-end tests."""

from __future__ import annotations

import numpy as np

from mdpsolve import CsrMatrix, MdpInstance


def dense_to_instance(p_tensor: np.ndarray, cost: np.ndarray, gamma: float) -> MdpInstance:
    n, m, _ = p_tensor.shape
    cols = []
    vals = []
    ptr = [0]
    for s in range(n):
        for a in range(m):
            nz = np.flatnonzero(p_tensor[s, a] != 0.0)
            cols.append(nz)
            vals.append(p_tensor[s, a][nz])
            ptr.append(ptr[-1] + nz.size)
    trans = CsrMatrix(n * m, n, np.array(ptr, dtype=np.int64),
                      np.concatenate(cols), np.concatenate(vals))
    return MdpInstance(n=n, m=m, gamma=gamma, stage_cost=np.asarray(cost, dtype=float),
                       transitions=trans)
