"""Iterative linear solvers and preconditioners for the policy-evaluation step.

All solvers share one contract: warm-start from the caller's iterate and run
until the 2-norm of the true linear residual ``b - A x`` drops to the target
or the iteration cap is reached, returning the last iterate either way.  The
Krylov methods track their own cheap residual estimate internally and verify
the true residual before declaring convergence, so a preconditioner cannot
fool the stopping test.

A floor of ``1e-14 * max(1, ||b||_2)`` is applied to the target: asking for
less than rounding error can deliver would only burn the iteration budget.

Symmetric-only methods (CG, MINRES) are deliberately absent: the evaluation
matrix ``I - gamma * P`` is non-symmetric for general transition structure.
Adding another kind means implementing the same warm-start/true-residual
contract and registering it in :class:`InnerSolver` and the dispatch below.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .sparse import (
    CsrMatrix,
    PolicyOperator,
    ResourceLimitError,
    assemble_explicit,
    dot,
    norm,
)

if TYPE_CHECKING:  # pragma: no cover
    from .parallel import Workers

GMRES_RESTART = 30
TARGET_FLOOR_SCALE = 1e-14
DEFAULT_ASSEMBLY_CAP_NNZ = 20_000_000
DEFAULT_DENSE_CAP = 4096

Applier = Callable[[np.ndarray], np.ndarray]


class InnerSolver(enum.Enum):
    """Iterative method used for the inexact policy-evaluation solve."""

    RICHARDSON = "richardson"
    GMRES = "gmres"
    BICGSTAB = "bicgstab"
    TFQMR = "tfqmr"

    @classmethod
    def from_name(cls, name: str) -> "InnerSolver":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown inner solver {name!r}; supported: {valid}") from None


class Preconditioner(enum.Enum):
    """Preconditioner applied on the left of the evaluation system.

    ``EXACT`` (option string ``svd``) is a direct dense solve; one Richardson
    step with it recovers exact policy iteration, which is its only purpose,
    so it is restricted to the Richardson inner solver.
    """

    NONE = "none"
    JACOBI = "jacobi"
    SOR_FORWARD = "sor"
    EXACT = "svd"

    @classmethod
    def from_name(cls, name: str) -> "Preconditioner":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown preconditioner {name!r}; supported: {valid}") from None


@dataclass(frozen=True)
class InnerSolveReport:
    """Outcome of one inexact evaluation solve."""

    iterations: int
    final_linear_residual_2norm: float
    converged: bool
    breakdown: bool
    target_2norm: float  # effective target after applying the floor


def build_preconditioner(
    op: PolicyOperator,
    kind: Preconditioner,
    sor_omega: float = 1.0,
    assembly_cap_nnz: int = DEFAULT_ASSEMBLY_CAP_NNZ,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> Applier:
    """Return a callable applying the chosen preconditioner to a vector.

    NONE is the identity.  JACOBI multiplies by the reciprocal of the
    diagonal ``1 - gamma * diag(P)``, computed straight from the gathered
    matrix.  SOR_FORWARD performs one forward triangular sweep on the
    explicitly assembled matrix with relaxation ``sor_omega`` (1 gives a
    Gauss-Seidel sweep).  EXACT solves the dense system directly.
    """
    if kind is Preconditioner.NONE:
        return _identity
    if kind is Preconditioner.JACOBI:
        # diagonal of I - gamma*P is at least 1 - gamma > 0: safe reciprocal
        inv_diag = 1.0 / (1.0 - op.gamma * op.p_pi.diagonal())
        return lambda r: r * inv_diag
    if kind is Preconditioner.SOR_FORWARD:
        if not (0.0 < sor_omega < 2.0):
            raise ValueError(f"SOR relaxation must lie in (0, 2), got {sor_omega}")
        a = assemble_explicit(op, cap_nnz=assembly_cap_nnz)
        return _SorForwardSweep(a, sor_omega)
    if kind is Preconditioner.EXACT:
        n = op.n
        if n > dense_cap:
            raise ResourceLimitError(
                f"exact preconditioning factors a dense {n} x {n} matrix but the cap is "
                f"{dense_cap}; raise dense_cap or pick an iterative preconditioner"
            )
        a_dense = np.eye(n) - op.gamma * op.p_pi.to_dense()
        return lambda r: np.linalg.solve(a_dense, r)
    raise ValueError(f"unknown preconditioner kind {kind!r}")


def _identity(r: np.ndarray) -> np.ndarray:
    return r


class _SorForwardSweep:
    """Forward substitution ``z = (D/omega + L)^{-1} r`` on an explicit matrix."""

    def __init__(self, a: CsrMatrix, omega: float):
        self.a = a
        self.omega = omega
        entry_rows = np.repeat(np.arange(a.rows, dtype=np.int64), a.row_lengths())
        diag_entries = np.flatnonzero(entry_rows == a.col_idx)
        if diag_entries.size != a.rows:
            raise ValueError("explicit matrix is missing diagonal entries")
        self.diag_pos = diag_entries

    def __call__(self, r: np.ndarray) -> np.ndarray:
        a, omega = self.a, self.omega
        ptr, cols, vals, dpos = a.row_ptr, a.col_idx, a.values, self.diag_pos
        z = np.zeros(a.rows)
        for i in range(a.rows):
            lo, dp = ptr[i], dpos[i]
            acc = np.dot(vals[lo:dp], z[cols[lo:dp]]) if dp > lo else 0.0
            z[i] = (r[i] - acc) * omega / vals[dp]
        return z


def inner_solve(
    op: PolicyOperator,
    b: np.ndarray,
    theta0: np.ndarray,
    target_2norm: float,
    max_it: int,
    kind: InnerSolver = InnerSolver.GMRES,
    pc: Applier | None = None,
    richardson_scale: float = 1.0,
    workers: "Workers | None" = None,
) -> tuple[np.ndarray, InnerSolveReport]:
    """Approximately solve ``(I - gamma*P) theta = b`` starting from ``theta0``.

    Stops as soon as ``||b - A theta||_2`` falls to ``target_2norm`` (after
    flooring, see module docstring) or after ``max_it`` iterations, whichever
    comes first.  On a recurrence breakdown the report's ``breakdown`` flag is
    set and the last iterate is returned; the caller decides the fallback.
    """
    b = np.asarray(b, dtype=np.float64)
    theta0 = np.asarray(theta0, dtype=np.float64)
    if b.shape != (op.n,) or theta0.shape != (op.n,):
        raise ValueError(f"rhs/start length must be {op.n}")
    if max_it < 1:
        raise ValueError(f"iteration cap must be >= 1, got {max_it}")
    if target_2norm < 0.0:
        raise ValueError(f"residual target must be >= 0, got {target_2norm}")
    eff_target = max(target_2norm, TARGET_FLOOR_SCALE * max(1.0, norm(b, "two", workers)))
    if pc is None:
        pc = _identity

    apply_a = lambda v: op.apply(v, workers)  # noqa: E731 - tight closure
    if kind is InnerSolver.RICHARDSON:
        theta, its, resid, broke = _richardson(
            apply_a, pc, b, theta0, eff_target, max_it, richardson_scale, workers
        )
    elif kind is InnerSolver.GMRES:
        theta, its, resid, broke = _gmres(apply_a, pc, b, theta0, eff_target, max_it, workers)
    elif kind is InnerSolver.BICGSTAB:
        theta, its, resid, broke = _bicgstab(apply_a, pc, b, theta0, eff_target, max_it, workers)
    elif kind is InnerSolver.TFQMR:
        theta, its, resid, broke = _tfqmr(apply_a, pc, b, theta0, eff_target, max_it, workers)
    else:
        raise ValueError(f"unknown inner solver kind {kind!r}")
    report = InnerSolveReport(
        iterations=its,
        final_linear_residual_2norm=resid,
        converged=bool(resid <= eff_target) and not broke,
        breakdown=broke,
        target_2norm=eff_target,
    )
    return theta, report


def _richardson(apply_a, pc, b, theta0, eff, max_it, scale, workers):
    theta = theta0.copy()
    it = 0
    while True:
        r = b - apply_a(theta)
        rn = norm(r, "two", workers)
        if rn <= eff or it >= max_it or not math.isfinite(rn):
            break
        theta = theta + scale * pc(r)
        it += 1
    return theta, it, rn, False


def _gmres(apply_a, pc, b, theta0, eff, max_it, workers):
    x = theta0.copy()
    it = 0
    r = b - apply_a(x)
    rn = norm(r, "two", workers)
    est_target = eff
    while rn > eff and it < max_it:
        z = pc(r)
        beta = norm(z, "two", workers)
        if beta == 0.0 or not math.isfinite(beta):
            break  # preconditioned residual vanished or blew up: cannot proceed
        basis = np.empty((GMRES_RESTART + 1, x.shape[0]))
        basis[0] = z / beta
        h = np.zeros((GMRES_RESTART + 1, GMRES_RESTART))
        cs = np.zeros(GMRES_RESTART)
        sn = np.zeros(GMRES_RESTART)
        g = np.zeros(GMRES_RESTART + 1)
        g[0] = beta
        j = 0
        while j < GMRES_RESTART and it < max_it:
            w = pc(apply_a(basis[j]))
            it += 1
            for l in range(j + 1):  # modified Gram-Schmidt
                h[l, j] = dot(basis[l], w, workers)
                w = w - h[l, j] * basis[l]
            hnorm = norm(w, "two", workers)
            h[j + 1, j] = hnorm
            for l in range(j):
                t = cs[l] * h[l, j] + sn[l] * h[l + 1, j]
                h[l + 1, j] = -sn[l] * h[l, j] + cs[l] * h[l + 1, j]
                h[l, j] = t
            denom = math.hypot(h[j, j], h[j + 1, j])
            if denom == 0.0:
                break
            cs[j], sn[j] = h[j, j] / denom, h[j + 1, j] / denom
            h[j, j] = denom
            h[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            j += 1
            if abs(g[j]) <= est_target or hnorm == 0.0:
                break  # estimated convergence, or invariant subspace reached
            basis[j] = w / hnorm
        if j == 0:
            break
        y = _back_substitute(h[:j, :j], g[:j])
        x = x + basis[:j].T @ y
        r = b - apply_a(x)
        rn = norm(r, "two", workers)
        if rn > eff and abs(g[j]) <= est_target:
            if abs(g[j]) == 0.0:
                break  # exact in the preconditioned space yet off target: stagnated
            # the cheap estimate was optimistic; tighten it by the observed ratio
            est_target = abs(g[j]) * (eff / rn) * 0.5
    return x, it, rn, False


def _back_substitute(r_mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    k = rhs.shape[0]
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        acc = rhs[i] - np.dot(r_mat[i, i + 1 :], y[i + 1 :])
        y[i] = acc / r_mat[i, i] if r_mat[i, i] != 0.0 else 0.0
    return y


def _bicgstab(apply_a, pc, b, theta0, eff, max_it, workers):
    x = theta0.copy()
    r_true = b - apply_a(x)
    rn = norm(r_true, "two", workers)
    it = 0
    breakdown = False
    if rn <= eff:
        return x, it, rn, breakdown
    r = np.array(pc(r_true), dtype=np.float64, copy=True)
    rtilde = r.copy()
    rtilde_norm = norm(rtilde, "two", workers)
    rho = dot(rtilde, r, workers)
    p = r.copy()
    est = norm(r, "two", workers)
    est_target = eff
    stale = False  # does r_true/rn lag behind x?
    while it < max_it:
        if abs(rho) <= 1e-14 * rtilde_norm * est:
            breakdown = True
            break
        v = pc(apply_a(p))
        sigma = dot(rtilde, v, workers)
        if abs(sigma) <= 1e-14 * rtilde_norm * norm(v, "two", workers):
            breakdown = True
            break
        alpha = rho / sigma
        s = r - alpha * v
        s_norm = norm(s, "two", workers)
        if s_norm <= est_target:
            # half step already good enough; verify against the true residual
            x = x + alpha * p
            it += 1
            r_true = b - apply_a(x)
            rn = norm(r_true, "two", workers)
            stale = False
            if rn <= eff:
                break
            est_target = _tighten(s_norm, eff, rn, est_target)
            r = np.array(pc(r_true), dtype=np.float64, copy=True)
            rtilde = r.copy()
            rtilde_norm = norm(rtilde, "two", workers)
            rho = dot(rtilde, r, workers)
            p = r.copy()
            est = norm(r, "two", workers)
            continue
        t = pc(apply_a(s))
        tt = dot(t, t, workers)
        if tt == 0.0:
            breakdown = True
            break
        omega = dot(t, s, workers) / tt
        if omega == 0.0 or not math.isfinite(omega):
            breakdown = True
            break
        x = x + alpha * p + omega * s
        r = s - omega * t
        it += 1
        stale = True
        est = norm(r, "two", workers)
        if est <= est_target:
            r_true = b - apply_a(x)
            rn = norm(r_true, "two", workers)
            stale = False
            if rn <= eff:
                break
            if est == 0.0:
                break  # recurrence can go no lower; true residual disagrees
            est_target = _tighten(est, eff, rn, est_target)
        rho_new = dot(rtilde, r, workers)
        beta = (rho_new / rho) * (alpha / omega)
        if not math.isfinite(beta):
            breakdown = True
            break
        rho = rho_new
        p = r + beta * (p - omega * v)
    if stale or breakdown:
        r_true = b - apply_a(x)
        rn = norm(r_true, "two", workers)
    return x, it, rn, breakdown


def _tfqmr(apply_a, pc, b, theta0, eff, max_it, workers):
    x = theta0.copy()
    r_true = b - apply_a(x)
    rn = norm(r_true, "two", workers)
    it = 0
    breakdown = False
    if rn <= eff:
        return x, it, rn, breakdown
    r0 = np.array(pc(r_true), dtype=np.float64, copy=True)
    w = r0.copy()
    y = r0.copy()
    d = np.zeros_like(r0)
    u = pc(apply_a(y))
    v = u.copy()
    tau = norm(r0, "two", workers)
    r0_norm = tau
    theta_q = 0.0
    eta = 0.0
    rho = dot(r0, r0, workers)
    est_target = eff
    stale = False
    while it < max_it:
        sigma = dot(r0, v, workers)
        if abs(sigma) <= 1e-14 * r0_norm * norm(v, "two", workers):
            breakdown = True
            break
        alpha = rho / sigma
        if alpha == 0.0 or not math.isfinite(alpha):
            breakdown = True
            break
        converged = False
        for half in (1, 2):
            if half == 2:
                y = y - alpha * v
                u = pc(apply_a(y))
            w = w - alpha * u
            d = y + (theta_q * theta_q * eta / alpha) * d
            if tau == 0.0:
                breakdown = True
                break
            theta_q = norm(w, "two", workers) / tau
            c = 1.0 / math.sqrt(1.0 + theta_q * theta_q)
            tau = tau * theta_q * c
            eta = c * c * alpha
            x = x + eta * d
            stale = True
            est = tau * math.sqrt(2.0 * it + half + 1.0)
            if est <= est_target:
                r_true = b - apply_a(x)
                rn = norm(r_true, "two", workers)
                stale = False
                if rn <= eff:
                    converged = True
                    break
                if est == 0.0:
                    breakdown = True  # quasi-residual exactly zero yet off target
                    break
                est_target = _tighten(est, eff, rn, est_target)
        it += 1
        if converged or breakdown:
            break
        rho_new = dot(r0, w, workers)
        if abs(rho_new) <= 1e-14 * r0_norm * norm(w, "two", workers):
            breakdown = True
            break
        beta = rho_new / rho
        rho = rho_new
        y = w + beta * y
        v = beta * u + beta * beta * v
        u = pc(apply_a(y))
        v = v + u
    if stale or breakdown:
        r_true = b - apply_a(x)
        rn = norm(r_true, "two", workers)
    return x, it, rn, breakdown


def _tighten(est: float, eff: float, rn: float, current: float) -> float:
    """Scale the cheap-estimate threshold by the observed estimate/true ratio."""
    return min(current, est * (eff / rn) * 0.5)
