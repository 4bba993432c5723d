"""Scripting-style front end for the mdpsolve solver.

The workflow mirrors how solver packages are typically scripted: create an
``MDP`` instance, attach a stage-cost matrix and a transition tensor built
by :meth:`Matrix.fromFile` or the ``create*`` callback helpers, configure
hyperparameters with option strings via :meth:`MDP.setOption`, then call
:meth:`MDP.solve`.

Everything numerical is delegated to :mod:`mdpsolve`; this package only
assembles inputs and translates option strings, so results are identical to
driving the solver library directly.

    import mdpsolve_frontend as mf

    mdp = mf.MDP()
    mdp.setStageCostMatrix(mf.Matrix.fromFile("maze_cost.bin"))
    mdp.setTransitionProbabilityTensor(mf.Matrix.fromFile("maze_transitions.bin"))
    mdp.setOption("-discount", "0.99")
    mdp.setOption("-ksp_type", "tfqmr")
    result = mdp.solve()
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from mdpsolve import (
    CsrMatrix,
    InnerSolver,
    MdpInstance,
    Mode,
    Preconditioner,
    SolveOptions,
    SolveResult,
    ValidationError,
    build_from_callbacks,
    read_matrix,
)
from mdpsolve import solve as _solve

__all__ = [
    "MDP",
    "Matrix",
    "createStageCostMatrix",
    "createTransitionProbabilityTensor",
]

__version__ = "0.1.0"


class Matrix:
    """A loaded or generated matrix, attachable to an :class:`MDP`.

    Holds either a dense array (stage costs) or a CSR matrix (transition
    tensor); which one decides where it can be attached.
    """

    def __init__(self, data):
        if not isinstance(data, (np.ndarray, CsrMatrix)):
            raise TypeError("Matrix wraps a dense ndarray or a CsrMatrix")
        self.data = data

    @staticmethod
    def fromFile(path) -> "Matrix":
        """Load a matrix from a binary file (format errors carry byte offsets)."""
        return Matrix(read_matrix(Path(path)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def isSparse(self) -> bool:
        return isinstance(self.data, CsrMatrix)

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        kind = "csr" if self.isSparse else "dense"
        return f"Matrix({kind}, shape={self.shape})"


def createStageCostMatrix(num_states: int, num_actions: int,
                          fn: Callable[[int, int], float]) -> Matrix:
    """Evaluate ``fn(state, action)`` over all pairs into a dense cost matrix."""
    built = build_from_callbacks(
        num_states, num_actions, 0.5, fn, lambda s, a: ([s], [1.0])
    )
    return Matrix(np.array(built.stage_cost))


def createTransitionProbabilityTensor(
    num_states: int,
    num_actions: int,
    fn: Callable[[int, int], tuple[Sequence[int], Sequence[float]]],
    prealloc: int | None = None,
) -> Matrix:
    """Evaluate ``fn(state, action) -> (successors, probabilities)`` into a tensor.

    ``prealloc`` is a per-row nonzero bound; rows exceeding it raise instead
    of being truncated.  Validation failures name the offending pair.
    """
    built = build_from_callbacks(
        num_states, num_actions, 0.5, lambda s, a: 0.0, fn, prealloc=prealloc
    )
    return Matrix(built.transitions)


def _parse_bool(value: str) -> bool:
    if str(value).strip().lower() in ("", "1", "true", "yes", "on"):
        return True
    if str(value).strip().lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"cannot parse {value!r} as a flag")


# option name -> (target key, parser); targets starting with "@" live outside
# SolveOptions (problem-level settings)
_OPTIONS: dict[str, tuple[str, Callable]] = {
    "-max_iter_pi": ("max_outer", int),
    "-max_iter_ksp": ("max_inner", int),
    "-atol_pi": ("tol", float),
    "-alpha": ("alpha", float),
    "-ksp_type": ("inner", InnerSolver.from_name),
    "-pc_type": ("pc", Preconditioner.from_name),
    "-ksp_max_it": ("ksp_max_it", int),
    "-ksp_richardson_scale": ("richardson_scale", float),
    "-pc_sor_forward": ("@sor_forward", _parse_bool),
    "-pc_sor_omega": ("sor_omega", float),
    "-workers": ("workers", int),
    "-discount": ("@discount", float),
    "-mode": ("mode", Mode.from_name),
}


class MDP:
    """One problem plus its solver configuration.

    Attach data with :meth:`setStageCostMatrix` and
    :meth:`setTransitionProbabilityTensor`; shapes are cross-checked when
    :meth:`solve` runs.  Hyperparameters are set as option strings
    (:meth:`setOption`); the discount factor is the ``-discount`` option and
    must be set before solving.
    """

    def __init__(self):
        self._cost: np.ndarray | None = None
        self._transitions: CsrMatrix | None = None
        self._discount: float | None = None
        self._solver_fields: dict[str, object] = {}

    def setStageCostMatrix(self, matrix) -> None:
        """Attach the dense stage-cost matrix (replaces any previous one)."""
        data = matrix.data if isinstance(matrix, Matrix) else matrix
        if isinstance(data, CsrMatrix):
            raise ValidationError("the stage-cost matrix must be dense, got a sparse matrix")
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"the stage-cost matrix must be 2-D, got shape {arr.shape}")
        self._cost = arr

    def setTransitionProbabilityTensor(self, tensor) -> None:
        """Attach the row-stacked CSR transition tensor (replaces any previous one)."""
        data = tensor.data if isinstance(tensor, Matrix) else tensor
        if not isinstance(data, CsrMatrix):
            raise ValidationError("the transition tensor must be a CSR matrix; load or create one")
        self._transitions = data

    def setOption(self, name: str, value) -> None:
        """Set one solver or problem option by its string name.

        Unknown names are rejected immediately with the list of valid ones;
        values are parsed eagerly so typos fail at the call site.
        """
        key = str(name).strip()
        lookup = key if key.startswith("-") else "-" + key
        if lookup not in _OPTIONS:
            valid = ", ".join(sorted(_OPTIONS))
            raise ValidationError(f"unknown option {name!r}; valid options: {valid}")
        target, parse = _OPTIONS[lookup]
        try:
            parsed = parse(str(value))
        except (ValueError, ValidationError) as exc:
            raise ValidationError(f"cannot parse option {lookup} value {value!r}: {exc}") from exc
        if target == "@discount":
            self._discount = parsed
        elif target == "@sor_forward":
            pass  # forward sweeps are the only SOR variant; accepted for compatibility
        else:
            self._solver_fields[target] = parsed

    # accepted spelling variant
    SetOption = setOption

    def solverOptions(self) -> SolveOptions:
        """The solver configuration the next :meth:`solve` call will use."""
        opts = SolveOptions(**self._solver_fields)
        opts.check()
        return opts

    def instance(self) -> MdpInstance:
        """Assemble the solver-library instance; validates shapes and data."""
        if self._cost is None:
            raise ValidationError("no stage-cost matrix set; call setStageCostMatrix first")
        if self._transitions is None:
            raise ValidationError(
                "no transition tensor set; call setTransitionProbabilityTensor first"
            )
        if self._discount is None:
            raise ValidationError("no discount factor set; call setOption('-discount', ...) first")
        n, m = self._cost.shape
        t = self._transitions
        if (t.rows, t.cols) != (n * m, n):
            raise ValidationError(
                f"transition tensor shape {t.shape} does not match the ({n}, {m}) cost "
                f"matrix; expected ({n * m}, {n})"
            )
        mode = self._solver_fields.get("mode") or Mode.MIN
        return MdpInstance(n=n, m=m, gamma=self._discount, stage_cost=self._cost,
                           transitions=t, mode=mode)

    def solve(self) -> SolveResult:
        """Run the solver on the attached data with the configured options."""
        return _solve(self.instance(), self.solverOptions())
