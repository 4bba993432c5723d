"""Binary matrix files, CSV exports and grid artifact writers.

The binary layout is fixed and bit-exact so round-trips are identical:

    offset 0   8 bytes   magic "MDPMAT01"
    offset 8   1 byte    kind: 0 = dense, 1 = CSR
    offset 9   8 bytes   rows, unsigned little-endian
    offset 17  8 bytes   cols, unsigned little-endian
    offset 25  8 bytes   nnz,  unsigned little-endian (rows*cols for dense)
    offset 33  payload   dense: rows*cols float64 LE, row-major
                         CSR:   row_ptr (rows+1 u64), col_idx (nnz u64),
                                values (nnz float64)

Readers validate the header arithmetic against the file length before
touching the payload.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .sparse import CsrMatrix

MAGIC = b"MDPMAT01"
KIND_DENSE = 0
KIND_CSR = 1
HEADER_LEN = 33
_HEADER = struct.Struct("<8sBQQQ")


class FileFormatError(ValueError):
    """Malformed matrix file; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def write_matrix(path, matrix) -> None:
    """Write a dense 2-D array or a CsrMatrix in the binary layout above."""
    path = Path(path)
    if isinstance(matrix, CsrMatrix):
        header = _HEADER.pack(MAGIC, KIND_CSR, matrix.rows, matrix.cols, matrix.nnz)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(matrix.row_ptr, dtype="<u8").tobytes())
            fh.write(np.ascontiguousarray(matrix.col_idx, dtype="<u8").tobytes())
            fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())
        return
    dense = np.asarray(matrix, dtype=np.float64)
    if dense.ndim != 2:
        raise ValueError(f"dense matrices must be 2-D, got shape {dense.shape}")
    rows, cols = dense.shape
    header = _HEADER.pack(MAGIC, KIND_DENSE, rows, cols, rows * cols)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dense, dtype="<f8").tobytes())


def read_matrix(path):
    """Read a matrix file; returns an ndarray (dense) or a CsrMatrix."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < HEADER_LEN:
        raise FileFormatError(f"file is {len(blob)} bytes, shorter than the header", len(blob))
    magic, kind, rows, cols, nnz = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FileFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if kind not in (KIND_DENSE, KIND_CSR):
        raise FileFormatError(f"unknown matrix kind {kind}", 8)
    if kind == KIND_DENSE:
        if nnz != rows * cols:
            raise FileFormatError(f"dense header declares nnz={nnz}, expected rows*cols={rows * cols}", 25)
        expected = HEADER_LEN + 8 * rows * cols
        if len(blob) != expected:
            raise FileFormatError(
                f"file length {len(blob)} does not match header arithmetic {expected}",
                min(len(blob), expected),
            )
        data = np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=HEADER_LEN)
        return data.astype(np.float64).reshape(rows, cols)
    expected = HEADER_LEN + 8 * (rows + 1) + 8 * nnz + 8 * nnz
    if len(blob) != expected:
        raise FileFormatError(
            f"file length {len(blob)} does not match header arithmetic {expected}",
            min(len(blob), expected),
        )
    off = HEADER_LEN
    row_ptr = np.frombuffer(blob, dtype="<u8", count=rows + 1, offset=off).astype(np.int64)
    off += 8 * (rows + 1)
    if row_ptr[-1] != nnz:
        raise FileFormatError(
            f"row_ptr ends at {row_ptr[-1]} but the header declares nnz={nnz}", off - 8
        )
    col_idx = np.frombuffer(blob, dtype="<u8", count=nnz, offset=off).astype(np.int64)
    off += 8 * nnz
    values = np.frombuffer(blob, dtype="<f8", count=nnz, offset=off).astype(np.float64)
    try:
        return CsrMatrix(rows, cols, row_ptr, col_idx, values)
    except ValueError as exc:
        raise FileFormatError(f"payload is not a valid CSR matrix: {exc}", HEADER_LEN) from exc


def write_vector_csv(path, values: np.ndarray, column: str = "value") -> None:
    values = np.asarray(values).ravel()
    integral = np.issubdtype(values.dtype, np.integer)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", column])
        for i, v in enumerate(values):
            writer.writerow([i, int(v) if integral else _fmt(v)])


def write_residuals_csv(path, residuals) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["outer_iteration", "residual_inf_norm"])
        for i, r in enumerate(residuals):
            writer.writerow([i, _fmt(r)])


def export_grid_artifacts(values: np.ndarray, policy: np.ndarray, meta, out_dir) -> tuple[Path, Path]:
    """Write a cost heatmap grid and an action-label grid as CSV files.

    ``meta`` must describe a 2-D layout (height, width, action_labels); grid
    cell (r, c) is state ``r * width + c``.  Returns the two file paths.
    """
    height = getattr(meta, "height", None)
    width = getattr(meta, "width", None)
    labels = getattr(meta, "action_labels", None)
    if not height or not width or labels is None:
        raise ValueError("grid export needs 2-D grid metadata (height, width, action labels)")
    values = np.asarray(values).ravel()
    policy = np.asarray(policy).ravel()
    if values.size != height * width or policy.size != height * width:
        raise ValueError(f"result length {values.size} does not fill a {height}x{width} grid")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = [f"c{c}" for c in range(width)]
    cost_path = out_dir / "values_grid.csv"
    with open(cost_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in range(height):
            writer.writerow([_fmt(v) for v in values[r * width : (r + 1) * width]])
    policy_path = out_dir / "policy_grid.csv"
    with open(policy_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in range(height):
            writer.writerow([labels[a] for a in policy[r * width : (r + 1) * width]])
    return cost_path, policy_path


def _fmt(x) -> str:
    # repr is the shortest string that round-trips the exact double
    return repr(float(x))
