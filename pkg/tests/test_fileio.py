import numpy as np
import pytest

from mdpsolve import (
    CsrMatrix,
    FileFormatError,
    export_grid_artifacts,
    gen_maze,
    gen_pendulum,
    gen_random,
    gen_sis,
    read_matrix,
    write_matrix,
)
from mdpsolve.fileio import HEADER_LEN, MAGIC
from mdpsolve.problems import (
    MazeParams,
    PendulumParams,
    RandomParams,
    SisParams,
    maze_grid_meta,
)
from mdpsolve.sparse import csr_identity

GENERATED = [
    gen_random(RandomParams(n=12, m=3, nnz_per_row=4, gamma=0.9, seed=9)),
    gen_sis(SisParams(population=10)),
    gen_pendulum(PendulumParams(grid_points=5, torque_points=3)),
    gen_maze(MazeParams(height=4, width=4, obstacles=frozenset({5}))),
]


@pytest.mark.parametrize("inst", GENERATED, ids=["random", "sis", "pendulum", "maze"])
def test_roundtrip_bitwise_for_generator_outputs(inst, tmp_path):
    write_matrix(tmp_path / "t.bin", inst.transitions)
    write_matrix(tmp_path / "c.bin", inst.stage_cost)
    trans = read_matrix(tmp_path / "t.bin")
    cost = read_matrix(tmp_path / "c.bin")
    assert isinstance(trans, CsrMatrix) and trans.equals(inst.transitions)
    assert isinstance(cost, np.ndarray) and np.array_equal(cost, inst.stage_cost)


def test_identity_roundtrip(tmp_path):
    write_matrix(tmp_path / "i.bin", csr_identity(3))
    assert read_matrix(tmp_path / "i.bin").equals(csr_identity(3))


def test_large_dense_roundtrip_hash_equal(tmp_path, rng):
    dense = rng.standard_normal((1000, 20))
    write_matrix(tmp_path / "d.bin", dense)
    back = read_matrix(tmp_path / "d.bin")
    assert hash(back.tobytes()) == hash(dense.tobytes())
    assert np.array_equal(back, dense)


class TestCorruption:
    def _valid_blob(self, tmp_path):
        write_matrix(tmp_path / "ok.bin", csr_identity(3))
        return (tmp_path / "ok.bin").read_bytes()

    def test_bad_magic(self, tmp_path):
        blob = b"XXXXXXXX" + self._valid_blob(tmp_path)[8:]
        (tmp_path / "bad.bin").write_bytes(blob)
        with pytest.raises(FileFormatError, match="magic") as err:
            read_matrix(tmp_path / "bad.bin")
        assert err.value.offset == 0

    def test_truncated_payload(self, tmp_path):
        blob = self._valid_blob(tmp_path)
        (tmp_path / "bad.bin").write_bytes(blob[:-4])
        with pytest.raises(FileFormatError, match="length"):
            read_matrix(tmp_path / "bad.bin")

    def test_truncated_header(self, tmp_path):
        (tmp_path / "bad.bin").write_bytes(MAGIC + b"\x01")
        with pytest.raises(FileFormatError, match="header"):
            read_matrix(tmp_path / "bad.bin")

    def test_trailing_garbage(self, tmp_path):
        blob = self._valid_blob(tmp_path) + b"\x00" * 8
        (tmp_path / "bad.bin").write_bytes(blob)
        with pytest.raises(FileFormatError, match="length"):
            read_matrix(tmp_path / "bad.bin")

    def test_unknown_kind_byte(self, tmp_path):
        blob = bytearray(self._valid_blob(tmp_path))
        blob[8] = 9
        (tmp_path / "bad.bin").write_bytes(bytes(blob))
        with pytest.raises(FileFormatError, match="kind") as err:
            read_matrix(tmp_path / "bad.bin")
        assert err.value.offset == 8

    def test_nnz_rowptr_mismatch(self, tmp_path):
        # row_ptr of identity(3) ends at 3; pad the payload to match a lying
        # header that declares nnz=4
        import struct

        header = struct.pack("<8sBQQQ", MAGIC, 1, 3, 3, 4)
        row_ptr = np.array([0, 1, 2, 3], dtype="<u8").tobytes()
        col = np.array([0, 1, 2, 0], dtype="<u8").tobytes()
        vals = np.ones(4, dtype="<f8").tobytes()
        (tmp_path / "bad.bin").write_bytes(header + row_ptr + col + vals)
        with pytest.raises(FileFormatError, match="nnz"):
            read_matrix(tmp_path / "bad.bin")

    def test_structurally_invalid_payload(self, tmp_path):
        import struct

        header = struct.pack("<8sBQQQ", MAGIC, 1, 1, 2, 2)
        row_ptr = np.array([0, 2], dtype="<u8").tobytes()
        col = np.array([1, 1], dtype="<u8").tobytes()  # duplicate column
        vals = np.ones(2, dtype="<f8").tobytes()
        (tmp_path / "bad.bin").write_bytes(header + row_ptr + col + vals)
        with pytest.raises(FileFormatError, match="CSR") as err:
            read_matrix(tmp_path / "bad.bin")
        assert err.value.offset == HEADER_LEN


class TestGridExport:
    def test_two_by_two_maze_grids(self, tmp_path):
        p = MazeParams(height=2, width=2)
        inst = gen_maze(p)
        from mdpsolve import solve

        res = solve(inst)
        vpath, ppath = export_grid_artifacts(res.values, res.policy, maze_grid_meta(p), tmp_path)
        vlines = vpath.read_text().strip().splitlines()
        plines = ppath.read_text().strip().splitlines()
        assert vlines[0] == "c0,c1"
        assert len(vlines) == 3 and len(plines) == 3
        # absorbing optimum at the goal (bottom-right)
        assert plines[2].split(",")[1] == "stay"

    def test_export_dimensions(self, tmp_path):
        p = MazeParams(height=3, width=5)
        inst = gen_maze(p)
        from mdpsolve import solve

        res = solve(inst)
        vpath, _ = export_grid_artifacts(res.values, res.policy, maze_grid_meta(p), tmp_path)
        rows = vpath.read_text().strip().splitlines()
        assert len(rows) == 4  # header + 3
        assert all(len(r.split(",")) == 5 for r in rows)

    def test_33x33_export_has_33_rows_and_columns(self, tmp_path):
        p = MazeParams(height=33, width=33)
        meta = maze_grid_meta(p)
        vpath, ppath = export_grid_artifacts(
            np.zeros(33 * 33), np.zeros(33 * 33, dtype=int), meta, tmp_path
        )
        for path in (vpath, ppath):
            rows = path.read_text().strip().splitlines()
            assert len(rows) == 34  # header + 33
            assert all(len(r.split(",")) == 33 for r in rows)

    def test_non_grid_metadata_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="grid"):
            export_grid_artifacts(np.zeros(4), np.zeros(4, dtype=int), object(), tmp_path)

    def test_wrong_length_rejected(self, tmp_path):
        p = MazeParams(height=2, width=2)
        with pytest.raises(ValueError, match="grid"):
            export_grid_artifacts(np.zeros(5), np.zeros(5, dtype=int), maze_grid_meta(p), tmp_path)
