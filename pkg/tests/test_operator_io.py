import numpy as np
import scipy.sparse as sp

from scripts.torus_complex import build_grid, coboundary
from utils.operator_io import export_matrix_market, import_matrix_market


def test_export_preserves_entries(tmp_path):
    matrix = sp.csr_matrix(np.array([[0.0, 1.5, 0.0], [-2.0, 0.0, 1e-300]]))
    path = export_matrix_market(matrix, str(tmp_path / "nested" / "op.mtx"), comment="teste")
    loaded = import_matrix_market(path)
    assert loaded.shape == (2, 3)
    np.testing.assert_array_equal(loaded.toarray(), matrix.toarray())


def test_extension_is_appended(tmp_path):
    path = export_matrix_market(sp.eye(3, format="csr"), str(tmp_path / "identity"))
    assert path.endswith(".mtx")
    np.testing.assert_array_equal(import_matrix_market(path).toarray(), np.eye(3))


def test_coboundaries_compose_to_zero_after_reload(tmp_path):
    grid = build_grid(3, [1.0] * 3, [4] * 3)
    paths = [export_matrix_market(coboundary(grid, q), str(tmp_path / f"d{q}.mtx")) for q in range(3)]
    d = [import_matrix_market(p) for p in paths]
    for q in range(2):
        assert abs(d[q + 1] @ d[q]).sum() == 0
