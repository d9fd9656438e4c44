import os

import scipy.io
import scipy.sparse as sp

from utils.logger import setup_logger

logger = setup_logger("operator_io")


def export_matrix_market(matrix, path: str, comment: str = "") -> str:
    """Grava um operador esparso em MatrixMarket (coordinate real general, índices 1-based)."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    coo = sp.coo_matrix(matrix, dtype=float)
    try:
        scipy.io.mmwrite(path, coo, comment=comment, field="real", symmetry="general")
    except Exception as e:
        logger.error(f"Erro ao exportar operador para {path}: {e}")
        raise
    # mmwrite acrescenta a extensão quando ela falta
    if not path.endswith(".mtx") and os.path.exists(path + ".mtx"):
        path = path + ".mtx"
    logger.info(f"Operador {coo.shape} com {coo.nnz} entradas exportado para {path}")
    return path


def import_matrix_market(path: str) -> sp.csr_matrix:
    """Lê um arquivo MatrixMarket e devolve CSR."""
    try:
        return sp.csr_matrix(scipy.io.mmread(path))
    except Exception as e:
        logger.error(f"Erro ao ler operador de {path}: {e}")
        raise
