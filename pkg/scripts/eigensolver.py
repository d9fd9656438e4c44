from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from utils.exceptions import InconclusiveCountError
from utils.logger import setup_logger

logger = setup_logger("eigensolver")

KERNEL_RTOL = 1e-10
KERNEL_SEPARATION = 100.0
DENSE_LIMIT = 4096
CLUSTER_FLOOR = 1e-2
CLEAR_GAP = 10.0
INCONCLUSIVE_MARGIN = 0.1


@dataclass(frozen=True)
class SpectrumRequest:
    q: int
    t: float
    k: int
    tol: float = 1e-8
    max_iter: int = 300
    seed: int = 42

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k precisa ser >= 1, recebeu {self.k}")
        if self.tol <= 0:
            raise ValueError(f"tol precisa ser positivo, recebeu {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter precisa ser >= 1, recebeu {self.max_iter}")


@dataclass(eq=False)
class EigResult:
    values: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    scale: float
    iterations: int
    vectors: Optional[np.ndarray] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


@dataclass(frozen=True)
class GapAnalysis:
    kernel_dim: int
    low_count: int
    threshold_used: float
    gap_ratio: float
    no_clear_cluster: bool = False


def gershgorin_bound(op) -> float:
    """Maior soma absoluta de linha: cota superior do espectro de um operador simétrico."""
    if sp.issparse(op):
        sums = np.asarray(abs(op).sum(axis=1)).ravel()
    else:
        sums = np.abs(np.asarray(op)).sum(axis=1)
    return float(sums.max()) if sums.size else 0.0


def _orthogonalize(block: np.ndarray, basis: List[np.ndarray]) -> np.ndarray:
    # Gram-Schmidt clássico aplicado duas vezes
    for _ in range(2):
        for Q in basis:
            block = block - Q @ (Q.T @ block)
    return block


def _next_block(W: np.ndarray, basis: List[np.ndarray], rng: np.random.Generator, width: int) -> np.ndarray:
    """Ortonormaliza W contra a base; completa com direções aleatórias se W perder posto."""
    reference = np.linalg.norm(W)
    W = _orthogonalize(W, basis)
    U, s, _ = la.svd(W, full_matrices=False)
    keep = U[:, s > 1e-10 * reference] if reference > 0 else U[:, :0]
    while keep.shape[1] < width:
        extra = rng.standard_normal((W.shape[0], width - keep.shape[1]))
        extra = _orthogonalize(extra, basis + [keep])
        U2, s2, _ = la.svd(extra, full_matrices=False)
        keep = np.hstack([keep, U2[:, s2 > 1e-10 * s2[0]]])
    return keep[:, :width]


def _ritz(Q: np.ndarray, SQ: np.ndarray, T: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    theta, Y = la.eigh(0.5 * (T + T.T), subset_by_index=[0, k - 1])
    residuals = np.linalg.norm(SQ @ Y - (Q @ Y) * theta, axis=0)
    return theta, Y, residuals


def smallest_eigs(op, request: SpectrumRequest, keep_vectors: bool = True) -> EigResult:
    """k menores autopares de um operador simétrico PSD por Lanczos em blocos.

    A iteração roda sobre σI - S, σ = cota de Gershgorin, de modo que os menores
    autovalores de S são os maiores do operador transformado. Reortogonalização
    completa; Rayleigh-Ritz sobre toda a base.
    """
    size = op.shape[0]
    k = request.k
    if k >= size:
        raise ValueError(f"k={k} precisa ser menor que a dimensão {size}")

    sigma = gershgorin_bound(op)
    if sigma == 0.0:
        logger.debug("Operador nulo: espectro identicamente zero")
        return EigResult(
            values=np.zeros(k),
            residuals=np.zeros(k),
            converged=np.ones(k, dtype=bool),
            scale=0.0,
            iterations=0,
            vectors=np.eye(size)[:, :k] if keep_vectors else None,
        )

    rng = np.random.default_rng(request.seed)
    width = k
    basis: List[np.ndarray] = [_next_block(rng.standard_normal((size, width)), [], rng, width)]
    images: List[np.ndarray] = [np.asarray(op @ basis[0])]
    # projeção Q^T S Q mantida em blocos, sem recalcular a cada checagem
    T = basis[0].T @ images[0]
    cutoff = request.tol * sigma

    next_check = 5
    iterations = 0
    for iterations in range(1, request.max_iter + 1):
        if iterations >= next_check:
            _, _, residuals = _ritz(np.hstack(basis), np.hstack(images), T, k)
            if np.all(residuals <= cutoff):
                break
            next_check = max(iterations + 5, int(1.2 * iterations))
        remaining = size - sum(Q.shape[1] for Q in basis)
        if remaining == 0:
            break
        W = sigma * basis[-1] - images[-1]
        block = _next_block(W, basis, rng, min(width, remaining))
        image = np.asarray(op @ block)
        cross = np.vstack([Q.T @ image for Q in basis])
        T = np.block([[T, cross], [cross.T, block.T @ image]])
        basis.append(block)
        images.append(image)

    Q = np.hstack(basis)
    theta, Y, _ = _ritz(Q, np.hstack(images), T, k)
    vectors = Q @ Y
    vectors /= np.linalg.norm(vectors, axis=0)
    # resíduo recalculado com o operador, independente da base armazenada
    residuals = np.linalg.norm(np.asarray(op @ vectors) - vectors * theta, axis=0)
    converged = residuals <= cutoff

    result = EigResult(
        values=np.asarray(theta, dtype=float),
        residuals=residuals,
        converged=converged,
        scale=sigma,
        iterations=iterations,
        vectors=vectors if keep_vectors else None,
    )
    if not result.all_converged:
        message = (
            f"{int((~converged).sum())} de {k} pares não convergiram em {iterations} iterações "
            f"(q={request.q}, t={request.t}, maior resíduo {residuals.max():.2e})"
        )
        result.warnings.append(message)
        logger.warning(message)
    else:
        logger.debug(
            f"Lanczos convergiu: q={request.q}, t={request.t}, k={k}, {iterations} iterações, base {Q.shape[1]}"
        )
    return result


def dense_eigh(op) -> Tuple[np.ndarray, np.ndarray]:
    dimension = op.shape[0]
    if dimension > DENSE_LIMIT:
        raise ValueError(f"Dimensão {dimension} excede o limite do oráculo denso ({DENSE_LIMIT})")
    matrix = op.toarray() if sp.issparse(op) else np.asarray(op, dtype=float)
    return la.eigh(0.5 * (matrix + matrix.T))


def dense_smallest(op, request: SpectrumRequest, keep_vectors: bool = True) -> EigResult:
    """Mesmo contrato de smallest_eigs, por decomposição densa."""
    values, vectors = dense_eigh(op)
    values, vectors = values[: request.k], vectors[:, : request.k]
    residuals = np.linalg.norm(np.asarray(op @ vectors) - vectors * values, axis=0)
    scale = gershgorin_bound(op)
    return EigResult(
        values=values,
        residuals=residuals,
        converged=residuals <= request.tol * max(scale, np.finfo(float).tiny),
        scale=scale,
        iterations=0,
        vectors=vectors if keep_vectors else None,
    )


def dense_spectrum_oracle(op) -> np.ndarray:
    """Espectro completo em ordem crescente por decomposição densa."""
    dimension = op.shape[0]
    if dimension > DENSE_LIMIT:
        raise ValueError(f"Dimensão {dimension} excede o limite do oráculo denso ({DENSE_LIMIT})")
    matrix = op.toarray() if sp.issparse(op) else np.asarray(op, dtype=float)
    return la.eigvalsh(0.5 * (matrix + matrix.T))


def count_below(result: EigResult, threshold: float) -> int:
    """#{λ_i <= threshold}; recusa quando um par não convergido torna a contagem ambígua."""
    values = np.asarray(result.values)
    for value, ok in zip(values, result.converged):
        if ok:
            continue
        if value <= threshold or abs(value - threshold) <= INCONCLUSIVE_MARGIN * abs(threshold):
            raise InconclusiveCountError(
                f"inconclusive count: autovalor não convergido {value:.3e} próximo do limiar {threshold:.3e}"
            )
    return int(np.sum(values <= threshold))


def kernel_dimension(result: EigResult, scale: Optional[float] = None, reltol: float = KERNEL_RTOL) -> int:
    scale = result.scale if scale is None else scale
    cut = reltol * scale
    values = np.asarray(result.values)
    dimension = int(np.sum(values <= cut))
    if dimension == len(values):
        message = f"Todos os {dimension} autovalores estão abaixo do corte {cut:.2e}: núcleo pode ser maior"
    elif values[dimension] < KERNEL_SEPARATION * cut:
        message = f"ill-separated kernel: λ_{dimension + 1} = {values[dimension]:.3e} com corte {cut:.3e}"
    else:
        return dimension
    result.warnings.append(message)
    logger.warning(message)
    return dimension


def detect_gap(
    values: Sequence[float],
    k_max: Optional[int] = None,
    scale: Optional[float] = None,
    cluster_floor: float = CLUSTER_FLOOR,
) -> GapAnalysis:
    """Separa o agrupamento baixo do resto do espectro pela maior razão entre vizinhos.

    O corte é escolhido pelo escore λ_{i+1} / max(λ_i, cluster_floor·λ_max); a
    razão reportada usa o piso ε_machine·scale.
    """
    values = np.sort(np.asarray(values, dtype=float))
    if len(values) < 2:
        raise ValueError("detect_gap precisa de pelo menos 2 valores")
    largest = float(np.max(np.abs(values)))
    scale = largest if scale is None else scale
    k_max = len(values) - 1 if k_max is None else min(k_max, len(values) - 1)
    if k_max < 1:
        raise ValueError(f"k_max precisa ser >= 1, recebeu {k_max}")

    floor = cluster_floor * largest
    tiny = np.finfo(float).eps * scale
    scores = [values[i + 1] / max(values[i], floor, tiny) for i in range(k_max)]
    best = int(np.argmax(scores))

    kernel = int(np.sum(values <= KERNEL_RTOL * scale))
    low_count = max(best + 1, min(kernel, k_max))
    lower = max(values[low_count - 1], tiny)
    upper = values[low_count]
    gap_ratio = float(upper / lower) if lower > 0 else float("inf")
    no_clear = bool(scores[best] < CLEAR_GAP)
    if no_clear:
        logger.warning(f"no clear cluster: melhor razão {scores[best]:.2f} < {CLEAR_GAP}")
    return GapAnalysis(
        kernel_dim=min(kernel, low_count),
        low_count=low_count,
        threshold_used=float(np.sqrt(lower * upper)),
        gap_ratio=gap_ratio,
        no_clear_cluster=no_clear,
    )
