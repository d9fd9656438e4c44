from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from scripts.morse_functions import MorseFunctionSpec
from scripts.torus_complex import Axes, MassMatrix, TorusGrid, coboundary, mass_matrix
from utils.exceptions import ResolutionError
from utils.logger import setup_logger

logger = setup_logger("witten_operators")

EXPONENT_LIMIT = 700.0


@dataclass(eq=False)
class DeformedComplex:
    """Complexo deformado d_t = e^{-tf} d e^{tf} para um par (f, t).

    `factors[q]` é D_q = M_{q+1}^{1/2} d_t M_q^{-1/2} e `laplacians[q]` é
    S_q = M_q^{1/2} Δ_t M_q^{-1/2}, simétrico.
    """

    grid: TorusGrid
    f: MorseFunctionSpec
    t: float
    d: List[sp.csr_matrix]
    mass: List[MassMatrix]
    factors: List[sp.csr_matrix]
    laplacians: List[sp.csr_matrix]
    stats: Dict[int, Dict[str, float]] = field(default_factory=dict)

    def adjoint(self, q: int) -> sp.csr_matrix:
        return adjoint_operator(self.d[q], self.mass[q], self.mass[q + 1])

    def laplacian_operator(self, q: int) -> sp.csr_matrix:
        """Δ_t na base de cochains (não simetrizado)."""
        root = self.mass[q].sqrt()
        return (sp.diags(1.0 / root) @ self.laplacians[q] @ sp.diags(root)).tocsr()


@dataclass(frozen=True, eq=False)
class BochnerTerms:
    potential: np.ndarray
    coupling: sp.csr_matrix


def overflow_bound(grid: TorusGrid, f: MorseFunctionSpec) -> float:
    """Maior t aceito por deform_coboundary em todos os graus."""
    worst = 0.0
    for q in range(grid.n):
        d = coboundary(grid, q).tocoo()
        diff = f.value(grid.cell_midpoints(q))[d.col] - f.value(grid.cell_midpoints(q + 1))[d.row]
        worst = max(worst, float(np.max(np.abs(diff))) if diff.size else 0.0)
    return np.inf if worst == 0 else EXPONENT_LIMIT / worst


def deform_coboundary(d_q: sp.spmatrix, grid: TorusGrid, q: int, f: MorseFunctionSpec, t: float) -> sp.csr_matrix:
    """Entrada (σ, τ) = sinal · exp(t (f(m_τ) - f(m_σ))), com a diferença feita antes da exponencial."""
    if t < 0:
        raise ValueError(f"Parâmetro de deformação t={t} negativo")
    if t == 0:
        return d_q.tocsr(copy=True)

    d = d_q.tocoo()
    f_facet = f.value(grid.cell_midpoints(q))
    f_cell = f.value(grid.cell_midpoints(q + 1))
    exponent = t * (f_facet[d.col] - f_cell[d.row])
    largest = float(np.max(np.abs(exponent))) if exponent.size else 0.0
    if largest > EXPONENT_LIMIT:
        logger.error(f"Expoente {largest:.1f} excede {EXPONENT_LIMIT} em q={q}, t={t}")
        raise ResolutionError(
            f"resolution too coarse for this t: t·max|Δf| = {largest:.1f} > {EXPONENT_LIMIT} (q={q}, t={t})"
        )
    return sp.csr_matrix((d.data * np.exp(exponent), (d.row, d.col)), shape=d.shape)


def adjoint_operator(op: sp.spmatrix, mass_q: MassMatrix, mass_q1: MassMatrix) -> sp.csr_matrix:
    """M_q^{-1} op^T M_{q+1}: adjunto de op nos produtos internos de massa."""
    if op.shape != (len(mass_q1.diagonal), len(mass_q.diagonal)):
        raise ValueError(
            f"Dimensões inconsistentes: operador {op.shape}, massas {len(mass_q.diagonal)} e {len(mass_q1.diagonal)}"
        )
    return (sp.diags(1.0 / mass_q.diagonal) @ op.T @ sp.diags(mass_q1.diagonal)).tocsr()


def _symmetrized_factor(d: sp.spmatrix, mass_q: MassMatrix, mass_q1: MassMatrix) -> sp.csr_matrix:
    return (sp.diags(mass_q1.sqrt()) @ d @ sp.diags(1.0 / mass_q.sqrt())).tocsr()


def _laplacian_from_factors(factors: List[sp.csr_matrix], q: int, size: int) -> Tuple[sp.csr_matrix, float]:
    S = sp.csr_matrix((size, size))
    if q > 0:
        S = S + factors[q - 1] @ factors[q - 1].T
    if q < len(factors):
        S = S + factors[q].T @ factors[q]
    S = S.tocsr()
    asymmetry = abs(S - S.T)
    residual = float(asymmetry.max()) if asymmetry.nnz else 0.0
    return ((S + S.T) * 0.5).tocsr(), residual


def assemble_complex(grid: TorusGrid, f: MorseFunctionSpec, t: float) -> DeformedComplex:
    """Monta d_t, massas, fatores simetrizados e os Laplacianos de Witten de todos os graus."""
    mass = [mass_matrix(grid, q) for q in range(grid.n + 1)]
    d = [deform_coboundary(coboundary(grid, q), grid, q, f, t) for q in range(grid.n)]
    factors = [_symmetrized_factor(d[q], mass[q], mass[q + 1]) for q in range(grid.n)]

    laplacians, stats = [], {}
    for q in range(grid.n + 1):
        S, residual = _laplacian_from_factors(factors, q, grid.num_cells(q))
        laplacians.append(S)
        stats[q] = {"nnz": int(S.nnz), "symmetry_residual": residual}
    for q in range(grid.n - 1):
        product = d[q + 1] @ d[q]
        scale = max(abs(d[q]).max(), abs(d[q + 1]).max())
        stats[q]["d_squared_residual"] = float(abs(product).max() / scale) if product.nnz else 0.0

    logger.info(
        f"Complexo deformado montado: t={t}, nnz por grau {[stats[q]['nnz'] for q in range(grid.n + 1)]}"
    )
    return DeformedComplex(grid=grid, f=f, t=t, d=d, mass=mass, factors=factors, laplacians=laplacians, stats=stats)


def witten_laplacian(complex: DeformedComplex, q: int) -> sp.csr_matrix:
    if not 0 <= q <= complex.grid.n:
        raise ValueError(f"Grau q={q} fora do intervalo [0, {complex.grid.n}]")
    return complex.laplacians[q]


def symmetrized_coboundary(complex: DeformedComplex, q: int) -> sp.csr_matrix:
    return complex.factors[q]


def assembly_stats(complex: DeformedComplex) -> Dict[int, Dict[str, float]]:
    return {q: dict(values) for q, values in sorted(complex.stats.items())}


def _wedge(l: int, J: Axes) -> Tuple[int, Optional[Axes]]:
    if l in J:
        return 0, None
    position = sum(1 for j in J if j < l)
    return (-1) ** position, tuple(sorted(J + (l,)))


def _contract(k: int, J: Axes) -> Tuple[int, Optional[Axes]]:
    if k not in J:
        return 0, None
    position = J.index(k)
    return (-1) ** position, J[:position] + J[position + 1:]


def wedge_matrix(n: int, q: int, l: int) -> np.ndarray:
    """Matriz de dx_l∧ : Λ^q → Λ^{q+1} na base dx_J ordenada."""
    rows = list(combinations(range(n), q + 1))
    cols = list(combinations(range(n), q))
    matrix = np.zeros((len(rows), len(cols)))
    for c, J in enumerate(cols):
        sign, target = _wedge(l, J)
        if sign:
            matrix[rows.index(target), c] = sign
    return matrix


def interior_matrix(n: int, q: int, k: int) -> np.ndarray:
    """Matriz de dx_k⌟ : Λ^q → Λ^{q-1}."""
    rows = list(combinations(range(n), q - 1)) if q > 0 else []
    cols = list(combinations(range(n), q))
    matrix = np.zeros((len(rows), len(cols)))
    for c, J in enumerate(cols):
        sign, target = _contract(k, J)
        if sign:
            matrix[rows.index(target), c] = sign
    return matrix


def gradient_anticommutator(gradient: np.ndarray, q: int) -> np.ndarray:
    """df∧ df⌟ + df⌟ df∧ em Λ^q para um covetor df fixo."""
    gradient = np.asarray(gradient, dtype=float)
    n = len(gradient)
    size = len(list(combinations(range(n), q)))
    result = np.zeros((size, size))
    for l in range(n):
        for k in range(n):
            if q > 0:
                result += gradient[l] * gradient[k] * (wedge_matrix(n, q - 1, l) @ interior_matrix(n, q, k))
            if q < n:
                result += gradient[l] * gradient[k] * (interior_matrix(n, q + 1, k) @ wedge_matrix(n, q, l))
    return result


def hessian_coupling_coefficient(J: Axes, J_prime: Axes, l: int, k: int) -> int:
    """Coeficiente de dx_{J'} em [dx_l∧, dx_k⌟] dx_J.

    Para l = k vale ε_J^k (+1 se k ∈ J, -1 caso contrário). Para l ≠ k o
    comutador é 2 dx_l∧dx_k⌟, não nulo só quando k ∈ J, l ∉ J.
    """
    J, J_prime = tuple(J), tuple(J_prime)
    if len(J) != len(J_prime):
        raise ValueError(f"Subconjuntos de tamanhos diferentes: {J} e {J_prime}")
    if l == k:
        if J != J_prime:
            return 0
        return 1 if k in J else -1

    contract_sign, reduced = _contract(k, J)
    if not contract_sign:
        return 0
    wedge_sign, target = _wedge(l, reduced)
    if not wedge_sign or target != J_prime:
        return 0
    return 2 * contract_sign * wedge_sign


def bochner_terms(complex: DeformedComplex, q: int) -> BochnerTerms:
    """Potencial t²|∇f|² e acoplamento Σ H_lk [dx_l∧, dx_k⌟] amostrados nos pontos médios."""
    grid, f, t = complex.grid, complex.f, complex.t
    subsets = grid.axis_subsets(q)
    block_of = {axes: b for b, axes in enumerate(subsets)}
    V = grid.num_vertices
    h = grid.spacings
    bases = grid.vertex_bases().astype(float)
    local = np.arange(V)
    midpoints = grid.cell_midpoints(q)

    gradient = f.gradient(midpoints)
    potential = t ** 2 * np.sum(gradient ** 2, axis=1)

    hessian = f.hessian(midpoints)
    diagonal = np.zeros(grid.num_cells(q))
    for b, axes in enumerate(subsets):
        block = slice(b * V, (b + 1) * V)
        for k in range(grid.n):
            diagonal[block] += hessian_coupling_coefficient(axes, axes, k, k) * hessian[block, k, k]

    rows, cols, vals = [], [], []
    for b, axes in enumerate(subsets):
        for k in axes:
            for l in range(grid.n):
                if l in axes:
                    continue
                target = tuple(sorted(set(axes) - {k} | {l}))
                coefficient = hessian_coupling_coefficient(axes, target, l, k)
                offset = np.zeros(grid.n)
                offset[list(axes)] += 0.25
                offset[list(target)] += 0.25
                point = np.mod((bases + offset) * h, np.asarray(grid.lengths))
                rows.append(block_of[target] * V + local)
                cols.append(b * V + local)
                vals.append(coefficient * f.hessian(point)[:, l, k])

    size = grid.num_cells(q)
    off_diagonal = sp.csr_matrix((size, size))
    if vals:
        off_diagonal = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
        )
    coupling = (sp.diags(diagonal) + off_diagonal).tocsr()
    return BochnerTerms(potential=potential, coupling=coupling)


def bochner_laplacian(complex: DeformedComplex, q: int) -> sp.csr_matrix:
    """Δ + t²|df|² + t Σ Hess_f[dx_l∧, dx_k⌟], na mesma representação simetrizada de S_q."""
    grid = complex.grid
    mass = complex.mass
    plain = [_symmetrized_factor(coboundary(grid, j), mass[j], mass[j + 1]) for j in range(grid.n)]
    undeformed, _ = _laplacian_from_factors(plain, q, grid.num_cells(q))
    terms = bochner_terms(complex, q)
    S = undeformed + sp.diags(terms.potential) + complex.t * terms.coupling
    return ((S + S.T) * 0.5).tocsr()
