from dataclasses import dataclass
from itertools import combinations, product
from math import comb
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from utils.logger import setup_logger

logger = setup_logger("torus_complex")

MAX_DIMENSION = 3
MIN_RESOLUTION = 4

Axes = Tuple[int, ...]
ComponentFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CellId:
    q: int
    axes: Axes
    base: Tuple[int, ...]


@dataclass(frozen=True)
class TorusGrid:
    """Complexo cúbico periódico sobre T^n = prod(R / L_i Z).

    Os q-cells são enumerados em ordem lexicográfica de (J, base): primeiro o
    subconjunto de eixos J (ordem de itertools.combinations), depois o
    multi-índice da base em ordem C.
    """

    n: int
    lengths: Tuple[float, ...]
    resolutions: Tuple[int, ...]

    @property
    def spacings(self) -> np.ndarray:
        return np.asarray(self.lengths, dtype=float) / np.asarray(self.resolutions, dtype=float)

    @property
    def num_vertices(self) -> int:
        return int(np.prod(self.resolutions))

    def _check_degree(self, q: int) -> None:
        if not 0 <= q <= self.n:
            raise ValueError(f"Grau q={q} fora do intervalo [0, {self.n}]")

    def axis_subsets(self, q: int) -> List[Axes]:
        self._check_degree(q)
        return list(combinations(range(self.n), q))

    def num_cells(self, q: int) -> int:
        if q < 0:
            raise ValueError(f"Grau q={q} negativo")
        if q > self.n:
            return 0
        return comb(self.n, q) * self.num_vertices

    def vertex_bases(self) -> np.ndarray:
        """Multi-índices (V, n) de todos os vértices, em ordem C."""
        return np.indices(self.resolutions).reshape(self.n, -1).T

    def cell_index(self, cell: CellId) -> int:
        block = self.axis_subsets(cell.q).index(tuple(cell.axes))
        flat = int(np.ravel_multi_index(tuple(cell.base), self.resolutions))
        return block * self.num_vertices + flat

    def cell_at(self, q: int, index: int) -> CellId:
        if not 0 <= index < self.num_cells(q):
            raise ValueError(f"Índice {index} fora do intervalo para q={q}")
        block, flat = divmod(index, self.num_vertices)
        base = tuple(int(k) for k in np.unravel_index(flat, self.resolutions))
        return CellId(q=q, axes=self.axis_subsets(q)[block], base=base)

    def midpoint(self, cell: CellId) -> np.ndarray:
        offset = np.array([0.5 if i in cell.axes else 0.0 for i in range(self.n)])
        point = (np.asarray(cell.base, dtype=float) + offset) * self.spacings
        return np.mod(point, np.asarray(self.lengths, dtype=float))

    def cell_midpoints(self, q: int) -> np.ndarray:
        """Pontos médios (count, n) de todos os q-cells, na ordem da enumeração."""
        bases = self.vertex_bases().astype(float)
        h = self.spacings
        lengths = np.asarray(self.lengths, dtype=float)
        blocks = []
        for axes in self.axis_subsets(q):
            offset = np.zeros(self.n)
            offset[list(axes)] = 0.5
            blocks.append(np.mod((bases + offset) * h, lengths))
        return np.vstack(blocks)

    def cell_volume_factors(self, q: int) -> np.ndarray:
        """prod_{j in J} h_j por q-cell: converte componente em valor integrado."""
        h = self.spacings
        factors = [np.prod(h[list(axes)]) for axes in self.axis_subsets(q)]
        return np.repeat(np.asarray(factors, dtype=float), self.num_vertices)


@dataclass(frozen=True, eq=False)
class MassMatrix:
    q: int
    diagonal: np.ndarray

    def as_sparse(self) -> sp.dia_matrix:
        return sp.diags(self.diagonal)

    def sqrt(self) -> np.ndarray:
        return np.sqrt(self.diagonal)


@dataclass(eq=False)
class Cochain:
    q: int
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.num_cells(self.q)
        if self.values.shape != (expected,):
            raise ValueError(
                f"Cochain de grau {self.q} precisa de {expected} valores, recebeu {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Cochain contém valores não finitos")

    def inner(self, other: "Cochain") -> float:
        """Produto interno discreto (u, v) = u^T M_q v."""
        if other.q != self.q or other.grid != self.grid:
            raise ValueError("Cochains de graus ou grades diferentes")
        mass = mass_matrix(self.grid, self.q)
        return float(self.values @ (mass.diagonal * other.values))

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))


def build_grid(n: int, lengths: Sequence[float], resolutions: Sequence[int]) -> TorusGrid:
    if not 1 <= n <= MAX_DIMENSION:
        raise ValueError(f"Dimensão n={n} fora do intervalo [1, {MAX_DIMENSION}]")
    if len(lengths) != n or len(resolutions) != n:
        raise ValueError(f"lengths e resolutions precisam ter {n} entradas")
    if any(not np.isfinite(L) or L <= 0 for L in lengths):
        raise ValueError(f"Comprimentos precisam ser positivos: {list(lengths)}")
    if any(int(N) != N or N < MIN_RESOLUTION for N in resolutions):
        raise ValueError(f"Resoluções precisam ser inteiros >= {MIN_RESOLUTION}: {list(resolutions)}")

    grid = TorusGrid(
        n=n,
        lengths=tuple(float(L) for L in lengths),
        resolutions=tuple(int(N) for N in resolutions),
    )
    counts = [grid.num_cells(q) for q in range(n + 1)]
    logger.debug(f"Grade T^{n} criada: resoluções {grid.resolutions}, células por grau {counts}")
    return grid


def enumerate_cells(grid: TorusGrid, q: int) -> List[CellId]:
    bases = [tuple(int(k) for k in b) for b in grid.vertex_bases()]
    return [CellId(q=q, axes=axes, base=base) for axes in grid.axis_subsets(q) for base in bases]


def coboundary(grid: TorusGrid, q: int) -> sp.csr_matrix:
    """Coborda cúbica com sinais: d_q leva q-cochains em (q+1)-cochains.

    Para o cell σ com eixos J' e base k, a faceta ao longo do eixo j = J'[p]
    entra com sinal (-1)^p na face superior (k + e_j) e -(-1)^p na inferior.
    """
    if not 0 <= q <= grid.n:
        raise ValueError(f"Grau q={q} fora do intervalo [0, {grid.n}]")
    if q == grid.n:
        return sp.csr_matrix((0, grid.num_cells(q)))

    V = grid.num_vertices
    res = np.asarray(grid.resolutions)
    bases = grid.vertex_bases()
    local = np.arange(V)
    block_of = {axes: b for b, axes in enumerate(grid.axis_subsets(q))}

    rows, cols, vals = [], [], []
    for s, upper_axes in enumerate(grid.axis_subsets(q + 1)):
        row = s * V + local
        for p, j in enumerate(upper_axes):
            facet_axes = upper_axes[:p] + upper_axes[p + 1:]
            offset = block_of[facet_axes] * V
            shifted = bases.copy()
            shifted[:, j] = (shifted[:, j] + 1) % res[j]
            upper = offset + np.ravel_multi_index(tuple(shifted.T), grid.resolutions)
            sign = 1.0 if p % 2 == 0 else -1.0
            rows.extend([row, row])
            cols.extend([upper, offset + local])
            vals.extend([np.full(V, sign), np.full(V, -sign)])

    d = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.num_cells(q + 1), grid.num_cells(q)),
    )
    return d


def mass_matrix(grid: TorusGrid, q: int) -> MassMatrix:
    """Estrela de Hodge diagonal: prod_{j not in J} h_j / prod_{j in J} h_j."""
    h = grid.spacings
    entries = []
    for axes in grid.axis_subsets(q):
        inside = np.prod(h[list(axes)])
        outside = np.prod(np.delete(h, list(axes)))
        entries.append(outside / inside)
    return MassMatrix(q=q, diagonal=np.repeat(np.asarray(entries, dtype=float), grid.num_vertices))


def sample_form(grid: TorusGrid, q: int, components: Dict[Axes, ComponentFunction]) -> Cochain:
    """Amostra uma q-forma no ponto médio de cada cell: valor = componente * prod h_J.

    Componentes ausentes no dicionário são tratadas como zero.
    """
    subsets = grid.axis_subsets(q)
    unknown = [key for key in components if tuple(key) not in subsets]
    if unknown:
        raise ValueError(f"Subconjuntos de eixos inválidos para q={q}: {unknown}")

    V = grid.num_vertices
    midpoints = grid.cell_midpoints(q)
    factors = grid.cell_volume_factors(q)
    values = np.zeros(grid.num_cells(q))
    for b, axes in enumerate(subsets):
        func = components.get(axes)
        if func is None:
            continue
        block = slice(b * V, (b + 1) * V)
        sampled = np.broadcast_to(np.asarray(func(midpoints[block]), dtype=float), (V,))
        if not np.all(np.isfinite(sampled)):
            raise ValueError(f"Componente {axes} produziu valores não finitos")
        values[block] = sampled * factors[block]
    return Cochain(q=q, grid=grid, values=values)


def sup_norm(u: Cochain) -> float:
    """Máximo sobre vértices da g-norma pontual da forma reconstruída.

    Cada componente de um vértice é a média quadrática das componentes dos
    2^q cells incidentes com os mesmos eixos.
    """
    grid = u.grid
    V = grid.num_vertices
    h = grid.spacings
    shape = grid.resolutions
    accumulated = np.zeros(shape)
    for b, axes in enumerate(grid.axis_subsets(u.q)):
        component = u.values[b * V:(b + 1) * V].reshape(shape) / np.prod(h[list(axes)])
        squared = component ** 2
        gathered = np.zeros(shape)
        for corner in product((0, 1), repeat=len(axes)):
            shift = [0] * grid.n
            for axis, step in zip(axes, corner):
                shift[axis] = step
            gathered += np.roll(squared, shift=tuple(shift), axis=tuple(range(grid.n)))
        accumulated += gathered / 2 ** len(axes)
    return float(np.sqrt(accumulated.max()))
