from dataclasses import dataclass, field
from itertools import combinations
from math import comb, factorial, pi, sqrt
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg as la
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite import hermgauss

from scripts.morse_functions import CriticalPoint, MorseFunctionSpec
from scripts.torus_complex import Axes, Cochain, TorusGrid
from utils.logger import setup_logger

logger = setup_logger("oscillator_oracle")

GRAM_MAX_N = 30
DENSE_LIMIT = 4096
SCHEMES = ("sinc", "fd2")
PHASES = ("quadratic", "separable")


@dataclass(frozen=True, eq=False)
class HermiteSequence:
    """Polinômios A_0..A_max_n gerados pela recorrência A_{n+1} = 2x A_n - 2n A_{n-1}."""

    max_n: int
    coefficients: List[np.ndarray] = field(repr=False)

    def polynomial(self, n: int) -> Polynomial:
        return Polynomial(self.coefficients[n])


def hermite_sequence(max_n: int) -> HermiteSequence:
    if max_n < 0:
        raise ValueError(f"max_n precisa ser >= 0, recebeu {max_n}")
    x = Polynomial([0.0, 1.0])
    polys = [Polynomial([1.0])]
    if max_n >= 1:
        polys.append(2 * x)
    for n in range(1, max_n):
        polys.append(2 * x * polys[n] - 2 * n * polys[n - 1])
    return HermiteSequence(max_n=max_n, coefficients=[p.coef for p in polys])


def hermite_polynomial(n: int, x):
    """A_n(x) pela recorrência de três termos."""
    if n < 0:
        raise ValueError(f"Grau n={n} negativo")
    x = np.asarray(x, dtype=float)
    previous, current = np.zeros_like(x), np.ones_like(x)
    for k in range(n):
        previous, current = current, 2 * x * current - 2 * k * previous
    return current


def hermite_function(n: int, x):
    """φ_n(x) = (2^n n!)^{-1/2} π^{-1/4} A_n(x) e^{-x²/2}.

    Usa a recorrência normalizada φ_{k+1} = √(2/(k+1)) x φ_k - √(k/(k+1)) φ_{k-1},
    que não estoura para n grande.
    """
    if n < 0:
        raise ValueError(f"Grau n={n} negativo")
    x = np.asarray(x, dtype=float)
    previous = np.zeros_like(x)
    current = pi ** -0.25 * np.exp(-x ** 2 / 2)
    for k in range(n):
        previous, current = current, sqrt(2.0 / (k + 1)) * x * current - sqrt(k / (k + 1)) * previous
    return current


def apply_oscillator(n: int, x):
    """(-∂² + x²) φ_n avaliado por derivação exata do polinômio de Hermite."""
    p = hermite_sequence(n).polynomial(n)
    norm = (2.0 ** n * factorial(n)) ** -0.5 * pi ** -0.25
    x = np.asarray(x, dtype=float)
    values = -p.deriv(2)(x) + 2 * x * p.deriv(1)(x) + p(x)
    return norm * values * np.exp(-x ** 2 / 2)


def hermite_gram(n: int, m: int) -> float:
    """∫ e^{-x²} A_n A_m por Gauss-Hermite com ⌈(n+m)/2⌉ + 1 nós."""
    if not (0 <= n <= GRAM_MAX_N and 0 <= m <= GRAM_MAX_N):
        raise ValueError(f"hermite_gram aceita 0 <= n, m <= {GRAM_MAX_N}")
    nodes, weights = hermgauss((n + m + 1) // 2 + 1)
    return float(np.sum(weights * hermite_polynomial(n, nodes) * hermite_polynomial(m, nodes)))


def oscillator_eigenvalues(k: int) -> List[float]:
    if k < 1:
        raise ValueError(f"k precisa ser >= 1, recebeu {k}")
    return [2.0 * j + 1.0 for j in range(k)]


def _kinetic_matrix(points: int, h: float, scheme: str) -> np.ndarray:
    if scheme == "fd2":
        main = np.full(points, 2.0 / h ** 2)
        off = np.full(points - 1, -1.0 / h ** 2)
        return np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    if scheme == "sinc":
        i = np.arange(points)
        diff = i[:, None] - i[None, :]
        with np.errstate(divide="ignore"):
            kinetic = 2.0 * (-1.0) ** np.abs(diff) / (h ** 2 * diff.astype(float) ** 2)
        np.fill_diagonal(kinetic, pi ** 2 / (3 * h ** 2))
        return kinetic
    raise ValueError(f"Esquema desconhecido: {scheme}. Disponíveis: {', '.join(SCHEMES)}")


def _interior_grid(halfwidth: float, points: int) -> Tuple[np.ndarray, float]:
    h = 2 * halfwidth / (points + 1)
    return -halfwidth + h * np.arange(1, points + 1), h


def discretize_1d_oscillator(halfwidth: float, points: int, scheme: str = "sinc") -> np.ndarray:
    """-∂² + x² em [-halfwidth, halfwidth] com truncamento de Dirichlet."""
    x, h = _interior_grid(halfwidth, points)
    return _kinetic_matrix(points, h, scheme) + np.diag(x ** 2)


@dataclass(frozen=True)
class ModelOperatorSpec:
    n: int
    r: int
    q: int
    t: float

    def __post_init__(self):
        if not 1 <= self.n:
            raise ValueError(f"n precisa ser >= 1, recebeu {self.n}")
        if not 0 <= self.r <= self.n:
            raise ValueError(f"r={self.r} fora de [0, {self.n}]")
        if not 0 <= self.q <= self.n:
            raise ValueError(f"q={self.q} fora de [0, {self.n}]")
        if self.t <= 0:
            raise ValueError(f"t precisa ser positivo, recebeu {self.t}")

    def epsilon(self, axes: Axes) -> np.ndarray:
        """ε_J^j = +1 se j ∈ J, -1 caso contrário."""
        return np.array([1.0 if j in axes else -1.0 for j in range(self.n)])

    def shift(self, axes: Axes) -> float:
        """Termo constante t Σ_j s_j ε_J^j, s_j = -1 nas direções de índice (j < r)."""
        signs = np.array([-1.0 if j < self.r else 1.0 for j in range(self.n)])
        return float(self.t * np.dot(signs, self.epsilon(axes)))

    def base_level(self, axes: Axes) -> int:
        """Nível mínimo b_J: o autovalor de (N, J) é 2t (Σ N_j + b_J)."""
        return sum(1 for j in range(self.r) if j not in axes) + sum(1 for j in range(self.r, self.n) if j in axes)


@dataclass(frozen=True)
class ModelLevel:
    value: float
    multiplicity: int
    witness: Tuple[Tuple[int, ...], Axes]


@dataclass(frozen=True)
class ModelSpectrum:
    spec: ModelOperatorSpec
    entries: List[ModelLevel]

    def values(self) -> np.ndarray:
        """Autovalores repetidos pela multiplicidade."""
        return np.concatenate([np.full(level.multiplicity, level.value) for level in self.entries])


@dataclass(frozen=True)
class ModelKernel:
    dimension: int
    axes: Optional[Axes]
    t: float
    description: str

    def ground_state(self, x: np.ndarray) -> np.ndarray:
        return np.exp(-self.t * np.sum(np.atleast_2d(x) ** 2, axis=1) / 2)


def model_spectrum(spec: ModelOperatorSpec, count: int) -> ModelSpectrum:
    """Menores `count` autovalores distintos de Box_t com multiplicidades, nível a nível."""
    if count < 1:
        raise ValueError(f"count precisa ser >= 1, recebeu {count}")
    subsets = list(combinations(range(spec.n), spec.q))
    bases = [(axes, spec.base_level(axes)) for axes in subsets]

    entries: List[ModelLevel] = []
    level = 0
    while len(entries) < count:
        multiplicity, witness = 0, None
        for axes, base in bases:
            if level < base:
                continue
            multiplicity += comb(level - base + spec.n - 1, spec.n - 1)
            if witness is None:
                N = [0] * spec.n
                N[0] = level - base
                witness = (tuple(N), axes)
        if multiplicity:
            entries.append(ModelLevel(value=2.0 * spec.t * level, multiplicity=multiplicity, witness=witness))
        level += 1
    return ModelSpectrum(spec=spec, entries=entries)


def model_kernel(spec: ModelOperatorSpec) -> ModelKernel:
    if spec.r != spec.q:
        return ModelKernel(dimension=0, axes=None, t=spec.t, description="0")
    axes = tuple(range(spec.q))
    wedge = "∧".join(f"dx_{j + 1}" for j in axes) or "1"
    return ModelKernel(dimension=1, axes=axes, t=spec.t, description=f"exp(-t|x|²/2) {wedge}")


def discretize_model(
    spec: ModelOperatorSpec,
    box_halfwidth: Optional[float] = None,
    points_per_axis: int = 32,
    scheme: str = "sinc",
) -> np.ndarray:
    """Operador denso de Box_t numa caixa truncada; blocos por J na ordem de combinations."""
    blocks = list(combinations(range(spec.n), spec.q))
    dimension = points_per_axis ** spec.n * len(blocks)
    if dimension > DENSE_LIMIT:
        raise ValueError(f"Dimensão {dimension} excede o limite do oráculo denso ({DENSE_LIMIT})")
    if box_halfwidth is None:
        box_halfwidth = 8.0 / sqrt(spec.t)

    x, h = _interior_grid(box_halfwidth, points_per_axis)
    one_d = _kinetic_matrix(points_per_axis, h, scheme) + spec.t ** 2 * np.diag(x ** 2)
    identity = np.eye(points_per_axis)
    scalar = np.zeros((points_per_axis ** spec.n,) * 2)
    for axis in range(spec.n):
        factor = np.ones((1, 1))
        for j in range(spec.n):
            factor = np.kron(factor, one_d if j == axis else identity)
        scalar += factor
    size = scalar.shape[0]
    operator = la.block_diag(*[scalar + spec.shift(axes) * np.eye(size) for axes in blocks])
    logger.debug(f"Box_t discretizado: n={spec.n}, r={spec.r}, q={spec.q}, dimensão {dimension}, esquema {scheme}")
    return operator


def kappa(y):
    """Corte suave: 1 em |y| <= 1, 0 em |y| >= 2."""
    y = np.abs(np.asarray(y, dtype=float))
    result = np.where(y <= 1.0, 1.0, 0.0)
    band = (y > 1.0) & (y < 2.0)
    if np.any(band):
        inner = np.exp(-1.0 / (2.0 - y[band]))
        outer = np.exp(-1.0 / (y[band] - 1.0))
        result[band] = inner / (inner + outer)
    return result


@dataclass(frozen=True, eq=False)
class TrialFormSpec:
    critical_point: CriticalPoint
    t: float
    epsilon: float
    f: Optional[MorseFunctionSpec] = None
    phase: str = "quadratic"

    @property
    def q(self) -> int:
        return self.critical_point.index


def _morse_chart(spec: TrialFormSpec, grid: TorusGrid, midpoints: np.ndarray) -> np.ndarray:
    lengths = np.asarray(grid.lengths)
    delta = np.mod(midpoints - np.asarray(spec.critical_point.coords) + lengths / 2, lengths) - lengths / 2
    scales = np.sqrt(np.abs(spec.critical_point.hessian_eigenvalues))
    return (delta @ spec.critical_point.eigenvectors) * scales


def trial_form(spec: TrialFormSpec, grid: TorusGrid) -> Cochain:
    """e^{-t|x|²/2} χ(x) dx^1∧…∧dx^q em coordenadas de Morse, normalizada por det|Hess|^{1/4}."""
    if spec.phase not in PHASES:
        raise ValueError(f"Fase desconhecida: {spec.phase}. Disponíveis: {', '.join(PHASES)}")
    if spec.phase == "separable" and spec.f is None:
        raise ValueError("A fase separable exige a função de Morse em TrialFormSpec.f")
    if spec.epsilon <= 0 or spec.t <= 0:
        raise ValueError("epsilon e t precisam ser positivos")

    point = spec.critical_point
    eigenvalues = np.abs(np.asarray(point.hessian_eigenvalues))
    V = point.eigenvectors
    lengths = np.asarray(grid.lengths)
    extent = np.abs(V) @ (2 * spec.epsilon / np.sqrt(eigenvalues))
    if np.any(extent >= lengths / 2):
        raise ValueError(
            f"Cubo de corte 2ε={2 * spec.epsilon} não cabe no domínio fundamental em torno de "
            f"{point.coords}: extensão {extent.round(4).tolist()} contra período mínimo {lengths.min()}"
        )

    q = point.index
    V_index = V[:, :q]
    normalization = float(np.prod(eigenvalues)) ** 0.25
    h = grid.spacings
    count = grid.num_vertices
    midpoints = grid.cell_midpoints(q)
    x = _morse_chart(spec, grid, midpoints)
    cutoff = np.prod(kappa(x / spec.epsilon), axis=1)

    if spec.phase == "quadratic":
        profile = np.exp(-spec.t * np.sum(x ** 2, axis=1) / 2)
    else:
        p = np.asarray(point.coords)
        centred = spec.f.axis_values(midpoints) - spec.f.axis_values(p)
        # direção de máximo do eixo i: sinal +; de mínimo: sinal -
        curvature = -np.asarray(spec.f.amplitudes) * spec.f.wavenumbers ** 2 * np.cos(spec.f.wavenumbers * p)
        signs = np.where(curvature < 0, 1.0, -1.0)
        profile = np.exp(spec.t * np.sum(signs * centred, axis=1))

    values = np.zeros(grid.num_cells(q))
    for b, axes in enumerate(grid.axis_subsets(q)):
        block = slice(b * count, (b + 1) * count)
        coefficient = np.linalg.det(V_index[list(axes), :]) if q else 1.0
        if coefficient == 0.0:
            continue
        values[block] = coefficient * normalization * profile[block] * cutoff[block] * np.prod(h[list(axes)])
    return Cochain(q=q, grid=grid, values=values)
