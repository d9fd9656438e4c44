from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from scripts.torus_complex import TorusGrid
from utils.exceptions import DegenerateCriticalPointError, NumericalError
from utils.logger import setup_logger

logger = setup_logger("morse_functions")

PRESETS = ("cos_sum", "cos_sum_multi", "custom_trig")

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100
DEGENERACY_RTOL = 1e-8
ROUNDOFF_FLOOR = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class MorseFunctionSpec:
    """f(x) = sum_i a_i cos(2 pi k_i x_i / L_i), com derivadas analíticas exatas."""

    preset: str
    frequencies: Tuple[int, ...]
    amplitudes: Tuple[float, ...]
    lengths: Tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.frequencies)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.asarray(self.frequencies, dtype=float) / np.asarray(self.lengths, dtype=float)

    @property
    def gradient_scale(self) -> float:
        """sup |grad f| por componente: max_i |a_i w_i|."""
        return float(np.max(np.abs(np.asarray(self.amplitudes) * self.wavenumbers)))

    @property
    def hessian_scale(self) -> float:
        """max_i |a_i| w_i^2: maior |autovalor| possível da Hessiana."""
        return float(np.max(np.abs(np.asarray(self.amplitudes)) * self.wavenumbers ** 2))

    def _phase(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(x, dtype=float)) * self.wavenumbers

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.cos(self._phase(x)) @ np.asarray(self.amplitudes, dtype=float)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        a = np.asarray(self.amplitudes, dtype=float)
        return -a * self.wavenumbers * np.sin(self._phase(x))

    def hessian(self, x: np.ndarray) -> np.ndarray:
        a = np.asarray(self.amplitudes, dtype=float)
        diagonal = -a * self.wavenumbers ** 2 * np.cos(self._phase(x))
        hess = np.zeros(diagonal.shape + (self.n,))
        idx = np.arange(self.n)
        hess[:, idx, idx] = diagonal
        return hess

    def axis_values(self, x: np.ndarray) -> np.ndarray:
        """Parcelas a_i cos(w_i x_i) separadas por eixo, shape (m, n)."""
        return np.asarray(self.amplitudes, dtype=float) * np.cos(self._phase(x))


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    coords: Tuple[float, ...]
    hessian_eigenvalues: Tuple[float, ...]
    index: int
    f_value: float
    eigenvectors: np.ndarray = field(repr=False)


@dataclass(eq=False)
class MorseProfile:
    m: List[int]
    points: List[CriticalPoint]

    def by_index(self, q: int) -> List[CriticalPoint]:
        return [p for p in self.points if p.index == q]


def make_spec(
    preset: str,
    n: int,
    frequencies: Optional[Sequence[int]] = None,
    amplitudes: Optional[Sequence[float]] = None,
    lengths: Optional[Sequence[float]] = None,
) -> MorseFunctionSpec:
    """Monta o preset validando frequências e amplitudes."""
    if preset not in PRESETS:
        raise ValueError(f"Preset desconhecido: {preset}. Disponíveis: {', '.join(PRESETS)}")
    lengths = list(lengths) if lengths is not None else [1.0] * n

    if preset == "cos_sum":
        if frequencies is not None and any(k != 1 for k in frequencies):
            raise ValueError("cos_sum usa frequência 1 em todos os eixos")
        if amplitudes is not None and any(a != 1 for a in amplitudes):
            raise ValueError("cos_sum usa amplitude 1 em todos os eixos")
        frequencies, amplitudes = [1] * n, [1.0] * n
    elif preset == "cos_sum_multi":
        if frequencies is None:
            raise ValueError("cos_sum_multi exige frequencies")
        if amplitudes is not None and any(a != 1 for a in amplitudes):
            raise ValueError("cos_sum_multi usa amplitude 1; use custom_trig para amplitudes")
        amplitudes = [1.0] * n
    else:
        if frequencies is None or amplitudes is None:
            raise ValueError("custom_trig exige frequencies e amplitudes")

    if len(frequencies) != n or len(amplitudes) != n or len(lengths) != n:
        raise ValueError(f"frequencies, amplitudes e lengths precisam ter {n} entradas")
    if any(int(k) != k or k == 0 for k in frequencies):
        raise ValueError(f"Frequências precisam ser inteiros não nulos: {list(frequencies)}")
    if any(not np.isfinite(a) or a == 0 for a in amplitudes):
        raise ValueError(f"Amplitudes precisam ser finitas e não nulas: {list(amplitudes)}")

    return MorseFunctionSpec(
        preset=preset,
        frequencies=tuple(int(k) for k in frequencies),
        amplitudes=tuple(float(a) for a in amplitudes),
        lengths=tuple(float(L) for L in lengths),
    )


def negated_spec(spec: MorseFunctionSpec) -> MorseFunctionSpec:
    """Preset de -f (troca índice q por n - q)."""
    return MorseFunctionSpec(
        preset="custom_trig",
        frequencies=spec.frequencies,
        amplitudes=tuple(-a for a in spec.amplitudes),
        lengths=spec.lengths,
    )


def preset_function(
    spec: MorseFunctionSpec,
) -> Tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]:
    return spec.value, spec.gradient, spec.hessian


def critical_index(hessian: np.ndarray, degeneracy_tol: Optional[float] = None) -> int:
    """Número de autovalores negativos da Hessiana."""
    hessian = np.asarray(hessian, dtype=float)
    eigenvalues = np.linalg.eigvalsh(0.5 * (hessian + hessian.T))
    if degeneracy_tol is None:
        degeneracy_tol = DEGENERACY_RTOL * float(np.max(np.abs(hessian)))
    if np.any(np.abs(eigenvalues) <= degeneracy_tol):
        raise DegenerateCriticalPointError(
            f"not a Morse function: autovalor da Hessiana {eigenvalues} dentro de {degeneracy_tol:.3e} de zero"
        )
    return int(np.sum(eigenvalues < 0))


def _periodic_delta(a: np.ndarray, b: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    delta = np.mod(a - b, lengths)
    return np.minimum(delta, lengths - delta)


def _newton(spec: MorseFunctionSpec, seeds: np.ndarray, max_step: float, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Newton vetorizado em grad f = 0; passo limitado a max_step na norma do máximo."""
    lengths = np.asarray(spec.lengths)
    x = seeds.copy()
    converged = np.zeros(len(x), dtype=bool)
    floor = 1e-3 * spec.hessian_scale

    for _ in range(NEWTON_MAX_ITER):
        active = ~converged
        if not np.any(active):
            break
        g = spec.gradient(x[active])
        norms = np.linalg.norm(g, axis=1)
        done = norms <= tol
        converged[np.flatnonzero(active)[done]] = True
        if np.all(done):
            break

        moving = np.flatnonzero(active)[~done]
        eigvals, eigvecs = np.linalg.eigh(spec.hessian(x[moving]))
        signs = np.where(eigvals < 0, -1.0, 1.0)
        regularized = signs * np.maximum(np.abs(eigvals), floor)
        coeffs = np.einsum("mji,mj->mi", eigvecs, g[~done]) / regularized
        step = np.einsum("mij,mj->mi", eigvecs, coeffs)
        size = np.max(np.abs(step), axis=1)
        step *= np.minimum(1.0, max_step / np.maximum(size, 1e-300))[:, None]
        x[moving] = np.mod(x[moving] - step, lengths)

    return x, converged


def _deduplicate(points: np.ndarray, lengths: np.ndarray, radius: float) -> np.ndarray:
    order = np.lexsort(points.T[::-1])
    unique: List[np.ndarray] = []
    for p in points[order]:
        if unique:
            dist = np.max(_periodic_delta(np.asarray(unique), p, lengths), axis=1)
            if np.min(dist) <= radius:
                continue
        unique.append(p)
    return np.asarray(unique).reshape(-1, len(lengths))


def _unclaimed_cubes(spec: MorseFunctionSpec, grid: TorusGrid, points: np.ndarray) -> np.ndarray:
    """Bases dos n-cubos onde todas as componentes de grad f trocam de sinal e nenhum ponto foi achado."""
    h = grid.spacings
    lengths = np.asarray(grid.lengths)
    bases = grid.vertex_bases()
    shape = grid.resolutions + (grid.n,)
    gradient = spec.gradient(bases * h).reshape(shape)

    lowest = gradient.copy()
    highest = gradient.copy()
    for corner in np.ndindex(*([2] * grid.n)):
        rolled = np.roll(gradient, shift=tuple(-c for c in corner), axis=tuple(range(grid.n)))
        lowest = np.minimum(lowest, rolled)
        highest = np.maximum(highest, rolled)
    flagged = np.all((lowest <= 0) & (highest >= 0), axis=-1).reshape(-1)
    flagged_bases = bases[flagged]
    if len(flagged_bases) == 0 or len(points) == 0:
        return flagged_bases

    slack = 1e-9 * h
    claimed = np.zeros(len(flagged_bases), dtype=bool)
    for p in points:
        offset = np.mod(p - flagged_bases * h, lengths)
        inside = (offset <= h + slack) | (offset >= lengths - slack)
        claimed |= np.all(inside, axis=1)
    return flagged_bases[~claimed]


def find_critical_points(
    spec: MorseFunctionSpec,
    grid: TorusGrid,
    newton_tol: float = NEWTON_TOL,
) -> MorseProfile:
    """Localiza os pontos críticos por Newton a partir de todos os vértices da grade."""
    if spec.n != grid.n or not np.allclose(spec.lengths, grid.lengths):
        raise ValueError("MorseFunctionSpec e TorusGrid com dimensão ou períodos diferentes")

    h = grid.spacings
    lengths = np.asarray(grid.lengths)
    h_min = float(np.min(h))
    # absoluta; só cede ao piso de arredondamento de grad f
    tol = max(newton_tol, ROUNDOFF_FLOOR * spec.gradient_scale)

    seeds = grid.vertex_bases() * h
    x, converged = _newton(spec, seeds, h_min, tol)
    logger.debug(f"Newton: {int(converged.sum())}/{len(seeds)} sementes convergiram")
    points = _deduplicate(x[converged], lengths, h_min / 2)

    unclaimed = _unclaimed_cubes(spec, grid, points)
    if len(unclaimed):
        logger.warning(f"{len(unclaimed)} células sinalizadas sem ponto crítico; reiniciando Newton no centro")
        extra, ok = _newton(spec, (unclaimed + 0.5) * h, h_min, tol)
        points = _deduplicate(np.vstack([points, extra[ok]]), lengths, h_min / 2)
        still = _unclaimed_cubes(spec, grid, points)
        if len(still):
            logger.error(f"Newton não convergiu em células sinalizadas: {still[:5].tolist()}")
            raise NumericalError(
                f"Newton não convergiu a partir das sementes de {len(still)} células sinalizadas"
            )

    # pontos colados no período voltam para 0
    points = np.where(lengths - points < 1e-12 * lengths, 0.0, points)

    critical: List[CriticalPoint] = []
    hessians = spec.hessian(points)
    for p, hess in zip(points, hessians):
        scale_tol = DEGENERACY_RTOL * float(np.max(np.abs(hess)))
        index = critical_index(hess, scale_tol)
        eigvals, eigvecs = np.linalg.eigh(hess)
        critical.append(
            CriticalPoint(
                coords=tuple(float(c) for c in p),
                hessian_eigenvalues=tuple(float(v) for v in eigvals),
                index=index,
                f_value=float(spec.value(p)[0]),
                eigenvectors=eigvecs,
            )
        )
    critical.sort(key=lambda cp: (cp.index, cp.coords))

    m = [0] * (grid.n + 1)
    for cp in critical:
        m[cp.index] += 1
    logger.info(f"{len(critical)} pontos críticos encontrados para {spec.preset}: m = {m}")
    return MorseProfile(m=m, points=critical)


def morse_counts(profile: MorseProfile) -> List[int]:
    m = [0] * len(profile.m)
    for cp in profile.points:
        m[cp.index] += 1
    euler = sum((-1) ** j * mj for j, mj in enumerate(m))
    if euler != 0:
        logger.error(f"Soma alternada de m = {m} vale {euler}, esperado 0 no toro")
        raise NumericalError(f"Conjunto de pontos críticos incompleto: soma alternada de m = {m} vale {euler}")
    return m
