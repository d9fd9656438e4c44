import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from scripts.eigensolver import (
    DENSE_LIMIT,
    KERNEL_RTOL,
    EigResult,
    GapAnalysis,
    SpectrumRequest,
    count_below,
    dense_eigh,
    dense_smallest,
    detect_gap,
    kernel_dimension,
    smallest_eigs,
)
from scripts.morse_functions import (
    MorseFunctionSpec,
    MorseProfile,
    find_critical_points,
    make_spec,
    morse_counts,
)
from scripts.oscillator_oracle import TrialFormSpec, trial_form
from scripts.torus_complex import Cochain, TorusGrid, build_grid, coboundary, sup_norm
from scripts.transform_config import RunConfig
from scripts.witten_operators import DeformedComplex, assemble_complex, overflow_bound, witten_laplacian
from utils.exceptions import InconclusiveCountError, NumericalError, ResolutionError
from utils.logger import setup_logger

logger = setup_logger("morse_verifier")

THREADS_ENV = "WITTEN_LAB_THREADS"
DEFAULT_THREADS = 4
RANK_GRID = 4
MIN_GROWTH_SAMPLES = 3
GAP_REFUSAL_FACTOR = 2.0
GRAM_OFF_DIAGONAL_TOL = 1e-8
MODES = ("fixed", "auto")


@dataclass(frozen=True)
class TWindow:
    t_min: float
    t_max: float
    overflow: float

    def contains(self, t: float) -> bool:
        return self.t_min <= t <= self.t_max


@dataclass(eq=False)
class SweepEntry:
    q: int
    t: float
    values: List[float]
    residuals: List[float]
    converged: List[bool]
    kernel_dim: int
    low_count: int
    threshold: float
    gap_ratio: float
    no_clear_cluster: bool
    fixed_threshold: float
    fixed_count: Optional[int]
    tunneling_resolved: bool
    in_window: bool
    iterations: int
    seed: int
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "t": self.t,
            "eigenvalues": self.values,
            "residuals": self.residuals,
            "converged": self.converged,
            "kernel_dim": self.kernel_dim,
            "low_count": self.low_count,
            "threshold": self.threshold,
            "gap_ratio": self.gap_ratio,
            "no_clear_cluster": self.no_clear_cluster,
            "fixed_threshold": self.fixed_threshold,
            "fixed_count": self.fixed_count,
            "tunneling_resolved": self.tunneling_resolved,
            "in_window": self.in_window,
            "iterations": self.iterations,
            "seed": self.seed,
            "warnings": self.warnings,
        }


@dataclass(eq=False)
class InequalityReport:
    betti: List[int]
    morse: List[int]
    weak_ok: List[bool]
    strong_ok: List[bool]
    weak_slack: List[int]
    strong_slack: List[int]
    euler_equal: bool
    counts_match: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.weak_ok) and all(self.strong_ok) and self.euler_equal and all(self.counts_match.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "weak": self.weak_ok,
            "strong": self.strong_ok,
            "weak_slack": self.weak_slack,
            "strong_slack": self.strong_slack,
            "euler": self.euler_equal,
            "counts_match": dict(sorted(self.counts_match.items())),
        }


@dataclass(eq=False)
class ExactnessReport:
    t: float
    lambda_window: float
    dims: List[int]
    ranks: List[int]
    alternating_sums: List[int]
    exact: List[bool]
    d_squared_residual: float
    # sem autovalores em (0, λ] a sequência é exata trivialmente
    vacuous: bool = False

    @property
    def passed(self) -> bool:
        return (
            all(self.exact)
            and all(s >= 0 for s in self.alternating_sums)
            and self.alternating_sums[-1] == 0
            and self.d_squared_residual <= 1e-10
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "lambda": self.lambda_window,
            "dims": self.dims,
            "ranks": self.ranks,
            "alternating_sums": self.alternating_sums,
            "exact": self.exact,
            "d_squared_residual": self.d_squared_residual,
            "vacuous": self.vacuous,
            "passed": self.passed,
        }


@dataclass(eq=False)
class TrialFormDiagnostics:
    t_list: List[float]
    points: List[Dict[str, Any]]
    residuals: np.ndarray
    projection_errors: np.ndarray
    sup_errors: np.ndarray
    gram: Dict[int, List[np.ndarray]]
    projected_gram: Dict[int, List[np.ndarray]]
    residual_slopes: List[float]
    projection_slopes: List[float]

    def gram_off_diagonal(self, step: int = -1) -> float:
        worst = 0.0
        for matrices in self.gram.values():
            G = matrices[step]
            if len(G) > 1:
                worst = max(worst, float(np.max(np.abs(G - np.diag(np.diag(G))))))
        return worst

    def gram_determinants(self, step: int = -1) -> Dict[int, float]:
        return {q: float(np.linalg.det(matrices[step])) for q, matrices in sorted(self.projected_gram.items())}

    @property
    def passed(self) -> bool:
        return (
            all(s < 0 for s in self.residual_slopes)
            and all(s < 0 for s in self.projection_slopes)
            and self.gram_off_diagonal() <= GRAM_OFF_DIAGONAL_TOL
            and all(det > 0 for det in self.gram_determinants().values())
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t_list,
            "points": self.points,
            "residuals": self.residuals.tolist(),
            "projection_errors": self.projection_errors.tolist(),
            "sup_errors": self.sup_errors.tolist(),
            "gram": {str(q): [G.tolist() for G in m] for q, m in sorted(self.gram.items())},
            "projected_gram": {str(q): [G.tolist() for G in m] for q, m in sorted(self.projected_gram.items())},
            "residual_slopes": self.residual_slopes,
            "projection_slopes": self.projection_slopes,
            "gram_off_diagonal": self.gram_off_diagonal(),
            "gram_determinants": {str(q): d for q, d in self.gram_determinants().items()},
            "passed": self.passed,
        }


@dataclass(frozen=True)
class GapGrowth:
    q: int
    slope: float
    t: List[float]
    values: List[float]

    @property
    def passed(self) -> bool:
        return self.slope > 0 and all(v >= self.slope * t / 2 for t, v in zip(self.t, self.values))

    def to_dict(self) -> Dict[str, Any]:
        return {"q": self.q, "slope": self.slope, "t": self.t, "values": self.values, "passed": self.passed}


@dataclass(eq=False)
class VerificationRun:
    config: RunConfig
    grid: TorusGrid
    f: MorseFunctionSpec
    betti: List[int]
    profile: MorseProfile
    window: TWindow
    entries: List[SweepEntry] = field(default_factory=list)
    results: Dict[Tuple[int, float], EigResult] = field(default_factory=dict)
    inequalities: Optional[InequalityReport] = None
    spectral_alternating: Dict[str, List[int]] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    skipped: Dict[str, str] = field(default_factory=dict)

    @property
    def morse(self) -> List[int]:
        return self.profile.m

    def entry(self, q: int, t: float) -> SweepEntry:
        for entry in self.entries:
            if entry.q == q and entry.t == t:
                return entry
        raise ValueError(f"Sem espectro registrado para q={q}, t={t}")

    @property
    def passed(self) -> bool:
        alternating_ok = all(
            all(s >= 0 for s in sums) and sums[-1] == 0 for sums in self.spectral_alternating.values()
        )
        diagnostics_ok = all(
            report.passed
            for report in self.diagnostics.values()
            if hasattr(report, "passed")
        ) and all(g.passed for g in self.diagnostics.get("gap_growth", []))
        return bool(self.inequalities and self.inequalities.passed and alternating_ok and diagnostics_ok)


def morse_function(config: RunConfig) -> MorseFunctionSpec:
    return make_spec(
        config.morse.preset,
        config.manifold.n,
        frequencies=config.morse.frequencies,
        amplitudes=config.morse.amplitudes,
        lengths=config.manifold.lengths,
    )


def _flat_function(grid: TorusGrid) -> MorseFunctionSpec:
    # só usada com t = 0, onde f não entra na montagem
    return MorseFunctionSpec(
        preset="custom_trig",
        frequencies=(1,) * grid.n,
        amplitudes=(0.0,) * grid.n,
        lengths=tuple(grid.lengths),
    )


def _rank_betti(grid: TorusGrid) -> List[int]:
    """b_q = dim C^q - rank d_q - rank d_{q-1}, por eliminação densa."""
    ranks = [int(np.linalg.matrix_rank(coboundary(grid, q).toarray())) for q in range(grid.n)]
    ranks = [0] + ranks + [0]
    return [grid.num_cells(q) - ranks[q + 1] - ranks[q] for q in range(grid.n + 1)]


def betti_numbers(grid: TorusGrid) -> List[int]:
    """Números de Betti pelo núcleo do Laplaciano não deformado, conferidos pelo posto de d."""
    complex = assemble_complex(grid, _flat_function(grid), 0.0)
    spectral = []
    for q in range(grid.n + 1):
        S = witten_laplacian(complex, q)
        k = min(comb(grid.n, q) + 4, S.shape[0] - 1)
        request = SpectrumRequest(q=q, t=0.0, k=k)
        result = dense_smallest(S, request) if S.shape[0] <= DENSE_LIMIT else smallest_eigs(S, request)
        spectral.append(kernel_dimension(result))

    if max(grid.num_cells(q) for q in range(grid.n + 1)) <= DENSE_LIMIT:
        rank_grid = grid
    else:
        rank_grid = build_grid(grid.n, list(grid.lengths), [RANK_GRID] * grid.n)
    by_rank = _rank_betti(rank_grid)

    if spectral != by_rank:
        logger.error(f"Betti espectral {spectral} diverge do posto {by_rank}")
        raise NumericalError(f"betti_numbers: núcleo espectral {spectral} diverge do oráculo de posto {by_rank}")
    logger.info(f"Números de Betti: {spectral}")
    return spectral


def t_window(grid: TorusGrid, f: MorseFunctionSpec, profile: MorseProfile, cells_per_width: float = 1.0) -> TWindow:
    """Janela de t em que as autoformas localizadas são resolvidas pela grade."""
    magnitudes = np.abs(np.concatenate([p.hessian_eigenvalues for p in profile.points]))
    h_min = float(np.min(grid.spacings))
    overflow = overflow_bound(grid, f)
    t_max = min(overflow, 1.0 / (cells_per_width ** 2 * h_min ** 2 * float(magnitudes.max())))
    t_min = 10.0 / float(np.sqrt(magnitudes.min()))
    if t_min > t_max:
        logger.warning(f"Janela de t vazia: t_min={t_min:.3g} > t_max={t_max:.3g}; refine a grade")
    return TWindow(t_min=t_min, t_max=t_max, overflow=overflow)


def fixed_threshold(f: MorseFunctionSpec, C: float, t: float) -> float:
    """e^{-Ct} na escala da Hessiana de f."""
    return float(np.exp(-C * t) * f.hessian_scale)


def low_lying_counts(run: VerificationRun, q: int, t: float, mode: str = "auto") -> int:
    if mode not in MODES:
        raise ValueError(f"Modo desconhecido: {mode}. Disponíveis: {', '.join(MODES)}")
    if (q, t) not in run.results:
        raise ValueError(f"Sem espectro registrado para q={q}, t={t}")
    result = run.results[(q, t)]
    if mode == "fixed":
        return count_below(result, fixed_threshold(run.f, run.config.deformation.C, t))
    return detect_gap(result.values, scale=result.scale).low_count


def check_inequalities(b: Sequence[int], m: Sequence[int]) -> InequalityReport:
    """Desigualdades de Morse fraca e forte e a igualdade de Euler, em aritmética inteira."""
    if len(b) != len(m):
        raise ValueError(f"b e m com tamanhos diferentes: {len(b)} e {len(m)}")
    b, m = [int(v) for v in b], [int(v) for v in m]
    n = len(b) - 1
    weak_slack = [m[q] - b[q] for q in range(n + 1)]
    strong_slack = [sum((-1) ** (q - j) * (m[j] - b[j]) for j in range(q + 1)) for q in range(n + 1)]
    report = InequalityReport(
        betti=b,
        morse=m,
        weak_ok=[s >= 0 for s in weak_slack],
        strong_ok=[s >= 0 for s in strong_slack],
        weak_slack=weak_slack,
        strong_slack=strong_slack,
        euler_equal=strong_slack[n] == 0,
    )
    for q in range(n + 1):
        if not report.weak_ok[q]:
            logger.warning(f"Desigualdade fraca falhou em q={q}: b={b[q]} > m={m[q]}")
        if not report.strong_ok[q]:
            logger.warning(f"Desigualdade forte falhou em q={q}: folga {strong_slack[q]}")
    return report


def _restricted_rank(block: np.ndarray, cutoff: float) -> int:
    if block.size == 0:
        return 0
    return int(np.sum(np.linalg.svd(block, compute_uv=False) > cutoff))


def _common_gap(spectra: List[np.ndarray], profile_counts: Sequence[int], scale: float) -> float:
    lower, upper = 0.0, np.inf
    for values, count in zip(spectra, profile_counts):
        gap = detect_gap(values[: count + 4], scale=scale)
        lower = max(lower, values[gap.low_count - 1])
        upper = min(upper, values[gap.low_count])
    if upper <= 4 * max(lower, KERNEL_RTOL * scale):
        raise ValueError(f"Sem lacuna comum entre graus: maior valor baixo {lower:.3e}, menor valor alto {upper:.3e}")
    return float(np.sqrt(max(lower, KERNEL_RTOL * scale) * upper))


def exactness_check(
    complex: DeformedComplex,
    lambda_window: Optional[float] = None,
    counts: Optional[Sequence[int]] = None,
) -> ExactnessReport:
    """Exatidão de 0 → E^0_(0,λ] → … → E^n_(0,λ] → 0 sob d_t, por autovetores densos.

    Sem `lambda_window`, λ é a média geométrica da lacuna comum a todos os graus
    (exige `counts`, o número esperado de autovalores baixos por grau).
    """
    grid = complex.grid
    n = grid.n
    decompositions = [dense_eigh(witten_laplacian(complex, q)) for q in range(n + 1)]
    scale = max(float(np.max(np.abs(values))) for values, _ in decompositions)
    cut = KERNEL_RTOL * scale

    if lambda_window is None:
        if counts is None:
            raise ValueError("exactness_check sem lambda_window exige counts")
        lambda_window = _common_gap([values for values, _ in decompositions], counts, scale)

    for q, (values, _) in enumerate(decompositions):
        close = values[(values > lambda_window / GAP_REFUSAL_FACTOR) & (values < lambda_window * GAP_REFUSAL_FACTOR)]
        if close.size:
            raise ValueError(
                f"λ={lambda_window:.3e} não está numa lacuna espectral em q={q}: autovalor {close[0]:.3e} próximo"
            )

    bases = [vectors[:, (values > cut) & (values <= lambda_window)] for values, vectors in decompositions]
    dims = [B.shape[1] for B in bases]
    rank_cut = 0.5 * np.sqrt(cut)
    restricted = [bases[q + 1].T @ (complex.factors[q] @ bases[q]) for q in range(n)]
    ranks = [_restricted_rank(block, rank_cut) for block in restricted] + [0]

    d_squared = 0.0
    for q in range(n - 1):
        if restricted[q].size and restricted[q + 1].size:
            d_squared = max(d_squared, float(np.max(np.abs(restricted[q + 1] @ restricted[q]))) / scale)

    exact = [dims[q] == ranks[q] + (ranks[q - 1] if q > 0 else 0) for q in range(n + 1)]
    alternating = [sum((-1) ** (q - j) * dims[j] for j in range(q + 1)) for q in range(n + 1)]
    report = ExactnessReport(
        t=complex.t,
        lambda_window=float(lambda_window),
        dims=dims,
        ranks=ranks,
        alternating_sums=alternating,
        exact=exact,
        d_squared_residual=d_squared,
        vacuous=sum(dims) == 0,
    )
    if report.passed:
        logger.info(f"Sequência exata em t={complex.t}: dim E = {dims}, postos {ranks}")
    else:
        logger.warning(f"Exatidão falhou em t={complex.t}: dim E = {dims}, postos {ranks}, somas {alternating}")
    return report


def _projector_basis(
    S: sp.csr_matrix, q: int, t: float, k: int, config: RunConfig, cached: Optional[EigResult] = None
) -> np.ndarray:
    """Base ortonormal de E_[0,λ]; reaproveita o espectro da varredura quando há autovetores."""
    if cached is not None and cached.vectors is not None:
        result = cached
    else:
        request = SpectrumRequest(
            q=q,
            t=t,
            k=min(k, S.shape[0] - 1),
            tol=config.solver.tol,
            max_iter=config.solver.max_iter,
            seed=config.solver.seed,
        )
        if S.shape[0] <= DENSE_LIMIT:
            result = dense_smallest(S, request)
        else:
            result = smallest_eigs(S, request)
    gap = detect_gap(result.values, scale=result.scale)
    if not np.all(result.converged[: gap.low_count + 1]):
        logger.error(f"Projetor espectral sem convergência em q={q}, t={t}")
        raise NumericalError(f"Autovetores do projetor não convergiram em q={q}, t={t}")
    return result.vectors[:, : gap.low_count]


def trial_diagnostics(run: VerificationRun, t_list: Sequence[float]) -> TrialFormDiagnostics:
    """Resíduo, erro de projeção e Gram das formas-teste em cada t."""
    t_list = sorted(float(t) for t in t_list)
    if len(t_list) < 2:
        raise ValueError("trial_diagnostics precisa de pelo menos 2 valores de t")

    grid, points = run.grid, run.profile.points
    epsilon = run.config.deformation.epsilon
    phase = run.config.diagnostics.trial_phase
    residuals = np.zeros((len(points), len(t_list)))
    projection = np.zeros_like(residuals)
    sup_errors = np.zeros_like(residuals)
    gram: Dict[int, List[np.ndarray]] = {}
    projected_gram: Dict[int, List[np.ndarray]] = {}

    for step, t in enumerate(t_list):
        complex = assemble_complex(grid, run.f, t)
        for q in range(grid.n + 1):
            members = [i for i, p in enumerate(points) if p.index == q]
            if not members:
                continue
            S = witten_laplacian(complex, q)
            root = complex.mass[q].sqrt()
            forms = np.column_stack(
                [
                    root * trial_form(TrialFormSpec(points[i], t, epsilon, f=run.f, phase=phase), grid).values
                    for i in members
                ]
            )
            norms = np.linalg.norm(forms, axis=0)
            k = run.config.solver.k_for(q, run.morse[q], run.betti[q])
            U = _projector_basis(S, q, t, k, run.config, cached=run.results.get((q, t)))
            projected = U @ (U.T @ forms)

            residuals[members, step] = np.linalg.norm(S @ forms, axis=0) / norms
            projection[members, step] = np.linalg.norm(forms - projected, axis=0) / norms
            for column, i in enumerate(members):
                difference = Cochain(q=q, grid=grid, values=(forms[:, column] - projected[:, column]) / root)
                original = Cochain(q=q, grid=grid, values=forms[:, column] / root)
                sup_errors[i, step] = sup_norm(difference) / sup_norm(original)

            normalized = forms / norms
            gram.setdefault(q, []).append(normalized.T @ normalized)
            projected_gram.setdefault(q, []).append((U.T @ normalized).T @ (U.T @ normalized))

            if step == len(t_list) - 1 and np.linalg.matrix_rank(U.T @ normalized, tol=1e-8) < len(members):
                logger.error(f"Forma-teste perdida em q={q}, t={t}: projetor de posto {U.shape[1]}")
                raise NumericalError(f"lost trial form: q={q}, t={t}, {len(members)} formas, projetor {U.shape[1]}")

    residual_slopes = [float(np.polyfit(t_list, np.log(r), 1)[0]) for r in residuals]
    projection_slopes = [float(np.polyfit(t_list, np.log(np.maximum(e, 1e-300)), 1)[0]) for e in projection]
    diagnostics = TrialFormDiagnostics(
        t_list=t_list,
        points=[{"coords": list(p.coords), "index": p.index} for p in points],
        residuals=residuals,
        projection_errors=projection,
        sup_errors=sup_errors,
        gram=gram,
        projected_gram=projected_gram,
        residual_slopes=residual_slopes,
        projection_slopes=projection_slopes,
    )
    logger.info(
        f"Formas-teste: inclinação máxima do resíduo {max(residual_slopes):.3f}, "
        f"da projeção {max(projection_slopes):.3f}"
    )
    return diagnostics


def gap_growth_check(run: VerificationRun, q: int) -> GapGrowth:
    """Inclinação de mínimos quadrados de λ_{m_q+1}(t) contra t."""
    entries = sorted((e for e in run.entries if e.q == q and e.in_window), key=lambda e: e.t)
    if len(entries) < MIN_GROWTH_SAMPLES:
        raise ValueError(f"gap_growth_check precisa de >= {MIN_GROWTH_SAMPLES} valores de t na janela, recebeu {len(entries)}")
    index = run.morse[q]
    t, values = [], []
    for entry in entries:
        if len(entry.values) <= index or not entry.converged[index]:
            logger.error(f"λ_{index + 1} não convergiu em q={q}, t={entry.t}")
            raise NumericalError(f"gap_growth_check: λ_{index + 1} não convergido em q={q}, t={entry.t}")
        t.append(entry.t)
        values.append(entry.values[index])
    slope = float(np.polyfit(t, values, 1)[0])
    growth = GapGrowth(q=q, slope=slope, t=t, values=values)
    if not growth.passed:
        logger.warning(f"Crescimento da lacuna não certificado em q={q}: inclinação {slope:.3f}")
    return growth


def _solve_degree(run: VerificationRun, complex: DeformedComplex, q: int) -> Tuple[SweepEntry, EigResult]:
    config, t = run.config, complex.t
    S = witten_laplacian(complex, q)
    k = min(config.solver.k_for(q, run.morse[q], run.betti[q]), S.shape[0] - 1)
    request = SpectrumRequest(q=q, t=t, k=k, tol=config.solver.tol, max_iter=config.solver.max_iter, seed=config.solver.seed)
    if config.solver.method == "dense":
        result = dense_smallest(S, request)
    else:
        result = smallest_eigs(S, request)

    kernel = kernel_dimension(result)
    gap: GapAnalysis = detect_gap(result.values, scale=result.scale)
    if not np.all(result.converged[: gap.low_count + 1]):
        logger.error(f"Agrupamento baixo sem convergência em q={q}, t={t}")
        raise NumericalError(f"Autovalores do agrupamento baixo não convergiram em q={q}, t={t}")

    threshold = fixed_threshold(run.f, config.deformation.C, t)
    try:
        fixed = count_below(result, threshold)
    except InconclusiveCountError as e:
        logger.warning(f"Contagem com limiar fixo inconclusiva em q={q}, t={t}: {e}")
        fixed = None

    b_q = run.betti[q]
    if kernel < b_q or kernel > gap.low_count:
        logger.error(f"Núcleo {kernel} fora de [b_q={b_q}, low_count={gap.low_count}] em q={q}, t={t}")
        raise NumericalError(f"dim ker Δ_t = {kernel} viola b_q <= dim ker <= low_count em q={q}, t={t}")
    resolved = kernel == b_q
    if not resolved:
        logger.warning(
            f"Tunelamento não resolvido em q={q}, t={t}: {kernel - b_q} autovalores abaixo da precisão de trabalho"
        )

    entry = SweepEntry(
        q=q,
        t=t,
        values=result.values.tolist(),
        residuals=result.residuals.tolist(),
        converged=result.converged.tolist(),
        kernel_dim=kernel,
        low_count=gap.low_count,
        threshold=gap.threshold_used,
        gap_ratio=gap.gap_ratio,
        no_clear_cluster=gap.no_clear_cluster,
        fixed_threshold=threshold,
        fixed_count=fixed,
        tunneling_resolved=resolved,
        in_window=run.window.contains(t),
        iterations=result.iterations,
        seed=config.solver.seed,
        warnings=list(result.warnings),
    )
    return entry, result


def _solve_t(run: VerificationRun, t: float) -> List[Tuple[SweepEntry, EigResult]]:
    complex = assemble_complex(run.grid, run.f, t)
    return [_solve_degree(run, complex, q) for q in range(run.grid.n + 1)]


def _thread_count(jobs: int) -> int:
    try:
        cap = int(os.getenv(THREADS_ENV, DEFAULT_THREADS))
    except ValueError:
        logger.warning(f"{THREADS_ENV} inválido; usando {DEFAULT_THREADS}")
        cap = DEFAULT_THREADS
    return max(1, min(cap, jobs))


def prepare_run(config: RunConfig) -> VerificationRun:
    """Grade, f, Betti, pontos críticos e janela de t, sem nenhum espectro ainda."""
    grid = build_grid(config.manifold.n, config.manifold.lengths, config.manifold.resolutions)
    f = morse_function(config)
    betti = betti_numbers(grid)
    profile = find_critical_points(f, grid)
    morse_counts(profile)
    window = t_window(grid, f, profile, config.deformation.cells_per_width)
    return VerificationRun(config=config, grid=grid, f=f, betti=betti, profile=profile, window=window)


def solve_spectrum(run: VerificationRun, q: int, t: float) -> Tuple[SweepEntry, EigResult]:
    """Espectro de um único par (q, t) com as mesmas regras da varredura."""
    if not 0 <= q <= run.grid.n:
        raise ValueError(f"Grau q={q} fora do intervalo [0, {run.grid.n}]")
    return _solve_degree(run, assemble_complex(run.grid, run.f, t), q)


def run_sweep(config: RunConfig) -> VerificationRun:
    """Pipeline completo: Betti, pontos críticos, varredura em t, veredictos e diagnósticos."""
    try:
        run = prepare_run(config)
        grid, betti, profile, window = run.grid, run.betti, run.profile, run.window

        t_list = config.deformation.t_list
        outside = [t for t in t_list if not window.contains(t)]
        if outside:
            logger.warning(
                f"t fora da janela [{window.t_min:.3g}, {window.t_max:.3g}]: {outside}; contagens não asseguradas"
            )

        with ThreadPoolExecutor(max_workers=_thread_count(len(t_list))) as executor:
            solved = list(executor.map(lambda t: _solve_t(run, t), t_list))
        for per_t in solved:
            for entry, result in per_t:
                run.entries.append(entry)
                run.results[(entry.q, entry.t)] = result
        run.entries.sort(key=lambda e: (e.t, e.q))

        report = check_inequalities(betti, profile.m)
        for entry in run.entries:
            if entry.in_window:
                report.counts_match[f"q={entry.q},t={entry.t:g}"] = entry.low_count == profile.m[entry.q]
        run.inequalities = report

        for t in t_list:
            low = [run.entry(q, t).low_count for q in range(grid.n + 1)]
            run.spectral_alternating[f"{t:g}"] = [
                sum((-1) ** (q - j) * (low[j] - betti[j]) for j in range(q + 1)) for q in range(grid.n + 1)
            ]

        _run_diagnostics(run)
        logger.info(
            f"Varredura concluída: b={betti}, m={profile.m}, {len(run.entries)} espectros, "
            f"veredicto {'aprovado' if run.passed else 'reprovado'}"
        )
        return run
    except Exception as e:
        logger.error(f"Erro na verificação: {e}")
        raise


def _run_diagnostics(run: VerificationRun):
    options = run.config.diagnostics
    in_window = [t for t in run.config.deformation.t_list if run.window.contains(t)]

    if options.gap_growth and len(in_window) >= MIN_GROWTH_SAMPLES:
        run.diagnostics["gap_growth"] = [gap_growth_check(run, q) for q in range(run.grid.n + 1)]

    if options.trial_forms and len(in_window) >= 2:
        try:
            run.diagnostics["trial_forms"] = trial_diagnostics(run, in_window)
        except ValueError as e:
            logger.warning(f"Diagnóstico de formas-teste ignorado: {e}")
            run.skipped["trial_forms"] = str(e)

    if options.exactness:
        grid = run.grid
        if max(grid.num_cells(q) for q in range(grid.n + 1)) > DENSE_LIMIT:
            resolution = [min(N, options.exactness_resolution) for N in grid.resolutions]
            grid = build_grid(grid.n, list(grid.lengths), resolution)
        t = min(in_window or run.config.deformation.t_list)
        try:
            report = exactness_check(assemble_complex(grid, run.f, t), counts=run.morse)
        except (ValueError, ResolutionError) as e:
            logger.warning(f"Checagem de exatidão ignorada: {e}")
            run.skipped["exactness"] = str(e)
            return
        run.diagnostics["exactness"] = report
        unresolved = [e.q for e in run.entries if e.t == t and not e.tunneling_resolved]
        if unresolved:
            report.vacuous = True
        if report.vacuous:
            logger.warning(
                f"Exatidão em t={t} sem conteúdo: dim E = {report.dims}, "
                f"tunelamento não resolvido em q={unresolved}"
            )
