from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from scripts.morse_functions import PRESETS, make_spec
from scripts.reading_config import LeitorConfig
from utils.exceptions import ConfigError
from utils.logger import setup_logger

logger = setup_logger("transform_config")

ALLOWED_KEYS = {
    "manifold": {"n", "lengths", "resolutions"},
    "morse": {"preset", "frequencies", "amplitudes"},
    "deformation": {"t_list", "t_min", "t_max", "steps", "C", "epsilon", "cells_per_width"},
    "solver": {"k", "tol", "max_iter", "seed", "method"},
    "diagnostics": {"trial_forms", "exactness", "gap_growth", "trial_phase", "exactness_resolution"},
    "output": {"report_path", "csv_path", "export_operators", "operators_dir", "s3_uri"},
}
SOLVER_METHODS = ("lanczos", "dense")
TRIAL_PHASES = ("separable", "quadratic")
DEFAULT_T_LIST = (20.0, 30.0, 40.0, 50.0)


@dataclass
class ManifoldConfig:
    n: int
    lengths: List[float]
    resolutions: List[int]


@dataclass
class MorseConfig:
    preset: str
    frequencies: Optional[List[int]] = None
    amplitudes: Optional[List[float]] = None


@dataclass
class DeformationConfig:
    t_list: List[float]
    C: float = 0.01
    epsilon: float = 1.0
    cells_per_width: float = 1.0


@dataclass
class SolverConfig:
    k: Optional[List[int]] = None
    tol: float = 1e-8
    max_iter: int = 300
    seed: int = 42
    method: str = "lanczos"

    def k_for(self, q: int, m_q: int, b_q: int) -> int:
        """k configurado para o grau q, ou m_q + b_q + 4 quando omitido."""
        if self.k is None:
            return m_q + b_q + 4
        return self.k[q]


@dataclass
class DiagnosticsConfig:
    trial_forms: bool = True
    exactness: bool = True
    gap_growth: bool = True
    trial_phase: str = "separable"
    exactness_resolution: int = 16


@dataclass
class OutputConfig:
    report_path: str = "outputs/report.json"
    csv_path: str = "outputs/spectra.csv"
    export_operators: bool = False
    operators_dir: str = "outputs/operators"
    s3_uri: Optional[str] = None


@dataclass
class RunConfig:
    manifold: ManifoldConfig
    morse: MorseConfig
    deformation: DeformationConfig
    solver: SolverConfig = field(default_factory=SolverConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_integer(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class TransformerConfig:
    """Valida as seções lidas, acumulando uma mensagem por chave inválida."""

    def __init__(self, sections: Dict[str, Dict[str, Any]]):
        self.sections = sections
        self.errors: List[str] = []

    def validate_keys(self):
        for name, allowed in ALLOWED_KEYS.items():
            for key in sorted(set(self.sections.get(name, {})) - allowed):
                self.errors.append(f"Chave desconhecida '{name}.{key}'")

    def _per_axis(self, section: str, key: str, value, n: int, integer: bool) -> Optional[List]:
        check = _is_integer if integer else _is_number
        if check(value):
            value = [value] * n
        if not isinstance(value, list) or len(value) != n or not all(check(v) for v in value):
            kind = "inteiros" if integer else "números"
            self.errors.append(f"Erro no campo '{section}.{key}': deve ser um valor ou uma lista de {n} {kind}")
            return None
        return value

    def validate_manifold(self) -> Optional[ManifoldConfig]:
        section = self.sections["manifold"]
        n = section.get("n")
        if not _is_integer(n) or not 1 <= n <= 3:
            self.errors.append("Erro no campo 'manifold.n': deve ser inteiro entre 1 e 3")
            return None
        lengths = self._per_axis("manifold", "lengths", section.get("lengths", 1.0), n, integer=False)
        if lengths is not None and any(L <= 0 for L in lengths):
            self.errors.append("Erro no campo 'manifold.lengths': períodos precisam ser positivos")
            lengths = None
        if "resolutions" not in section:
            self.errors.append("Campo obrigatório ausente: 'manifold.resolutions'")
            return None
        resolutions = self._per_axis("manifold", "resolutions", section["resolutions"], n, integer=True)
        if resolutions is not None and any(N < 4 for N in resolutions):
            self.errors.append("Erro no campo 'manifold.resolutions': cada resolução precisa ser >= 4")
            resolutions = None
        if lengths is None or resolutions is None:
            return None
        return ManifoldConfig(n=n, lengths=[float(L) for L in lengths], resolutions=list(resolutions))

    def validate_morse(self, n: Optional[int]) -> Optional[MorseConfig]:
        section = self.sections["morse"]
        preset = section.get("preset")
        if preset not in PRESETS:
            self.errors.append(f"Erro no campo 'morse.preset': deve ser um de {', '.join(PRESETS)}")
            return None
        frequencies = section.get("frequencies")
        if frequencies is not None and not (isinstance(frequencies, list) and all(_is_integer(k) for k in frequencies)):
            self.errors.append("Erro no campo 'morse.frequencies': deve ser uma lista de inteiros")
            return None
        amplitudes = section.get("amplitudes")
        if amplitudes is not None and not (isinstance(amplitudes, list) and all(_is_number(a) for a in amplitudes)):
            self.errors.append("Erro no campo 'morse.amplitudes': deve ser uma lista de números")
            return None
        config = MorseConfig(
            preset=preset,
            frequencies=frequencies,
            amplitudes=[float(a) for a in amplitudes] if amplitudes is not None else None,
        )
        if n is not None:
            try:
                make_spec(preset, n, frequencies=frequencies, amplitudes=config.amplitudes)
            except ValueError as e:
                self.errors.append(f"Erro na seção 'morse': {e}")
                return None
        return config

    def validate_deformation(self) -> Optional[DeformationConfig]:
        section = self.sections["deformation"]
        has_list = "t_list" in section
        has_range = any(key in section for key in ("t_min", "t_max", "steps"))
        if not has_list and not has_range:
            t_list = list(DEFAULT_T_LIST)
            has_list, section = True, {**section, "t_list": t_list}
        if has_list and has_range:
            self.errors.append("Erro na seção 'deformation': informe t_list ou t_min/t_max/steps (exatamente um)")
            return None

        if has_list:
            t_list = section["t_list"]
            if not isinstance(t_list, list) or not t_list or not all(_is_number(t) and t >= 0 for t in t_list):
                self.errors.append("Erro no campo 'deformation.t_list': lista não vazia de valores >= 0")
                return None
        else:
            t_min, t_max, steps = section.get("t_min"), section.get("t_max"), section.get("steps")
            if not (_is_number(t_min) and _is_number(t_max) and _is_integer(steps)):
                self.errors.append("Erro na seção 'deformation': t_min, t_max e steps são obrigatórios juntos")
                return None
            if t_min < 0 or t_min > t_max:
                self.errors.append(f"Erro no campo 'deformation.t_min': exige 0 <= t_min <= t_max, recebeu t_min={t_min}, t_max={t_max}")
                return None
            if steps < 1:
                self.errors.append("Erro no campo 'deformation.steps': deve ser >= 1")
                return None
            t_list = np.linspace(t_min, t_max, steps).tolist()

        config = DeformationConfig(t_list=sorted(float(t) for t in set(t_list)))
        for key in ("C", "epsilon", "cells_per_width"):
            if key in section:
                value = section[key]
                if not _is_number(value) or value <= 0:
                    self.errors.append(f"Erro no campo 'deformation.{key}': deve ser positivo")
                else:
                    setattr(config, key, float(value))
        return config

    def validate_solver(self, n: Optional[int]) -> SolverConfig:
        section = self.sections["solver"]
        config = SolverConfig()
        if "k" in section and n is not None:
            k = self._per_axis("solver", "k", section["k"], n + 1, integer=True)
            if k is not None and any(v < 2 for v in k):
                self.errors.append("Erro no campo 'solver.k': deve ser >= 2")
            elif k is not None:
                config.k = list(k)
        if "tol" in section:
            if not _is_number(section["tol"]) or not 0 < section["tol"] < 1:
                self.errors.append("Erro no campo 'solver.tol': deve estar em (0, 1)")
            else:
                config.tol = float(section["tol"])
        for key in ("max_iter", "seed"):
            if key in section:
                if not _is_integer(section[key]) or section[key] < (1 if key == "max_iter" else 0):
                    self.errors.append(f"Erro no campo 'solver.{key}': inteiro inválido")
                else:
                    setattr(config, key, section[key])
        if "method" in section:
            if section["method"] not in SOLVER_METHODS:
                self.errors.append(f"Erro no campo 'solver.method': deve ser um de {', '.join(SOLVER_METHODS)}")
            else:
                config.method = section["method"]
        return config

    def validate_diagnostics(self) -> DiagnosticsConfig:
        section = self.sections["diagnostics"]
        config = DiagnosticsConfig()
        for key in ("trial_forms", "exactness", "gap_growth"):
            if key in section:
                if not isinstance(section[key], bool):
                    self.errors.append(f"Erro no campo 'diagnostics.{key}': deve ser booleano")
                else:
                    setattr(config, key, section[key])
        if "trial_phase" in section:
            if section["trial_phase"] not in TRIAL_PHASES:
                self.errors.append(f"Erro no campo 'diagnostics.trial_phase': deve ser um de {', '.join(TRIAL_PHASES)}")
            else:
                config.trial_phase = section["trial_phase"]
        if "exactness_resolution" in section:
            value = section["exactness_resolution"]
            if not _is_integer(value) or value < 4:
                self.errors.append("Erro no campo 'diagnostics.exactness_resolution': inteiro >= 4")
            else:
                config.exactness_resolution = value
        return config

    def validate_output(self) -> OutputConfig:
        section = self.sections["output"]
        config = OutputConfig()
        for key in ("report_path", "csv_path", "operators_dir", "s3_uri"):
            if key in section:
                if not isinstance(section[key], str) or not section[key]:
                    self.errors.append(f"Erro no campo 'output.{key}': deve ser um texto não vazio")
                else:
                    setattr(config, key, section[key])
        if config.s3_uri is not None and not config.s3_uri.startswith("s3://"):
            self.errors.append("Erro no campo 'output.s3_uri': deve começar com s3://")
        if "export_operators" in section:
            if not isinstance(section["export_operators"], bool):
                self.errors.append("Erro no campo 'output.export_operators': deve ser booleano")
            else:
                config.export_operators = section["export_operators"]
        return config

    def transform(self) -> RunConfig:
        self.validate_keys()
        manifold = self.validate_manifold()
        morse = self.validate_morse(manifold.n if manifold else None)
        deformation = self.validate_deformation()
        solver = self.validate_solver(manifold.n if manifold else None)
        diagnostics = self.validate_diagnostics()
        output = self.validate_output()

        if self.errors:
            for error in self.errors:
                logger.error(error)
            raise ConfigError("; ".join(self.errors))
        return RunConfig(
            manifold=manifold,
            morse=morse,
            deformation=deformation,
            solver=solver,
            diagnostics=diagnostics,
            output=output,
        )


def parse_config(text: str) -> RunConfig:
    """Lê e valida um documento TOML, preenchendo os valores padrão."""
    sections = LeitorConfig(text=text).process_file()
    config = TransformerConfig(sections).transform()
    logger.info(
        f"Configuração válida: T^{config.manifold.n} {config.manifold.resolutions}, "
        f"preset {config.morse.preset}, {len(config.deformation.t_list)} valores de t"
    )
    return config


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())
