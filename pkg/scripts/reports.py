import json
import math
import os
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from scripts.eigensolver import EigResult
from scripts.morse_functions import MorseProfile
from scripts.morse_verifier import SweepEntry, VerificationRun
from scripts.oscillator_oracle import ModelSpectrum
from utils.logger import setup_logger

logger = setup_logger("reports")

SPECTRA_COLUMNS = ["q", "t", "index", "lambda", "residual", "converged"]


def _clean(value: Any) -> Any:
    """Converte tipos numpy e valores não finitos para JSON estável."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def run_report(run: VerificationRun) -> Dict[str, Any]:
    """Relatório completo de uma verificação, no schema de docs/catalogo_relatorio.md."""
    diagnostics: Dict[str, Any] = {}
    if "exactness" in run.diagnostics:
        diagnostics["exactness"] = run.diagnostics["exactness"].to_dict()
    if "trial_forms" in run.diagnostics:
        diagnostics["trial_forms"] = run.diagnostics["trial_forms"].to_dict()
    if "gap_growth" in run.diagnostics:
        diagnostics["gap_growth"] = [g.to_dict() for g in run.diagnostics["gap_growth"]]
    diagnostics["skipped"] = dict(run.skipped)

    report = {
        "config": run.config.to_dict(),
        "betti": run.betti,
        "morse": run.morse,
        "critical_points": [
            {
                "coords": list(p.coords),
                "index": p.index,
                "f_value": p.f_value,
                "hessian_eigenvalues": list(p.hessian_eigenvalues),
            }
            for p in run.profile.points
        ],
        "window": {"t_min": run.window.t_min, "t_max": run.window.t_max, "overflow": run.window.overflow},
        "sweep": [entry.to_dict() for entry in run.entries],
        "spectral_alternating": run.spectral_alternating,
        "verdicts": {**run.inequalities.to_dict(), "passed": run.passed},
        "diagnostics": diagnostics,
    }
    return _clean(report)


def write_report(report: Dict[str, Any], path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"Relatório gravado em {path}")
    return path


def result_table(q: int, t: float, result: EigResult) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "q": q,
            "t": t,
            "index": np.arange(len(result.values)),
            "lambda": result.values,
            "residual": result.residuals,
            "converged": result.converged,
        },
        columns=SPECTRA_COLUMNS,
    )


def spectra_table(entries: List[SweepEntry]) -> pd.DataFrame:
    rows = [
        {"q": e.q, "t": e.t, "index": i, "lambda": value, "residual": e.residuals[i], "converged": e.converged[i]}
        for e in entries
        for i, value in enumerate(e.values)
    ]
    return pd.DataFrame(rows, columns=SPECTRA_COLUMNS).sort_values(["t", "q", "index"]).reset_index(drop=True)


def write_spectra_csv(df: pd.DataFrame, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"{len(df)} linhas gravadas em {path}")
    return path


def critical_points_table(profile: MorseProfile) -> pd.DataFrame:
    rows = []
    for p in profile.points:
        row = {"index": p.index, "f_value": p.f_value}
        row.update({f"x{i + 1}": c for i, c in enumerate(p.coords)})
        row.update({f"hess_{i + 1}": v for i, v in enumerate(p.hessian_eigenvalues)})
        rows.append(row)
    return pd.DataFrame(rows)


def oscillator_table(spectrum: ModelSpectrum) -> pd.DataFrame:
    """Níveis do operador modelo; J impresso 1-based como em dx_J."""
    rows = []
    for level in spectrum.entries:
        N, axes = level.witness
        rows.append(
            {
                "eigenvalue": level.value,
                "multiplicity": level.multiplicity,
                "witness_N": "(" + ", ".join(str(v) for v in N) + ")",
                "witness_J": "{" + ", ".join(str(j + 1) for j in axes) + "}",
            }
        )
    return pd.DataFrame(rows, columns=["eigenvalue", "multiplicity", "witness_N", "witness_J"])
