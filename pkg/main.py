import argparse
import os
import sys
from dataclasses import replace
from datetime import datetime
from typing import List, Optional

from scripts.morse_functions import find_critical_points
from scripts.morse_verifier import morse_function, prepare_run, run_sweep, solve_spectrum
from scripts.oscillator_oracle import ModelOperatorSpec, model_spectrum
from scripts.reports import (
    critical_points_table,
    oscillator_table,
    result_table,
    run_report,
    spectra_table,
    write_report,
    write_spectra_csv,
)
from scripts.torus_complex import build_grid
from scripts.transform_config import load_config
from scripts.witten_operators import DeformedComplex, assemble_complex
from utils.exceptions import ConfigError, NumericalError
from utils.logger import setup_logger
from utils.operator_io import export_matrix_market
from utils.s3_utils import archive_artifacts

local_directory = os.path.dirname(os.path.abspath(__file__))
log_directory = os.path.join(local_directory, "outputs", "log")
log_filename = os.path.join(log_directory, f"log_{datetime.now().strftime('%d%m%y_%H_%M_%S')}.txt")
logger = setup_logger("main", level=20, log_file=log_filename)  # 20 = INFO level

COMMANDS = ("verify", "spectrum", "sweep", "oscillator", "critical-points", "export-operator")

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_NUMERICAL = 2
EXIT_CONFIG = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Laboratório de Laplacianos de Witten em toros discretos.")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="Varredura completa com veredictos e relatório JSON")
    verify.add_argument("--config", required=True)

    spectrum = sub.add_parser("spectrum", help="Tabela de autovalores de um par (q, t)")
    spectrum.add_argument("--config", required=True)
    spectrum.add_argument("--q", type=int, required=True)
    spectrum.add_argument("--t", type=float, required=True)
    spectrum.add_argument("--csv", default=None)

    sweep = sub.add_parser("sweep", help="CSV de espectros para todos os t da configuração")
    sweep.add_argument("--config", required=True)

    oscillator = sub.add_parser("oscillator", help="Espectro fechado do operador modelo")
    oscillator.add_argument("--n", type=int, required=True)
    oscillator.add_argument("--r", type=int, required=True)
    oscillator.add_argument("--q", type=int, required=True)
    oscillator.add_argument("--t", type=float, required=True)
    oscillator.add_argument("--count", type=int, default=5)

    critical = sub.add_parser("critical-points", help="Tabela de pontos críticos da função de Morse")
    critical.add_argument("--config", required=True)
    critical.add_argument("--csv", default=None)

    export = sub.add_parser("export-operator", help="Exporta d_t e Δ_t em MatrixMarket")
    export.add_argument("--config", required=True)
    export.add_argument("--q", type=int, required=True)
    export.add_argument("--t", type=float, required=True)
    export.add_argument("--dir", default=None)
    return parser


def export_degree(complex: DeformedComplex, q: int, directory: str) -> List[str]:
    """Grava as coboundaries que entram e saem do grau q e o Laplaciano Δ_t^{(q)}."""
    n, t = complex.grid.n, complex.t
    if not 0 <= q <= n:
        raise ValueError(f"Grau q={q} fora do intervalo [0, {n}]")
    paths = []
    for p in (q - 1, q):
        if 0 <= p < n:
            path = os.path.join(directory, f"d_q{p}_t{t:g}.mtx")
            paths.append(export_matrix_market(complex.d[p], path, comment=f"d_t grau {p}, t={t:g}"))
    path = os.path.join(directory, f"laplacian_q{q}_t{t:g}.mtx")
    paths.append(export_matrix_market(complex.laplacian_operator(q), path, comment=f"Laplaciano de Witten q={q}, t={t:g}"))
    return paths


def _print_table(df):
    print(df.to_string(index=False))


def command_verify(args) -> int:
    config = load_config(args.config)
    run = run_sweep(config)
    output = config.output
    artifacts = [
        write_report(run_report(run), output.report_path),
        write_spectra_csv(spectra_table(run.entries), output.csv_path),
    ]
    if output.export_operators:
        for t in config.deformation.t_list:
            complex = assemble_complex(run.grid, run.f, t)
            for q in range(run.grid.n + 1):
                artifacts.extend(p for p in export_degree(complex, q, output.operators_dir) if p not in artifacts)
    if output.s3_uri:
        archive_artifacts(output.s3_uri, artifacts)

    if not run.passed:
        logger.warning(f"Veredicto reprovado; relatório em {output.report_path}")
        return EXIT_VERDICT
    logger.info(f"Veredicto aprovado: b={run.betti}, m={run.morse}")
    return EXIT_OK


def command_spectrum(args) -> int:
    run = prepare_run(load_config(args.config))
    entry, result = solve_spectrum(run, args.q, args.t)
    table = result_table(args.q, args.t, result)
    _print_table(table)
    logger.info(
        f"q={args.q}, t={args.t:g}: núcleo {entry.kernel_dim}, agrupamento baixo {entry.low_count}, "
        f"razão do gap {entry.gap_ratio:.3g}"
    )
    if args.csv:
        write_spectra_csv(table, args.csv)
    return EXIT_OK


def command_sweep(args) -> int:
    config = load_config(args.config)
    config = replace(
        config,
        diagnostics=replace(config.diagnostics, trial_forms=False, exactness=False, gap_growth=False),
    )
    run = run_sweep(config)
    path = write_spectra_csv(spectra_table(run.entries), config.output.csv_path)
    if config.output.s3_uri:
        archive_artifacts(config.output.s3_uri, [path])
    return EXIT_OK


def command_oscillator(args) -> int:
    spec = ModelOperatorSpec(n=args.n, r=args.r, q=args.q, t=args.t)
    _print_table(oscillator_table(model_spectrum(spec, args.count)))
    return EXIT_OK


def command_critical_points(args) -> int:
    config = load_config(args.config)
    grid = build_grid(config.manifold.n, config.manifold.lengths, config.manifold.resolutions)
    profile = find_critical_points(morse_function(config), grid)
    table = critical_points_table(profile)
    _print_table(table)
    logger.info(f"Contagens de Morse por índice: {profile.m}")
    if args.csv:
        write_spectra_csv(table, args.csv)
    return EXIT_OK


def command_export_operator(args) -> int:
    config = load_config(args.config)
    grid = build_grid(config.manifold.n, config.manifold.lengths, config.manifold.resolutions)
    complex = assemble_complex(grid, morse_function(config), args.t)
    paths = export_degree(complex, args.q, args.dir or config.output.operators_dir)
    if config.output.s3_uri:
        archive_artifacts(config.output.s3_uri, paths)
    return EXIT_OK


HANDLERS = {
    "verify": command_verify,
    "spectrum": command_spectrum,
    "sweep": command_sweep,
    "oscillator": command_oscillator,
    "critical-points": command_critical_points,
    "export-operator": command_export_operator,
}


def dispatch(command: str, args) -> int:
    """Executa o subcomando e traduz o resultado em código de saída."""
    handler = HANDLERS.get(command)
    if handler is None:
        logger.error(f"Comando desconhecido: {command}. Disponíveis: {', '.join(COMMANDS)}")
        return EXIT_CONFIG
    try:
        return handler(args)
    except NumericalError as e:
        logger.error(f"Falha numérica em '{command}': {e}")
        return EXIT_NUMERICAL
    except ConfigError as e:
        logger.error(f"Configuração inválida em '{command}': {e}")
        return EXIT_CONFIG
    except (ValueError, OSError) as e:
        logger.error(f"Erro de entrada em '{command}': {e}")
        return EXIT_CONFIG


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] not in COMMANDS:
        logger.error(f"Comando desconhecido: {argv[0] if argv else '(vazio)'}. Disponíveis: {', '.join(COMMANDS)}")
        return EXIT_CONFIG
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse encerra com 2 em flags inválidas; aqui isso é erro de entrada
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    return dispatch(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
