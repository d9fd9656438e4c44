import argparse

import numpy as np
import pytest

import main
from scripts.morse_verifier import run_sweep
from scripts.transform_config import parse_config
from utils.exceptions import NumericalError
from utils.operator_io import import_matrix_market

F1_CONFIG = """
[manifold]
n = 2
resolutions = {resolution}

[morse]
preset = "cos_sum"

[deformation]
t_list = [4.0, 8.0, 12.0]

[diagnostics]
trial_forms = false
exactness = false
gap_growth = false

[output]
report_path = "{out}/report.json"
csv_path = "{out}/spectra.csv"
operators_dir = "{out}/operators"
"""


def _write_config(tmp_path, resolution=24):
    out = (tmp_path / "out").as_posix()
    path = tmp_path / "f1.toml"
    path.write_text(F1_CONFIG.format(resolution=resolution, out=out), encoding="utf-8")
    return str(path)


def test_oscillator_prints_levels_with_witnesses(capsys):
    code = main.main(["oscillator", "--n", "1", "--r", "1", "--q", "1", "--t", "1", "--count", "3"])
    assert code == main.EXIT_OK
    out = capsys.readouterr().out
    assert "eigenvalue" in out
    rows = [line for line in out.splitlines() if line.rstrip().endswith("{1}")]
    assert [float(line.split()[0]) for line in rows] == [0.0, 2.0, 4.0]


def test_oscillator_invalid_spec_is_input_error():
    assert main.main(["oscillator", "--n", "1", "--r", "2", "--q", "1", "--t", "1"]) == main.EXIT_CONFIG


def test_unknown_command():
    assert main.main(["plot"]) == main.EXIT_CONFIG
    assert main.main([]) == main.EXIT_CONFIG
    assert main.dispatch("plot", argparse.Namespace()) == main.EXIT_CONFIG


def test_missing_flag_is_input_error():
    assert main.main(["spectrum", "--q", "0"]) == main.EXIT_CONFIG


def test_missing_config_file_is_input_error(tmp_path):
    assert main.main(["verify", "--config", str(tmp_path / "absent.toml")]) == main.EXIT_CONFIG


def test_invalid_config_exit_code(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[manifold]\nn = 5\n", encoding="utf-8")
    assert main.main(["critical-points", "--config", str(path)]) == main.EXIT_CONFIG


def test_export_operator_round_trip(tmp_path):
    config = _write_config(tmp_path, resolution=8)
    target = tmp_path / "ops"
    code = main.main(["export-operator", "--config", config, "--q", "1", "--t", "0", "--dir", str(target)])
    assert code == main.EXIT_OK

    d0 = import_matrix_market(str(target / "d_q0_t0.mtx"))
    d1 = import_matrix_market(str(target / "d_q1_t0.mtx"))
    assert d0.shape == (128, 64)
    assert d1.shape == (64, 128)
    np.testing.assert_array_equal((d1 @ d0).toarray(), np.zeros((64, 64)))

    laplacian = import_matrix_market(str(target / "laplacian_q1_t0.mtx"))
    assert laplacian.shape == (128, 128)


def test_critical_points_prints_table(tmp_path, capsys):
    config = _write_config(tmp_path, resolution=8)
    csv = tmp_path / "critical.csv"
    assert main.main(["critical-points", "--config", config, "--csv", str(csv)]) == main.EXIT_OK
    assert "hess_1" in capsys.readouterr().out
    assert csv.exists()


def test_spectrum_single_pair(tmp_path, capsys):
    config = _write_config(tmp_path, resolution=8)
    csv = tmp_path / "q0.csv"
    assert main.main(["spectrum", "--config", config, "--q", "0", "--t", "2", "--csv", str(csv)]) == main.EXIT_OK
    assert "lambda" in capsys.readouterr().out
    assert len(csv.read_text().strip().splitlines()) == 1 + 6


def test_spectrum_degree_out_of_range(tmp_path):
    config = _write_config(tmp_path, resolution=8)
    assert main.main(["spectrum", "--config", config, "--q", "3", "--t", "2"]) == main.EXIT_CONFIG


def test_verify_writes_artifacts(tmp_path):
    config = _write_config(tmp_path)
    assert main.main(["verify", "--config", config]) == main.EXIT_OK
    assert (tmp_path / "out" / "report.json").exists()
    assert (tmp_path / "out" / "spectra.csv").exists()


def test_sweep_writes_only_spectra(tmp_path):
    config = _write_config(tmp_path)
    assert main.main(["sweep", "--config", config]) == main.EXIT_OK
    assert (tmp_path / "out" / "spectra.csv").exists()
    assert not (tmp_path / "out" / "report.json").exists()


def test_verdict_failure_exit_code(tmp_path, monkeypatch):
    config = _write_config(tmp_path)

    def failing_sweep(run_config):
        run = run_sweep(run_config)
        run.inequalities.euler_equal = False
        return run

    monkeypatch.setattr(main, "run_sweep", failing_sweep)
    assert main.main(["verify", "--config", config]) == main.EXIT_VERDICT


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    config = _write_config(tmp_path)

    def broken_sweep(run_config):
        raise NumericalError("Autovalores do agrupamento baixo não convergiram")

    monkeypatch.setattr(main, "run_sweep", broken_sweep)
    assert main.main(["verify", "--config", config]) == main.EXIT_NUMERICAL


def test_verify_archives_to_s3(tmp_path, monkeypatch):
    out = (tmp_path / "out").as_posix()
    path = tmp_path / "f1.toml"
    path.write_text(
        F1_CONFIG.format(resolution=24, out=out) + 's3_uri = "s3://bucket/runs"\n',
        encoding="utf-8",
    )
    sent = {}
    monkeypatch.setattr(main, "archive_artifacts", lambda uri, paths: sent.update(uri=uri, paths=paths))
    assert main.main(["verify", "--config", str(path)]) == main.EXIT_OK
    assert sent["uri"] == "s3://bucket/runs"
    assert [p.rsplit("/", 1)[-1] for p in sent["paths"]] == ["report.json", "spectra.csv"]
