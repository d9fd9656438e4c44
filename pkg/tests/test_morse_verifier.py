import os
import time

import numpy as np
import pytest
import scipy.sparse as sp

from scripts import morse_verifier
from scripts.morse_verifier import (
    _projector_basis,
    betti_numbers,
    check_inequalities,
    exactness_check,
    fixed_threshold,
    gap_growth_check,
    low_lying_counts,
    prepare_run,
    run_sweep,
    solve_spectrum,
    t_window,
    trial_diagnostics,
)
from scripts.eigensolver import EigResult, dense_spectrum_oracle
from scripts.morse_functions import find_critical_points
from scripts.torus_complex import build_grid
from scripts.transform_config import load_config, parse_config
from scripts.witten_operators import assemble_complex, witten_laplacian
from utils.exceptions import NumericalError, ResolutionError

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")

SHALLOW_CONFIG = """
[manifold]
n = 2
resolutions = 16

[morse]
preset = "custom_trig"
frequencies = [2, 1]
amplitudes = [0.05, 0.05]

[deformation]
t_list = [20.0, 25.0, 30.0]

[diagnostics]
trial_forms = false
"""

PERFECT_CONFIG = """
[manifold]
n = 2
resolutions = [24, 24]

[morse]
preset = "cos_sum"

[deformation]
t_list = [4.0, 8.0, 12.0]
epsilon = 1.0
"""


@pytest.fixture(scope="module")
def shallow_run():
    return run_sweep(parse_config(SHALLOW_CONFIG))


@pytest.fixture(scope="module")
def perfect_run():
    return run_sweep(parse_config(PERFECT_CONFIG))


@pytest.mark.parametrize(
    "n, resolution, expected",
    [(1, 8, [1, 1]), (2, 8, [1, 2, 1]), (3, 6, [1, 3, 3, 1])],
)
def test_betti_numbers(n, resolution, expected):
    grid = build_grid(n, [1.0] * n, [resolution] * n)
    assert betti_numbers(grid) == expected


@pytest.mark.slow
def test_betti_numbers_three_torus_acceptance_grid():
    start = time.perf_counter()
    assert betti_numbers(build_grid(3, [1.0] * 3, [16] * 3)) == [1, 3, 3, 1]
    assert time.perf_counter() - start < 60.0


def test_check_inequalities_examples():
    report = check_inequalities([1, 2, 1], [2, 4, 2])
    assert all(report.weak_ok)
    assert report.strong_slack == [1, 1, 0]
    assert report.euler_equal
    assert report.passed

    perfect = check_inequalities([1, 2, 1], [1, 2, 1])
    assert perfect.weak_slack == [0, 0, 0]
    assert perfect.strong_slack == [0, 0, 0]

    broken = check_inequalities([2, 0], [1, 0])
    assert broken.weak_ok == [False, True]
    assert not broken.passed

    with pytest.raises(ValueError):
        check_inequalities([1, 1], [1, 2, 1])


def test_shallow_sweep_counts_critical_points(shallow_run):
    assert shallow_run.betti == [1, 2, 1]
    assert shallow_run.morse == [2, 4, 2]
    for entry in shallow_run.entries:
        assert entry.in_window
        assert entry.low_count == shallow_run.morse[entry.q]
        assert entry.kernel_dim == shallow_run.betti[entry.q]
        assert entry.tunneling_resolved
        assert all(entry.converged[: entry.low_count + 1])
    assert shallow_run.inequalities.passed
    assert shallow_run.passed


def test_shallow_sweep_alternating_sums(shallow_run):
    for sums in shallow_run.spectral_alternating.values():
        assert sums == [1, 1, 0]


def test_shallow_sweep_tunneling_decays(shallow_run):
    tunneling = [shallow_run.entry(0, t).values[1] for t in (20.0, 25.0, 30.0)]
    assert tunneling[0] > tunneling[1] > tunneling[2] > 0


def test_shallow_sweep_diagnostics(shallow_run):
    exactness = shallow_run.diagnostics["exactness"]
    assert exactness.dims == [1, 2, 1]
    assert exactness.ranks == [1, 1, 0]
    assert exactness.alternating_sums == [1, 1, 0]
    assert exactness.passed
    for growth in shallow_run.diagnostics["gap_growth"]:
        assert growth.slope > 0
        assert growth.passed
    assert "trial_forms" not in shallow_run.diagnostics


def test_low_lying_counts_modes(shallow_run):
    assert low_lying_counts(shallow_run, 1, 20.0) == 4
    assert low_lying_counts(shallow_run, 1, 20.0, "fixed") == shallow_run.entry(1, 20.0).fixed_count
    with pytest.raises(ValueError):
        low_lying_counts(shallow_run, 1, 20.0, "median")
    with pytest.raises(ValueError):
        low_lying_counts(shallow_run, 1, 99.0)


def test_sweep_is_deterministic(shallow_run):
    again = run_sweep(parse_config(SHALLOW_CONFIG))
    for first, second in zip(shallow_run.entries, again.entries):
        assert first.values == second.values


def test_perfect_morse_sweep(perfect_run):
    assert perfect_run.betti == perfect_run.morse == [1, 2, 1]
    assert all(entry.low_count == entry.kernel_dim for entry in perfect_run.entries)
    assert perfect_run.inequalities.strong_slack == [0, 0, 0]
    assert perfect_run.diagnostics["exactness"].dims == [0, 0, 0]
    assert perfect_run.passed


def test_trial_form_program(perfect_run):
    diagnostics = perfect_run.diagnostics["trial_forms"]
    assert len(diagnostics.points) == 4
    assert all(slope < 0 for slope in diagnostics.residual_slopes)
    assert all(slope < 0 for slope in diagnostics.projection_slopes)
    assert diagnostics.gram_off_diagonal() == 0.0
    assert all(det > 0 for det in diagnostics.gram_determinants().values())
    for matrices in diagnostics.gram.values():
        for G in matrices:
            np.testing.assert_array_equal(G, G.T)
            assert np.all(np.diag(G) > 0)
    assert diagnostics.passed


def test_trial_diagnostics_needs_two_samples(perfect_run):
    with pytest.raises(ValueError):
        trial_diagnostics(perfect_run, [4.0])


def test_gap_growth_needs_three_samples():
    config = parse_config(SHALLOW_CONFIG.replace("[20.0, 25.0, 30.0]", "[20.0, 30.0]"))
    run = run_sweep(config)
    assert "gap_growth" not in run.diagnostics
    with pytest.raises(ValueError):
        gap_growth_check(run, 0)


def test_exactness_check_on_shallow_complex(grid_t2_16, f2_shallow):
    complex = assemble_complex(grid_t2_16, f2_shallow, 20.0)
    report = exactness_check(complex, counts=[2, 4, 2])
    assert report.dims == [1, 2, 1]
    assert all(report.exact)
    assert report.alternating_sums[-1] == 0
    assert report.d_squared_residual <= 1e-10

    bulk = dense_spectrum_oracle(witten_laplacian(complex, 0))[2]
    with pytest.raises(ValueError):
        exactness_check(complex, lambda_window=bulk)


def test_exactness_check_empty_window(grid_t2_16, f2_shallow):
    report = exactness_check(assemble_complex(grid_t2_16, f2_shallow, 20.0), lambda_window=1e-30)
    assert report.dims == [0, 0, 0]
    assert report.ranks == [0, 0, 0]
    assert report.passed


def test_t_window(grid_t2_16, f2_shallow):
    profile = find_critical_points(f2_shallow, grid_t2_16)
    window = t_window(grid_t2_16, f2_shallow, profile)
    assert window.contains(20.0)
    assert not window.contains(40.0)
    assert window.t_max <= window.overflow
    strict = t_window(grid_t2_16, f2_shallow, profile, cells_per_width=4.0)
    assert strict.t_max == pytest.approx(window.t_max / 16)


def test_sweep_refuses_t_above_overflow_bound():
    config = parse_config(
        """
[manifold]
n = 2
resolutions = 8

[morse]
preset = "cos_sum_multi"
frequencies = [2, 1]

[deformation]
t_list = [100000.0]
"""
    )
    with pytest.raises(ResolutionError):
        run_sweep(config)


@pytest.mark.slow
def test_acceptance_f2_counts_and_trial_forms():
    run = run_sweep(load_config(os.path.join(CONFIG_DIR, "f2.toml")))
    for entry in run.entries:
        assert entry.low_count == run.morse[entry.q]
        assert run.betti[entry.q] <= entry.kernel_dim <= entry.low_count
    assert run.inequalities.passed

    diagnostics = run.diagnostics["trial_forms"]
    assert len(diagnostics.points) == 8
    assert all(slope < 0 for slope in diagnostics.residual_slopes)
    assert all(slope < 0 for slope in diagnostics.projection_slopes)
    assert diagnostics.gram_off_diagonal() <= 1e-8
    assert all(det > 0 for det in diagnostics.gram_determinants().values())
    assert diagnostics.passed


def test_fixed_threshold_scales_with_hessian(f2_shallow):
    expected = np.exp(-0.2) * 0.05 * (4 * np.pi) ** 2
    assert fixed_threshold(f2_shallow, 0.01, 20.0) == pytest.approx(expected)
    assert fixed_threshold(f2_shallow, 0.01, 40.0) < fixed_threshold(f2_shallow, 0.01, 20.0)


def test_prepare_run_has_no_spectra():
    run = prepare_run(parse_config(SHALLOW_CONFIG))
    assert run.betti == [1, 2, 1]
    assert run.morse == [2, 4, 2]
    assert run.entries == []
    assert run.window.contains(20.0)


def test_solve_spectrum_matches_sweep(shallow_run):
    entry, result = solve_spectrum(shallow_run, 1, 25.0)
    np.testing.assert_allclose(entry.values, shallow_run.entry(1, 25.0).values, rtol=1e-10, atol=1e-14)
    assert entry.low_count == 4
    assert len(result.values) == len(entry.values)
    with pytest.raises(ValueError):
        solve_spectrum(shallow_run, 3, 25.0)


def test_tunneling_eigenvalue_decays_exponentially(f2_shallow):
    grid = build_grid(2, [1.0, 1.0], [32, 32])
    tunneling = [
        dense_spectrum_oracle(witten_laplacian(assemble_complex(grid, f2_shallow, t), 0))[1]
        for t in (20.0, 30.0, 40.0, 50.0)
    ]
    assert all(a > b > 0 for a, b in zip(tunneling, tunneling[1:]))
    assert tunneling[-1] / tunneling[0] < 0.1


def test_exactness_vacuous_flag(shallow_run, perfect_run):
    assert not shallow_run.diagnostics["exactness"].vacuous
    perfect = perfect_run.diagnostics["exactness"]
    assert perfect.vacuous
    assert perfect.to_dict()["vacuous"] is True


def test_exactness_vacuous_when_tunneling_underflows():
    config = parse_config(
        """
[manifold]
n = 2
resolutions = 16

[morse]
preset = "cos_sum_multi"
frequencies = [2, 1]

[deformation]
t_list = [20.0, 25.0, 30.0]

[diagnostics]
trial_forms = false
"""
    )
    run = run_sweep(config)
    assert not all(entry.tunneling_resolved for entry in run.entries if entry.t == 20.0)
    report = run.diagnostics.get("exactness")
    assert report is None or report.vacuous
    assert report is not None or "exactness" in run.skipped


def _unconverged(values):
    size = len(values)
    return EigResult(
        values=np.asarray(values, dtype=float),
        residuals=np.full(size, 1.0),
        converged=np.zeros(size, dtype=bool),
        scale=10.0,
        iterations=1,
        vectors=np.eye(size + 2)[:, :size],
    )


def test_projector_basis_rejects_unconverged_cluster(monkeypatch):
    config = parse_config(SHALLOW_CONFIG)
    monkeypatch.setattr(morse_verifier, "dense_smallest", lambda S, request: _unconverged([0.0, 1e-3, 5.0, 6.0]))
    with pytest.raises(NumericalError):
        _projector_basis(sp.identity(6, format="csr"), 0, 20.0, 4, config)


def test_projector_basis_passes_iteration_cap(monkeypatch):
    config = parse_config(SHALLOW_CONFIG + "\n[solver]\nmax_iter = 7\n")
    seen = []

    def fake_lanczos(S, request):
        seen.append(request)
        result = _unconverged([0.0, 1e-3, 5.0, 6.0])
        result.converged[:] = True
        return result

    monkeypatch.setattr(morse_verifier, "smallest_eigs", fake_lanczos)
    size = morse_verifier.DENSE_LIMIT + 1
    U = _projector_basis(sp.identity(size, format="csr"), 0, 20.0, 4, config)
    assert seen[0].max_iter == 7
    assert U.shape[1] == 2


def test_projector_basis_reuses_sweep_vectors(shallow_run):
    cached = shallow_run.results[(0, 20.0)]
    U = _projector_basis(None, 0, 20.0, 4, shallow_run.config, cached=cached)
    np.testing.assert_array_equal(U, cached.vectors[:, :2])
