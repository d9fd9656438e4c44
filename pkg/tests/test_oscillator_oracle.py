from itertools import combinations, product
from math import factorial, pi, sqrt

import numpy as np
import pytest
import scipy.linalg as la

from scripts.morse_functions import find_critical_points
from scripts.oscillator_oracle import (
    ModelOperatorSpec,
    TrialFormSpec,
    apply_oscillator,
    discretize_1d_oscillator,
    discretize_model,
    hermite_function,
    hermite_gram,
    hermite_polynomial,
    hermite_sequence,
    kappa,
    model_kernel,
    model_spectrum,
    oscillator_eigenvalues,
    trial_form,
)
from scripts.torus_complex import build_grid


def _lowest(matrix, k):
    return la.eigvalsh(matrix, subset_by_index=[0, k - 1])


def _model_values(spec, k):
    count = 1
    while len(model_spectrum(spec, count).values()) < k:
        count += 1
    return model_spectrum(spec, count).values()[:k]


def test_hermite_polynomials_examples():
    x = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(hermite_polynomial(0, x), np.ones_like(x))
    np.testing.assert_allclose(hermite_polynomial(3, x), 8 * x ** 3 - 12 * x)
    sequence = hermite_sequence(4)
    np.testing.assert_allclose(sequence.polynomial(4).coef, [12, 0, -48, 0, 16])
    with pytest.raises(ValueError):
        hermite_polynomial(-1, x)


def test_hermite_gram_is_diagonal():
    for n in range(21):
        for m in range(21):
            expected = sqrt(pi) * 2.0 ** n * factorial(n) if n == m else 0.0
            reference = sqrt(pi) * sqrt(2.0 ** (n + m) * factorial(n) * factorial(m))
            assert abs(hermite_gram(n, m) - expected) <= 1e-10 * reference
    with pytest.raises(ValueError):
        hermite_gram(31, 0)


def test_hermite_functions_are_normalized():
    x = np.linspace(-15, 15, 6001)
    for n in (0, 5, 30):
        assert np.trapz(hermite_function(n, x) ** 2, x) == pytest.approx(1.0, abs=1e-10)
    assert np.trapz(hermite_function(3, x) * hermite_function(4, x), x) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("n", [0, 1, 4, 10])
def test_hermite_functions_are_oscillator_eigenfunctions(n):
    x = np.linspace(-6, 6, 121)
    np.testing.assert_allclose(apply_oscillator(n, x), (2 * n + 1) * hermite_function(n, x), atol=1e-10)


def test_oscillator_eigenvalues():
    assert oscillator_eigenvalues(5) == [1.0, 3.0, 5.0, 7.0, 9.0]
    with pytest.raises(ValueError):
        oscillator_eigenvalues(0)


def test_discretized_oscillator_sinc():
    values = _lowest(discretize_1d_oscillator(12.0, 2048), 5)
    np.testing.assert_allclose(values, [1, 3, 5, 7, 9], atol=1e-6)


def test_discretized_oscillator_fd2_converges_at_second_order():
    coarse = _lowest(discretize_1d_oscillator(12.0, 200, scheme="fd2"), 1)[0]
    fine = _lowest(discretize_1d_oscillator(12.0, 401, scheme="fd2"), 1)[0]
    assert abs(coarse - 1.0) / abs(fine - 1.0) > 3.5
    with pytest.raises(ValueError):
        discretize_1d_oscillator(12.0, 10, scheme="spectral")


def test_model_spectrum_examples():
    spectrum = model_spectrum(ModelOperatorSpec(n=1, r=1, q=1, t=1.0), 1)
    assert spectrum.entries[0].value == 0.0
    assert spectrum.entries[0].witness == ((0,), (0,))

    assert model_spectrum(ModelOperatorSpec(n=1, r=1, q=0, t=2.5), 1).entries[0].value == 5.0

    entries = model_spectrum(ModelOperatorSpec(n=2, r=1, q=1, t=3.0), 3).entries
    assert [(e.value, e.multiplicity) for e in entries] == [(0.0, 1), (6.0, 2), (12.0, 4)]


@pytest.mark.parametrize("r, q", [(0, 0), (1, 2), (2, 1), (3, 3)])
def test_model_spectrum_matches_enumeration(r, q):
    spec = ModelOperatorSpec(n=3, r=r, q=q, t=1.5)
    brute = []
    for axes in combinations(range(3), q):
        eps = spec.epsilon(axes)
        for N in product(range(8), repeat=3):
            c = [2 * N[j] + 1 + (-eps[j] if j < r else eps[j]) for j in range(3)]
            brute.append(spec.t * sum(c))
    brute = np.sort(brute)
    values = model_spectrum(spec, 4).values()
    np.testing.assert_allclose(values, brute[: len(values)])


def test_model_spectrum_witness_is_consistent():
    spec = ModelOperatorSpec(n=2, r=1, q=1, t=2.0)
    for level in model_spectrum(spec, 5).entries:
        N, axes = level.witness
        assert level.value == pytest.approx(2 * spec.t * (sum(N) + spec.base_level(axes)))


def test_model_operator_spec_validation():
    with pytest.raises(ValueError):
        ModelOperatorSpec(n=2, r=3, q=0, t=1.0)
    with pytest.raises(ValueError):
        ModelOperatorSpec(n=2, r=1, q=1, t=0.0)


def test_model_kernel():
    kernel = model_kernel(ModelOperatorSpec(n=2, r=1, q=1, t=4.0))
    assert kernel.dimension == 1
    assert kernel.axes == (0,)
    assert kernel.ground_state(np.zeros(2))[0] == 1.0
    assert kernel.ground_state(np.array([0.5, 0.0]))[0] == pytest.approx(np.exp(-0.5))
    assert model_kernel(ModelOperatorSpec(n=2, r=1, q=2, t=4.0)).dimension == 0


@pytest.mark.parametrize("t", [1.0, 4.0])
@pytest.mark.parametrize(
    "n, r, q",
    [(n, r, q) for n in (1, 2) for r in range(n + 1) for q in range(n + 1)],
)
def test_discretized_model_matches_closed_form(n, r, q, t):
    spec = ModelOperatorSpec(n=n, r=r, q=q, t=t)
    points = 64 if n == 1 else 40
    values = _lowest(discretize_model(spec, points_per_axis=points), 6)
    np.testing.assert_allclose(values, _model_values(spec, 6), rtol=1e-4, atol=1e-4)


def test_discretized_model_kernel():
    spec = ModelOperatorSpec(n=2, r=1, q=1, t=1.0)
    values = _lowest(discretize_model(spec, points_per_axis=40), 2)
    assert abs(values[0]) <= 1e-6
    assert values[1] == pytest.approx(2 * spec.t, abs=1e-3)


def test_discretize_model_refuses_large_operators():
    with pytest.raises(ValueError):
        discretize_model(ModelOperatorSpec(n=2, r=1, q=1, t=1.0), points_per_axis=64)


def test_kappa_profile():
    np.testing.assert_allclose(kappa([0.0, 1.0, -1.0, 2.0, 3.0]), [1, 1, 1, 0, 0])
    assert kappa(1.5) == pytest.approx(0.5)
    band = kappa(np.linspace(1, 2, 50))
    assert np.all(np.diff(band) <= 0)


@pytest.fixture
def f1_points(f1):
    return find_critical_points(f1, build_grid(2, [1.0, 1.0], [8, 8])).points


@pytest.mark.parametrize("phase", ["quadratic", "separable"])
def test_trial_form_norm(f1, f1_points, phase):
    grid = build_grid(2, [1.0, 1.0], [64, 64])
    t = 50.0
    for point in f1_points:
        v = trial_form(TrialFormSpec(critical_point=point, t=t, epsilon=0.3, f=f1, phase=phase), grid)
        assert v.q == point.index
        assert v.norm() ** 2 == pytest.approx(pi / t, rel=0.03)


def test_trial_form_support(f1_points):
    grid = build_grid(2, [1.0, 1.0], [64, 64])
    point = f1_points[1]
    epsilon = 0.2
    v = trial_form(TrialFormSpec(critical_point=point, t=20.0, epsilon=epsilon), grid)
    midpoints = grid.cell_midpoints(v.q)
    delta = np.mod(midpoints - np.asarray(point.coords) + 0.5, 1.0) - 0.5
    x = (delta @ point.eigenvectors) * np.sqrt(np.abs(point.hessian_eigenvalues))
    outside = np.max(np.abs(x), axis=1) >= 2 * epsilon
    assert np.all(v.values[outside] == 0.0)
    assert np.any(v.values != 0.0)


def test_trial_form_rejects_oversized_cutoff(f1_points):
    grid = build_grid(2, [1.0, 1.0], [32, 32])
    with pytest.raises(ValueError, match="período mínimo"):
        trial_form(TrialFormSpec(critical_point=f1_points[0], t=10.0, epsilon=2.0), grid)


def test_trial_form_separable_requires_function(f1_points):
    grid = build_grid(2, [1.0, 1.0], [16, 16])
    with pytest.raises(ValueError):
        trial_form(TrialFormSpec(critical_point=f1_points[0], t=10.0, epsilon=0.2, phase="separable"), grid)


def test_hermite_function_examples_and_parity():
    assert hermite_function(0, 0.0) == pytest.approx(pi ** -0.25)
    assert hermite_polynomial(1, 5.0) == 10.0
    assert hermite_polynomial(2, 1.0) == 2.0
    x = np.linspace(0.1, 4.0, 17)
    for n in range(8):
        np.testing.assert_allclose(hermite_function(n, -x), (-1) ** n * hermite_function(n, x), atol=1e-14)


def test_hermite_derivative_identity():
    x = np.random.default_rng(3).uniform(-3, 3, 50)
    sequence = hermite_sequence(20)
    for n in range(1, 21):
        derivative = sequence.polynomial(n).deriv()
        np.testing.assert_array_equal(derivative.coef, 2 * n * sequence.polynomial(n - 1).coef)
        magnitude = np.abs(derivative.coef) @ np.abs(x[None, :]) ** np.arange(n)[:, None]
        error = np.abs(derivative(x) - 2 * n * hermite_polynomial(n - 1, x))
        assert np.all(error <= 1e-12 * magnitude)


def test_hermite_functions_complete_a_shifted_gaussian():
    x = np.linspace(-14, 14, 8001)
    target = np.exp(-(x - 0.3) ** 2)
    projection = np.zeros_like(x)
    for n in range(41):
        phi = hermite_function(n, x)
        projection += np.trapz(target * phi, x) * phi
    assert sqrt(np.trapz((target - projection) ** 2, x)) <= 1e-8


def test_model_spectrum_scales_linearly_in_t():
    single = model_spectrum(ModelOperatorSpec(n=2, r=1, q=0, t=1.5), 4)
    double = model_spectrum(ModelOperatorSpec(n=2, r=1, q=0, t=3.0), 4)
    for a, b in zip(single.entries, double.entries):
        assert b.value == pytest.approx(2 * a.value)
        assert b.multiplicity == a.multiplicity


def test_model_kernel_in_three_dimensions():
    kernel = model_kernel(ModelOperatorSpec(n=3, r=2, q=2, t=2.0))
    assert kernel.dimension == 1
    assert kernel.axes == (0, 1)
    assert "dx_1∧dx_2" in kernel.description


def test_discretized_model_is_symmetric():
    for scheme in ("sinc", "fd2"):
        A = discretize_model(ModelOperatorSpec(n=2, r=1, q=1, t=2.0), points_per_axis=12, scheme=scheme)
        assert np.max(np.abs(A - A.T)) == 0.0
