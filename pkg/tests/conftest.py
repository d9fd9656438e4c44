import pytest

from scripts.morse_functions import make_spec
from scripts.torus_complex import build_grid


@pytest.fixture
def grid_t2_8():
    return build_grid(2, [1.0, 1.0], [8, 8])


@pytest.fixture
def grid_t2_16():
    return build_grid(2, [1.0, 1.0], [16, 16])


@pytest.fixture
def f1():
    """cos 2πx + cos 2πy: função de Morse perfeita em T²."""
    return make_spec("cos_sum", 2)


@pytest.fixture
def f2():
    """cos 4πx + cos 2πy: m = (2, 4, 2)."""
    return make_spec("cos_sum_multi", 2, frequencies=[2, 1])


@pytest.fixture
def f2_shallow():
    """Mesmos pontos críticos de f2 com barreira 0.1: tunelamento resolvível em precisão dupla."""
    return make_spec("custom_trig", 2, frequencies=[2, 1], amplitudes=[0.05, 0.05])


@pytest.fixture
def f3():
    return make_spec("cos_sum", 3)
