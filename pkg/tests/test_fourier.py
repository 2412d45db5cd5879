import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldrkit.errors import DimensionError
from ldrkit.fourier import FourierPlan, fourier_forward, fourier_inverse, get_plan, next_pow2


def direct_dft(x):
    n = x.size
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def test_next_pow2():
    assert [next_pow2(n) for n in (0, 1, 2, 3, 5, 8, 9, 1000)] == [1, 1, 2, 4, 8, 8, 16, 1024]


def test_delta_and_ones():
    plan = get_plan(8)
    delta = np.zeros(8)
    delta[0] = 1.0
    np.testing.assert_allclose(fourier_forward(plan, delta), np.ones(8), atol=1e-15)
    expected = np.zeros(8)
    expected[0] = 8.0
    np.testing.assert_allclose(fourier_forward(plan, np.ones(8)), expected, atol=1e-13)


def test_against_direct_dft_length_8():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    y = fourier_forward(get_plan(8), x)
    assert np.abs(y - direct_dft(x)).max() <= 1e-12 * max(1.0, np.abs(y).max())


@pytest.mark.parametrize("n", [1, 2, 4, 16, 64, 1024])
def test_against_numpy_fft(n):
    rng = np.random.default_rng(n)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    np.testing.assert_allclose(get_plan(n).forward(x), np.fft.fft(x), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(log_n=st.integers(0, 10), seed=st.integers(0, 2**32 - 1))
def test_round_trip_and_parseval(log_n, seed):
    n = 1 << log_n
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    plan = get_plan(n)
    y = plan.forward(x)
    back = fourier_inverse(plan, y)
    assert np.abs(back - x).max() <= 1e-12 * max(1.0, np.abs(x).max())
    lhs = np.sum(np.abs(y) ** 2)
    rhs = n * np.sum(np.abs(x) ** 2)
    assert abs(lhs - rhs) <= 1e-10 * rhs


def test_stacked_signals_transform_along_last_axis():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((3, 5, 16))
    np.testing.assert_allclose(get_plan(16).forward(X), np.fft.fft(X, axis=-1), atol=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        FourierPlan(12)
    with pytest.raises(DimensionError):
        get_plan(8).forward(np.ones(4))
