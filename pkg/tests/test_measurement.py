import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catbell.errors import DomainError, SizeError
from catbell.measurement import (
    decode_wedge,
    monte_carlo_wedge_error,
    p_measurement_error,
    sample_heterodyne,
    wedge_error_exact,
)
from catbell.numerics import RngStream


def test_decode_wedge_basic():
    assert decode_wedge(1.0, 2) == 0
    assert decode_wedge(1j, 2) == 1
    assert decode_wedge(-1.0, 2) == 2
    assert decode_wedge(-1j, 2) == 3
    assert decode_wedge(0.0, 3) == 0
    with pytest.raises(SizeError):
        decode_wedge(1.0, 0)


def test_decode_wedge_boundaries_go_to_lower_index():
    phi = np.pi / 2
    assert decode_wedge(np.exp(1j * phi / 2), 2) == 0
    assert decode_wedge(np.exp(1j * 3 * phi / 2), 2) == 1
    # the boundary at -phi/2 wraps into the last wedge
    assert decode_wedge(np.exp(-1j * phi / 2), 2) == 3


def test_decode_wedge_vectorized_and_reference():
    betas = np.exp(1j * np.array([0.0, np.pi / 2, np.pi]))
    assert list(decode_wedge(betas, 2)) == [0, 1, 2]
    assert decode_wedge(1j, 2, reference_angle=np.pi / 2) == 0


@given(st.integers(1, 5), st.floats(0.0, 2 * np.pi), st.floats(0.1, 10.0))
def test_decode_wedge_rotation_covariance(n, angle, r):
    phi = 2 * np.pi / 2**n
    # stay away from boundaries so rounding cannot decide the outcome
    offset = (angle % phi) - phi / 2
    if abs(abs(offset) - phi / 2) < 1e-6:
        return
    beta = r * np.exp(1j * angle)
    assert decode_wedge(beta * np.exp(1j * phi), n) == (decode_wedge(beta, n) + 1) % 2**n


def test_p_measurement_error_examples():
    assert p_measurement_error(2, 0.9, 0.0) == 1.0
    assert p_measurement_error(1, 1.0, 4.0) == pytest.approx(0.0046777349810472658, rel=1e-12)
    values = [p_measurement_error(3, 0.95, n) for n in np.linspace(0, 50, 30)]
    assert np.all(np.diff(values) < 0)
    with pytest.raises(DomainError):
        p_measurement_error(2, 0.9, -1.0)


@pytest.mark.parametrize("n_pairs, a, exact", [(1, 2.0, 0.0023388674905236), (2, 3.0, 0.0026979584),
                                               (3, 5.0, 0.0068103)])
def test_wedge_error_exact_values(n_pairs, a, exact):
    assert wedge_error_exact(n_pairs, a) == pytest.approx(exact, rel=1e-4)


def test_wedge_error_exact_closed_forms():
    # N = 1: one quadrature must stay positive; N = 2: two independent quadratures
    a = 1.7
    half = 0.5 * math.erfc(a)
    assert wedge_error_exact(1, a) == pytest.approx(half, rel=1e-10)
    q = 0.5 * math.erfc(a * math.sin(math.pi / 4))
    assert wedge_error_exact(2, a) == pytest.approx(1 - (1 - q) ** 2, rel=1e-10)


def test_erfc_law_overestimates_by_factor_two_for_one_pair():
    a = 2.0
    assert p_measurement_error(1, 1.0, a * a) / wedge_error_exact(1, a) == pytest.approx(2.0, rel=1e-12)


def test_sample_heterodyne_single_label():
    rng = RngStream(3, 0).generator()
    out = sample_heterodyne([1.0], [4.0], rng, 2)
    assert out.decoded_k == decode_wedge(out.beta, 2)
    with pytest.raises(DomainError):
        sample_heterodyne([0.5], [1.0], rng, 2)


def test_zero_amplitude_gives_uniform_wedges():
    rng = RngStream(4, 0).generator()
    counts = np.bincount([sample_heterodyne([1.0], [0.0], rng, 2).decoded_k for _ in range(8000)], minlength=4)
    expected = 2000
    assert np.all(np.abs(counts - expected) < 5 * math.sqrt(8000 * 0.25 * 0.75))


def test_monte_carlo_example_point():
    rng = RngStream(8, 0).generator()
    rate, err = monte_carlo_wedge_error(2, 3.0, 1_000_000, rng)
    assert abs(rate - p_measurement_error(2, 1.0, 9.0)) < 5 * err
    assert p_measurement_error(2, 1.0, 9.0) == pytest.approx(0.0026997960632601890533, rel=1e-12)


@pytest.mark.parametrize("case", range(20))
def test_monte_carlo_matches_exact_wedge_probability(case):
    rng = RngStream(99, case).generator()
    n = int(rng.integers(1, 5))
    eta = rng.uniform(0.8, 1.0)
    n_mean = rng.uniform(0.5, 40.0)
    amp = math.sqrt(eta * n_mean)
    rate, err = monte_carlo_wedge_error(n, amp * np.exp(2j * np.pi * rng.integers(0, 2**n) / 2**n), 100_000, rng)
    assert abs(rate - wedge_error_exact(n, amp)) < 5 * err


def test_exact_probability_is_bounded_by_erfc_law_for_several_pairs():
    for n in (2, 3, 4):
        for a in (0.5, 1.0, 2.0, 4.0, 8.0):
            assert wedge_error_exact(n, a) <= p_measurement_error(n, 1.0, a * a) + 1e-15
