import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catbell.errors import DomainError, TruncationError, ZeroStateError
from catbell.optics import (
    CatLabel,
    CoherentLabel,
    annihilate,
    cat_normalization,
    cat_to_fock,
    coherent_overlap,
    coherent_to_fock,
    default_cutoff,
    fock_fidelity,
    overlap_matrix,
)


def test_overlap_examples():
    a = CoherentLabel(1.3 - 0.4j)
    assert coherent_overlap(a, a) == pytest.approx(1.0, abs=1e-15)
    assert coherent_overlap(0, 2.0) == pytest.approx(math.exp(-2.0), rel=1e-14)
    assert abs(coherent_overlap(1.0, -1.0)) == pytest.approx(math.exp(-2.0), rel=1e-14)


def test_overlap_matrix_is_hermitian_pairwise():
    labels = np.array([1.0, 1j, -0.5 + 0.2j])
    g = overlap_matrix(labels, labels)
    assert np.allclose(g, g.conj().T, atol=1e-15)
    assert g[0, 1] == pytest.approx(coherent_overlap(labels[0], labels[1]))


@settings(max_examples=40)
@given(st.complex_numbers(max_magnitude=4.0), st.complex_numbers(max_magnitude=4.0))
def test_overlap_agrees_with_fock_inner_product(a, b):
    fa, fb = coherent_to_fock(a, 60), coherent_to_fock(b, 60)
    assert fa.inner(fb) == pytest.approx(coherent_overlap(a, b), abs=1e-8)


def test_amplitude_cap():
    with pytest.raises(DomainError):
        CoherentLabel(2000.0)
    with pytest.raises(DomainError):
        CatLabel(1.0, parity=0)


def test_default_cutoff_rule():
    assert default_cutoff(16.0) == math.ceil(16 + 10 * math.sqrt(17))


@pytest.mark.parametrize("alpha2", [0.5, 4.0, 25.0, 100.0])
def test_default_cutoff_keeps_truncation_small(alpha2):
    assert coherent_to_fock(math.sqrt(alpha2)).truncation_error < 1e-8


def test_truncation_error_raised_for_small_cutoff():
    with pytest.raises(TruncationError):
        coherent_to_fock(4.0, 10)
    with pytest.raises(TruncationError):
        cat_to_fock(CatLabel(4.0), 10)


@pytest.mark.parametrize("parity, occupied", [(1, 0), (-1, 1)])
def test_cat_small_amplitude_limits(parity, occupied):
    for a in (0.0, 1e-9):
        f = cat_to_fock(CatLabel(a, parity), 20)
        assert abs(f.amplitudes[occupied]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 1.2, 2.5 * np.exp(0.7j), 6.0])
def test_cat_parity_support_and_orthogonality(alpha):
    even = cat_to_fock(CatLabel(alpha, 1), 80)
    odd = cat_to_fock(CatLabel(alpha, -1), 80)
    n = np.arange(81)
    assert np.all(even.amplitudes[n % 2 == 1] == 0)
    assert np.all(odd.amplitudes[n % 2 == 0] == 0)
    assert abs(even.inner(odd)) < 1e-12
    assert even.norm == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("alpha", [0.2, 0.9, 1.7, 3.0])
@pytest.mark.parametrize("parity", [1, -1])
def test_cat_normalization_matches_fock_norm(alpha, parity):
    raw = coherent_to_fock(alpha, 80).amplitudes + parity * coherent_to_fock(-alpha, 80).amplitudes
    assert np.linalg.norm(raw) == pytest.approx(cat_normalization(alpha**2, parity), rel=1e-8)
    assert CatLabel(alpha, parity).normalization == pytest.approx(cat_normalization(alpha**2, parity))
    direct = raw / np.linalg.norm(raw)
    assert abs(np.vdot(direct, cat_to_fock(CatLabel(alpha, parity), 80).amplitudes)) == pytest.approx(1.0, abs=1e-10)


def test_annihilate_coherent_is_eigenvector():
    f = coherent_to_fock(1.5, 60)
    g = annihilate(f)
    assert fock_fidelity(f, g) >= 1 - 1e-8
    assert g.norm == pytest.approx(1.5 * f.norm, rel=1e-8)


def test_annihilate_flips_cat_parity():
    even = cat_to_fock(CatLabel(1.8, 1), 60)
    odd = cat_to_fock(CatLabel(1.8, -1), 60)
    assert fock_fidelity(annihilate(even), odd) >= 1 - 1e-8


def test_annihilate_vacuum_raises():
    with pytest.raises(ZeroStateError):
        annihilate(coherent_to_fock(0.0, 5))
