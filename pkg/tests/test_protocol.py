import json
import math
import warnings

import numpy as np
import pytest

from catbell.errors import DomainError, EncodingError, SizeError
from catbell.numerics import RngStream
from catbell.optics import CatLabel, cat_normalization, cat_to_fock, coherent_to_fock
from catbell.protocol import (
    ProtocolParams,
    entangle_alice,
    entangle_bob,
    phase_expansion_kappa_int,
    reflectance_expansion_kappa_int,
    reflection_coefficient,
    reflection_phase,
    run_protocol,
    tune_chi,
    tune_two_qubit_chis,
    two_qubit_chi_branches,
    two_qubit_reflection_coefficient,
    uncorrected_loss_fidelity,
)
from catbell.registers import HybridState

KAPPA = 2 * math.pi * 50e6


def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


# --- reflection layer ------------------------------------------------------

def test_tune_chi_examples():
    assert tune_chi(np.pi, KAPPA) == pytest.approx(KAPPA / 2, rel=1e-14)
    assert tune_chi(np.pi / 2, 1.0) == pytest.approx(0.20710678118654752, rel=1e-14)
    assert tune_chi(1e-12, 1.0) < 1e-12
    for bad in (0.0, -0.1, np.pi + 1e-9):
        with pytest.raises(DomainError):
            tune_chi(bad, 1.0)


def test_tune_chi_round_trip_random_angles():
    rng = RngStream(11, 0).generator()
    for phi_j in np.pi * (1 - rng.random(50)):
        chi = tune_chi(phi_j, KAPPA)
        diff = reflection_phase(1, chi, KAPPA) - reflection_phase(0, chi, KAPPA)
        assert abs(_wrap(diff - phi_j)) <= 1e-10
        assert chi <= KAPPA / 2


def test_reflection_examples():
    assert reflection_coefficient(0.0, 0, 0.0, 1.0) == pytest.approx(-1.0, abs=1e-15)
    w = np.linspace(-5, 5, 101)
    for s in (0, 1):
        assert np.max(np.abs(np.abs(reflection_coefficient(w, s, 0.37, 1.3)) - 1)) <= 1e-14
    assert abs(reflection_coefficient(0.0, 0, 0.2, 1.0, 0.05)) < 1
    with pytest.raises(DomainError):
        reflection_coefficient(0.0, 0, 0.1, 0.0)


@pytest.mark.parametrize("s", [0, 1])
@pytest.mark.parametrize("chi", [0.1, 0.35, 0.6])
def test_internal_loss_phase_correction_is_second_order(s, chi):
    # chi = kappa / 2 is skipped: the quartic term vanishes there and the remainder drops to roundoff
    kappa = 1.0
    xs = np.array([1e-3, 2e-3, 4e-3, 8e-3])
    base = reflection_phase(s, chi, kappa)
    rem = [abs(_wrap(reflection_phase(s, chi, kappa, x * kappa) - base) - phase_expansion_kappa_int(s, chi, kappa, x))
           for x in xs]
    slope = np.polyfit(np.log(xs), np.log(rem), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.15)


def test_two_qubit_examples():
    c1, c2 = tune_two_qubit_chis(0.0, 1.0)
    assert (c1, c2) == (pytest.approx(-0.5), pytest.approx(0.0))
    c1, c2 = tune_two_qubit_chis(np.pi / 2, 1.0)
    assert c1 == pytest.approx(-1 / math.sqrt(2), rel=1e-14)
    assert c2 == pytest.approx(0.5, rel=1e-14)
    with pytest.raises(DomainError):
        tune_two_qubit_chis(np.pi, 1.0)


@pytest.mark.parametrize("phi_j", [0.0, 0.3, np.pi / 4, np.pi / 2, 2.5, 3.1])
def test_two_qubit_phases(phi_j):
    c1, c2 = tune_two_qubit_chis(phi_j, KAPPA)
    offset = -(np.pi + phi_j) / 2
    for s1 in (0, 1):
        for s2 in (0, 1):
            theta = np.angle(two_qubit_reflection_coefficient(0.0, s1, s2, c1, c2, KAPPA))
            assert abs(_wrap(theta - offset - np.pi * s1 - phi_j * s2)) <= 1e-10
    if phi_j > 0:
        assert np.sign(c1) == -np.sign(c2)


@pytest.mark.parametrize("phi_j", [0.2, np.pi / 2, 2.0])
def test_two_qubit_sign_branches_agree(phi_j):
    expected = tune_two_qubit_chis(phi_j, 1.0)
    for c1, c2 in two_qubit_chi_branches(phi_j, 1.0):
        assert c1 == pytest.approx(expected[0], rel=1e-12)
        assert c2 == pytest.approx(expected[1], rel=1e-12, abs=1e-14)


# --- parameters ------------------------------------------------------------

def test_params_validation():
    with pytest.raises(SizeError):
        ProtocolParams(0, 1.0)
    with pytest.raises(SizeError):
        ProtocolParams(7, 1.0)
    with pytest.raises(EncodingError):
        ProtocolParams(2, 1.0, encoding="timebin")
    with pytest.raises(DomainError):
        ProtocolParams(2, 1.0, eta=0.0)
    with pytest.raises(DomainError):
        ProtocolParams(2, 1.0, kappa=[1.0, -1.0])
    with pytest.raises(DomainError):
        ProtocolParams(2, 1.0, parity_error=2.0)


def test_params_angles_and_warning():
    p = ProtocolParams(3, 2.0)
    assert p.phi == pytest.approx(np.pi / 4)
    assert np.allclose(p.phi_j, [np.pi / 4, np.pi / 2, np.pi])
    with pytest.warns(RuntimeWarning):
        ProtocolParams(2, 1.0, kappa=1.0, pulse_duration=5.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ProtocolParams(2, 1.0, kappa=1.0, pulse_duration=50.0)


def test_physical_factors_reproduce_ideal_phases():
    p = ProtocolParams(3, 2.0, kappa=[KAPPA, 0.5 * KAPPA, 2 * KAPPA])
    assert np.allclose(p.qubit_factors(), np.exp(1j * p.phi_j), atol=1e-12)
    assert np.allclose(p.register_factors(-1), np.exp(-1j * p.phi * np.arange(8)), atol=1e-12)


# --- entangling maps -------------------------------------------------------

def test_alice_labels_for_two_pairs():
    p = ProtocolParams(2, 1.5)
    out = entangle_alice(HybridState.initial(2, 1.5), p)
    assert out.norm2() == pytest.approx(1.0, abs=1e-10)
    labels = {m: t.light for t in out.terms() for m in [t.alice]}
    for m in range(4):
        assert labels[m] == pytest.approx(1.5 * np.exp(1j * m * np.pi / 2), abs=1e-12)
    weights = np.sum(np.abs(out.amplitudes) ** 2, axis=(1, 2))
    assert np.allclose(weights, 0.25)


@pytest.mark.parametrize("n_pairs", [1, 2, 3])
def test_full_chain_labels(n_pairs):
    alpha = 2.0 * np.exp(0.3j)
    p = ProtocolParams(n_pairs, alpha)
    out = entangle_bob(entangle_alice(HybridState.initial(n_pairs, alpha), p), p)
    assert out.norm2() == pytest.approx(1.0, abs=1e-10)
    for t in out.terms():
        assert t.light == pytest.approx(alpha * np.exp(1j * (t.alice - t.bob) * p.phi), abs=1e-12)
        if t.alice == t.bob:
            assert t.light == pytest.approx(alpha, abs=1e-12)


def test_entangling_maps_are_diagonal_in_registers():
    p = ProtocolParams(2, 1.0, encoding="cat")
    start = HybridState.initial(2, 1.0, ancillas=True)
    out = entangle_bob(entangle_alice(start, p), p)
    # register populations are untouched
    assert np.allclose(np.sum(np.abs(out.amplitudes) ** 2, axis=-1), np.sum(np.abs(start.amplitudes) ** 2, axis=-1))
    assert out.norm2() == pytest.approx(1.0, abs=1e-10)


def test_cat_mode_requires_ancillas():
    with pytest.raises(EncodingError):
        entangle_alice(HybridState.initial(1, 1.0), ProtocolParams(1, 1.0, encoding="cat"))


def test_cat_alice_state_decomposes_into_parity_cats():
    alpha, cutoff = 1.3, 60
    p = ProtocolParams(1, alpha, encoding="cat")
    out = entangle_alice(HybridState.initial(1, alpha, ancillas=True), p)
    plus = np.array([1, 1]) / math.sqrt(2)
    minus = np.array([1, -1]) / math.sqrt(2)
    for m in range(2):
        # project on Bob's register value 0 and ancilla |+>, keep Alice's ancilla and the light
        fock = np.zeros((2, cutoff + 1), dtype=complex)
        for t in out.terms():
            if t.alice == m and t.bob == 0 and t.ancilla_b == 0:
                fock[t.ancilla_a] += t.coeff * coherent_to_fock(t.light, cutoff).amplitudes
        a_m = alpha * np.exp(1j * m * p.phi)
        c_plus = cat_to_fock(CatLabel(a_m, 1), cutoff).amplitudes
        c_minus = cat_to_fock(CatLabel(a_m, -1), cutoff).amplitudes
        # every register/ancilla amplitude of the initial state is 2^{-2}
        expected = 0.25 * (cat_normalization(alpha**2, 1) * np.outer(plus, c_plus)
                           + cat_normalization(alpha**2, -1) * np.outer(minus, c_minus)) / math.sqrt(2)
        assert np.max(np.abs(fock - expected)) <= 1e-10


# --- driver ----------------------------------------------------------------

def test_ideal_phase_run_is_perfect():
    records = run_protocol(ProtocolParams(2, 4.0, idealized=True, seed=3), "none", 50)
    assert all(r.fidelity_vs_target == pytest.approx(1.0, abs=1e-10) for r in records)
    assert all(r.parity_lambda is None and r.correction_applied == "none" for r in records)


def test_lossless_cat_run_has_even_parity():
    records = run_protocol(ProtocolParams(2, 3.0, encoding="cat", seed=5), "none", 200)
    assert all(r.parity_lambda == 1 for r in records)
    assert all(r.correction_applied == "none" for r in records)


def test_single_photon_loss_is_heralded_and_corrected():
    p = ProtocolParams(2, 4.0, encoding="cat", idealized=True, seed=7)
    records = run_protocol(p, "single_photon", 200)
    assert all(r.parity_lambda == -1 and r.correction_applied == "R_on_Alice" for r in records)
    assert min(r.fidelity_vs_target for r in records) >= 1 - 1e-8
    for r in records[:20]:
        s_a, s_b = r.z_outcomes
        assert r.bob_addition_k == (r.heterodyne_k + (s_a ^ s_b) * 2) % 4


def test_uncorrected_loss_matches_direct_evaluation():
    p = ProtocolParams(2, 4.0, encoding="cat", idealized=True, correct=False, seed=8)
    fids = np.array([r.fidelity_vs_target for r in run_protocol(p, "single_photon", 200)])
    assert np.allclose(fids, uncorrected_loss_fidelity(2), atol=1e-10)
    assert uncorrected_loss_fidelity(1) == pytest.approx(0.0, abs=1e-15)
    assert uncorrected_loss_fidelity(3) == pytest.approx(abs(np.mean(np.exp(-2j * np.pi * np.arange(8) / 8))) ** 2 + 0.0,
                                                         abs=1e-15)


def test_loss_just_before_detection_is_harmless():
    # after both entangling steps the lost photon only rescales each projected branch
    p = ProtocolParams(2, 4.0, encoding="cat", idealized=True, seed=9)
    records = run_protocol(p, "single_photon", 50, loss_point="before_detection")
    assert all(r.parity_lambda == 1 for r in records)
    assert min(r.fidelity_vs_target for r in records) >= 1 - 1e-10
    with pytest.raises(DomainError):
        run_protocol(p, "single_photon", 5, loss_point="elsewhere")


def test_parity_errors_flip_reported_outcomes():
    p = ProtocolParams(2, 4.0, encoding="cat", idealized=True, seed=10, parity_error=1.0)
    records = run_protocol(p, "single_photon", 30)
    assert all(r.parity_lambda == 1 and r.correction_applied == "none" for r in records)
    assert np.mean([r.fidelity_vs_target for r in records]) < 0.5


def test_full_channel_matches_analytic_branch_fidelity():
    from catbell.analysis import fidelity_cat_parity_averaged

    alpha2, eta = 9.8, 0.99
    p = ProtocolParams(2, math.sqrt(alpha2), eta=eta, encoding="cat", idealized=True, seed=12)
    records = run_protocol(p, "full_channel", 400)
    lost = np.array([r.photons_lost for r in records])
    fids = np.array([r.fidelity_vs_target for r in records])
    ref = fidelity_cat_parity_averaged(2, alpha2, eta)
    assert abs(np.mean(lost) - (1 - eta) * alpha2) < 5 * math.sqrt((1 - eta) * alpha2 / 400)
    assert abs(fids.mean() - ref["F_average"]) < 5 * fids.std() / math.sqrt(400) + 1e-3


def test_records_are_reproducible_and_worker_independent():
    p = ProtocolParams(2, 2.0, eta=0.9, encoding="cat", seed=21)
    a = run_protocol(p, "full_channel", 40)
    b = run_protocol(p, "full_channel", 40, workers=4)
    c = run_protocol(p, "full_channel", 40, stream_id=1)
    assert [r.to_json_dict() for r in a] == [r.to_json_dict() for r in b]
    assert [r.to_json_dict() for r in a] != [r.to_json_dict() for r in c]


def test_record_json_layout():
    r = run_protocol(ProtocolParams(1, 2.0, encoding="cat", seed=1), "none", 1)[0]
    d = r.to_json_dict()
    assert list(d) == ["shot", "heterodyne_k", "heterodyne_beta_re", "heterodyne_beta_im", "parity_lambda",
                       "z_outcomes", "correction_applied", "bob_addition_k", "photons_lost", "fidelity_vs_target"]
    json.dumps(d)
    assert 0.0 <= r.fidelity_vs_target <= 1.0
    assert r.final_state.fidelity(r.final_vector) == pytest.approx(1.0)


def test_driver_input_checks():
    p = ProtocolParams(1, 1.0)
    with pytest.raises(DomainError):
        run_protocol(p, "partial", 1)
    with pytest.raises(DomainError):
        run_protocol(p, "none", 0)


@pytest.mark.parametrize("chi", [0.1, 0.3, 0.8])
def test_reflectance_needs_a_quadratic_term(chi):
    # the first-order reflectance leaves an x^2 remainder; adding 8 x^2 / D^2 leaves x^3
    kappa = 1.0
    d = 1 + 4 * chi**2 / kappa**2
    xs = np.geomspace(2e-3, 3e-2, 9)
    exact = np.abs(reflection_coefficient(0.0, 0, chi, kappa, xs * kappa)) ** 2
    first = np.array([reflectance_expansion_kappa_int(chi, kappa, x) for x in xs])
    assert np.polyfit(np.log(xs), np.log(np.abs(exact - first)), 1)[0] == pytest.approx(2.0, abs=0.05)
    second = first + 8 * xs**2 / d**2
    assert np.polyfit(np.log(xs), np.log(np.abs(exact - second)), 1)[0] == pytest.approx(3.0, abs=0.05)
