"""Heterodyne sampling, wedge decoding and measurement-error probabilities."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, SizeError, ZeroProbabilityError
from .numerics import erfc
from .registers import HybridState

__all__ = [
    "HeterodyneOutcome",
    "decode_wedge",
    "sample_heterodyne",
    "sample_heterodyne_state",
    "p_measurement_error",
    "wedge_error_exact",
    "monte_carlo_wedge_error",
]


@dataclass(frozen=True)
class HeterodyneOutcome:
    beta: complex
    decoded_k: int


def decode_wedge(beta, n_pairs: int, reference_angle: float = 0.0):
    """Index ``k`` of the wedge whose bisecting ray at ``k phi`` contains ``arg beta``.

    Angles are measured from ``reference_angle``.  Wedge ``k`` is the
    half-open interval ``(k phi - phi/2, k phi + phi/2]``, so a point exactly
    on a boundary goes to the lower index.  The one exception is the boundary
    at ``-phi/2``, which wraps around into wedge ``2^N - 1``.  ``beta = 0``
    maps to wedge 0.
    """
    if n_pairs < 1:
        raise SizeError("need at least one pair")
    d = 2**n_pairs
    phi = 2.0 * np.pi / d
    theta = np.mod(np.angle(np.asarray(beta, dtype=complex)) - reference_angle, 2.0 * np.pi)
    # wedge k covers (k phi - phi/2, k phi + phi/2]; ceil puts boundaries in the lower wedge
    k = np.ceil(np.round((theta - phi / 2) / phi, 12)).astype(int) % d
    return int(k) if np.ndim(k) == 0 else k


def _gaussian_sample(centres: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian around ``centres`` with variance 1/2 per quadrature."""
    noise = rng.normal(scale=math.sqrt(0.5), size=(2,) + centres.shape)
    return centres + noise[0] + 1j * noise[1]


def sample_heterodyne(weights, labels, rng: np.random.Generator, n_pairs: int,
                      reference_angle: float = 0.0) -> HeterodyneOutcome:
    """Draw a heterodyne outcome from a mixture of coherent labels.

    ``weights`` are the mixture probabilities of the labels (the effective
    single-mode state after tracing out the registers in the orthogonal
    picture); each label contributes ``exp(-|beta - L|^2) / pi``.
    """
    w = np.asarray(weights, dtype=float)
    labels = np.asarray(labels, dtype=complex)
    if w.shape != labels.shape or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise DomainError("weights must be a probability vector matching the labels")
    idx = rng.choice(labels.size, p=w / w.sum())
    beta = complex(_gaussian_sample(np.array(labels[idx]), rng))
    return HeterodyneOutcome(beta, decode_wedge(beta, n_pairs, reference_angle))


def sample_heterodyne_state(state: HybridState, rng: np.random.Generator,
                            reference_angle: float = 0.0, max_tries: int = 100_000) -> HeterodyneOutcome:
    """Sample the heterodyne outcome of a normalized hybrid state.

    Exact mode uses rejection sampling: the register-diagonal mixture
    ``g(beta) = sum_r sum_l |a_rl|^2 e^{-|beta - L_l|^2} / (pi w)`` bounds the
    true density because ``|sum_l a_l <beta|L_l>|^2 <= K_r sum_l |a_l|^2 |<beta|L_l>|^2``
    for ``K_r`` non-zero labels in register row ``r``.  Idealized mode picks a
    label with its Born weight and returns it as the outcome.
    """
    amps = state.amplitudes.reshape(-1, state.labels.size)
    w_label = np.sum(np.abs(amps) ** 2, axis=0)
    if state.idealized:
        p = w_label / w_label.sum()
        idx = rng.choice(p.size, p=p)
        beta = complex(state.labels[idx])
        return HeterodyneOutcome(beta, decode_wedge(beta, state.n_pairs, reference_angle))
    row_terms = np.count_nonzero(np.abs(amps) > 0, axis=1)
    bound = float(np.max(row_terms))
    total = w_label.sum()
    for _ in range(max_tries):
        idx = rng.choice(w_label.size, p=w_label / total)
        beta = complex(_gaussian_sample(np.array(state.labels[idx]), rng))
        target = np.sum(np.abs(state.light_amplitudes(beta)) ** 2)
        envelope = bound * np.sum(w_label * np.exp(-np.abs(beta - state.labels) ** 2))
        if envelope > 0 and rng.random() * envelope <= target:
            return HeterodyneOutcome(beta, decode_wedge(beta, state.n_pairs, reference_angle))
    raise ZeroProbabilityError("heterodyne rejection sampler did not accept a sample")


def p_measurement_error(n_pairs: int, eta: float, n: float) -> float:
    """Wedge-error estimate ``erfc(sqrt(eta n) sin(pi / 2^N))``.

    This is the union-type bound on leaving the correct wedge; it slightly
    overestimates the exact probability (see :func:`wedge_error_exact`).
    """
    if n < 0:
        raise DomainError("mean photon number must be non-negative")
    if not 0.0 <= eta <= 1.0:
        raise DomainError("eta must lie in [0, 1]")
    return erfc(math.sqrt(eta * n) * math.sin(math.pi / 2**n_pairs))


def wedge_error_exact(n_pairs: int, amplitude: float) -> float:
    """Exact probability that heterodyne of ``|a>`` (``a >= 0``) leaves wedge 0.

    Integrating the Gaussian radially in polar coordinates gives
    ``P_in = (1/pi) int_{-phi/2}^{phi/2} [e^{-a^2}/2
    + (sqrt(pi)/2) c e^{-a^2 sin^2 t} (1 + erf c)] dt`` with ``c = a cos t``.
    """
    a = float(amplitude)
    if a < 0:
        raise DomainError("amplitude must be non-negative")
    half = math.pi / 2**n_pairs

    def integrand(t):
        c = a * math.cos(t)
        return 0.5 * math.exp(-a * a) + 0.5 * math.sqrt(math.pi) * c * math.exp(-(a * math.sin(t)) ** 2) * (
            2.0 - erfc(c)
        )

    val, _ = integrate.quad(integrand, -half, half, epsabs=1e-15, epsrel=1e-13, limit=200)
    return max(0.0, 1.0 - val / math.pi)


def monte_carlo_wedge_error(n_pairs: int, amplitude: complex, shots: int,
                            rng: np.random.Generator, batch: int = 1_000_000) -> tuple[float, float]:
    """Fraction of heterodyne samples of ``|amplitude>`` decoded outside its wedge.

    Returns ``(rate, standard_error)``.
    """
    true_k = decode_wedge(amplitude, n_pairs)
    errors = 0
    done = 0
    while done < shots:
        m = min(batch, shots - done)
        beta = _gaussian_sample(np.full(m, amplitude, dtype=complex), rng)
        errors += int(np.count_nonzero(decode_wedge(beta, n_pairs) != true_k))
        done += m
    rate = errors / shots
    return rate, math.sqrt(max(rate * (1 - rate), 1.0 / shots) / shots)
