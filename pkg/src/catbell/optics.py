"""Coherent and cat-state algebra with a truncated Fock-space representation.

The protocol itself never leaves the coherent-label picture; Fock vectors are
only built to cross-check the analytic overlaps and the loss channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, TruncationError, ZeroStateError

__all__ = [
    "AMPLITUDE_CAP",
    "CoherentLabel",
    "CatLabel",
    "FockVector",
    "cat_normalization",
    "coherent_overlap",
    "overlap_matrix",
    "default_cutoff",
    "coherent_to_fock",
    "cat_to_fock",
    "annihilate",
    "fock_fidelity",
]

AMPLITUDE_CAP = 1e6  # bound on |alpha|^2
MAX_TRUNCATION_ERROR = 1e-8


def _check_cap(amplitude: complex) -> None:
    if abs(amplitude) ** 2 > AMPLITUDE_CAP:
        raise DomainError(f"|alpha|^2 = {abs(amplitude) ** 2:g} exceeds cap {AMPLITUDE_CAP:g}")


@dataclass(frozen=True)
class CoherentLabel:
    amplitude: complex

    def __post_init__(self):
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        _check_cap(self.amplitude)


@dataclass(frozen=True)
class CatLabel:
    """Photonic cat ``(|a> + parity |-a>) / N`` with ``parity`` = +1 (even) or -1 (odd)."""

    amplitude: complex
    parity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        if self.parity not in (1, -1):
            raise DomainError("cat parity must be +1 or -1")
        _check_cap(self.amplitude)

    @property
    def normalization(self) -> float:
        return cat_normalization(abs(self.amplitude) ** 2, self.parity)


def cat_normalization(alpha2: float, parity: int) -> float:
    """``N_alpha^{+/-} = [2 (1 +/- exp(-2 |alpha|^2))]^{1/2}``."""
    return math.sqrt(2.0 * (1.0 + parity * math.exp(-2.0 * alpha2)))


def _as_amplitude(x) -> complex:
    if isinstance(x, (CoherentLabel, CatLabel)):
        return x.amplitude
    return complex(x)


def coherent_overlap(a, b) -> complex:
    """``<a|b> = exp(-|a|^2/2 - |b|^2/2 + conj(a) b)``."""
    a = _as_amplitude(a)
    b = _as_amplitude(b)
    return complex(np.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + a.conjugate() * b))


def overlap_matrix(bra_labels, ket_labels) -> np.ndarray:
    """Matrix of coherent overlaps ``<bra_i|ket_j>``."""
    a = np.asarray(bra_labels, dtype=complex)[:, None]
    b = np.asarray(ket_labels, dtype=complex)[None, :]
    return np.exp(-0.5 * np.abs(a) ** 2 - 0.5 * np.abs(b) ** 2 + np.conj(a) * b)


def default_cutoff(alpha2: float) -> int:
    """Fock cutoff ``ceil(|alpha|^2 + 10 sqrt(|alpha|^2 + 1))``."""
    return int(math.ceil(alpha2 + 10.0 * math.sqrt(alpha2 + 1.0)))


@dataclass(frozen=True)
class FockVector:
    cutoff: int
    amplitudes: np.ndarray = field(repr=False)
    truncation_error: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.cutoff + 1,):
            raise DomainError(f"expected {self.cutoff + 1} amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "FockVector":
        nrm = self.norm
        if nrm < 1e-300:
            raise ZeroStateError("cannot normalize a zero Fock vector")
        return FockVector(self.cutoff, self.amplitudes / nrm, self.truncation_error)

    def inner(self, other: "FockVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def _log_poisson_weights(alpha2: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    if alpha2 == 0:
        return np.where(n == 0, 0.0, -np.inf)
    return n * math.log(alpha2) - log_fact


def coherent_to_fock(alpha, cutoff: int | None = None) -> FockVector:
    """Truncated Fock expansion of ``|alpha>`` (not renormalized)."""
    alpha = _as_amplitude(alpha)
    alpha2 = abs(alpha) ** 2
    if cutoff is None:
        cutoff = default_cutoff(alpha2)
    log_w = _log_poisson_weights(alpha2, cutoff) - alpha2
    n = np.arange(cutoff + 1)
    phase = np.exp(1j * n * np.angle(alpha)) if alpha2 > 0 else (n == 0).astype(complex)
    amps = np.exp(0.5 * log_w) * phase
    err = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    if err > MAX_TRUNCATION_ERROR:
        raise TruncationError(f"cutoff {cutoff} leaves {err:.3g} of the coherent-state weight")
    return FockVector(cutoff, amps, err)


def cat_to_fock(cat: CatLabel, cutoff: int | None = None) -> FockVector:
    """Fock expansion of a normalized even or odd cat state.

    Built from the parity-restricted series rather than from two coherent
    vectors, so the ``alpha -> 0`` limits (vacuum / single photon) are exact.
    """
    alpha = cat.amplitude
    alpha2 = abs(alpha) ** 2
    if cutoff is None:
        cutoff = default_cutoff(alpha2)
    n = np.arange(cutoff + 1)
    keep = (n % 2 == 0) if cat.parity == 1 else (n % 2 == 1)
    if alpha2 == 0.0:
        amps = np.zeros(cutoff + 1, dtype=complex)
        amps[0 if cat.parity == 1 else 1] = 1.0
        return FockVector(cutoff, amps, 0.0)
    # log of cosh / sinh of |alpha|^2, stable for large arguments
    if cat.parity == 1:
        tail = math.log1p(math.exp(-2.0 * alpha2))
    else:
        tail = math.log(-math.expm1(-2.0 * alpha2))
    log_norm = alpha2 + tail - math.log(2.0)
    log_w = _log_poisson_weights(alpha2, cutoff) - log_norm
    amps = np.where(keep, np.exp(0.5 * log_w), 0.0) * np.exp(1j * n * np.angle(alpha))
    err = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    if err > MAX_TRUNCATION_ERROR:
        raise TruncationError(f"cutoff {cutoff} leaves {err:.3g} of the cat-state weight")
    return FockVector(cutoff, amps, err)


def annihilate(f: FockVector) -> FockVector:
    """Unnormalized action of ``a``: ``c_n -> sqrt(n + 1) c_{n+1}``."""
    out = np.zeros_like(f.amplitudes)
    out[:-1] = np.sqrt(np.arange(1, f.cutoff + 1)) * f.amplitudes[1:]
    if np.linalg.norm(out) < 1e-300:
        raise ZeroStateError("annihilation operator maps this state to zero")
    return FockVector(f.cutoff, out, f.truncation_error)


def fock_fidelity(a: FockVector, b: FockVector) -> float:
    """``|<a|b>|^2 / (<a|a><b|b>)``."""
    return abs(a.inner(b)) ** 2 / (a.norm**2 * b.norm**2)
