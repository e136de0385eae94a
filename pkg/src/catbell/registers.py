"""Qubit registers, the hybrid light-matter state and the QFT adder.

Register layout
---------------
A register value ``m`` of ``N`` qubits is stored through its binary digits,
``m = sum_j 2^j m_j``.  The hybrid state keeps one complex amplitude for every
(register index, coherent label) pair, where the register index runs over
``(m_A, m_B)`` or, when ancillas are present, ``(m_A, m_B, s_A, s_B)``.
Density matrices flatten that multi-index in C order, so Alice's register is
the most significant block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DomainError, SizeError, ZeroProbabilityError, ZeroStateError
from .optics import AMPLITUDE_CAP, overlap_matrix

__all__ = [
    "MAX_QUBITS",
    "bits_of",
    "index_of",
    "qft",
    "phase_gate_r",
    "add_constant",
    "subtraction_permutation",
    "Term",
    "HybridState",
    "QubitDensityMatrix",
    "bell_target",
    "shifted_bell_state",
    "project_light",
    "project_light_vector",
]

MAX_QUBITS = 12
_LABEL_DECIMALS = 9


def _check_size(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"register size must lie in [1, {MAX_QUBITS}], got {n_qubits}")


def bits_of(m: int, n_qubits: int) -> tuple[int, ...]:
    """Binary digits ``(m_0, ..., m_{N-1})`` of ``m``, least significant first."""
    _check_size(n_qubits)
    if not 0 <= m < 2**n_qubits:
        raise DomainError(f"index {m} out of range for {n_qubits} qubits")
    return tuple((m >> j) & 1 for j in range(n_qubits))


def index_of(bits) -> int:
    """Inverse of :func:`bits_of`."""
    bits = tuple(int(b) for b in bits)
    _check_size(len(bits))
    if any(b not in (0, 1) for b in bits):
        raise DomainError("bits must be 0 or 1")
    return sum(b << j for j, b in enumerate(bits))


def qft(n_qubits: int) -> np.ndarray:
    """Dense QFT unitary with ``U[n, m] = omega^{mn} / sqrt(2^N)``."""
    _check_size(n_qubits)
    d = 2**n_qubits
    mn = np.outer(np.arange(d), np.arange(d)) % d
    return np.exp(2j * np.pi * mn / d) / math.sqrt(d)


def phase_gate_r(k: int, n_qubits: int) -> np.ndarray:
    """``R^k`` as a product of single-qubit phase gates.

    Qubit ``j`` (weight ``2^j``) receives the phase ``exp(-i k 2^j phi)`` on
    its ``|1>`` state, with ``phi = 2 pi / 2^N``.  The product gives
    ``R^k |n> = omega^{-kn} |n>``.
    """
    _check_size(n_qubits)
    d = 2**n_qubits
    phi = 2.0 * np.pi / d
    diag = np.ones(1, dtype=complex)
    for j in reversed(range(n_qubits)):
        gate = np.array([1.0, np.exp(-1j * k * (2**j) * phi)])
        diag = np.kron(diag, gate)
    # kron of most-significant first leaves index n in natural binary order
    return np.diag(diag)


def add_constant(k: int, n_qubits: int) -> np.ndarray:
    """Modular subtraction ``|m> -> |m - k mod 2^N>`` built as ``U^dag R^k U``."""
    u = qft(n_qubits)
    return u.conj().T @ phase_gate_r(k, n_qubits) @ u


def subtraction_permutation(k: int, n_qubits: int) -> np.ndarray:
    """Directly constructed permutation matrix for ``m -> m - k mod 2^N``."""
    _check_size(n_qubits)
    d = 2**n_qubits
    out = np.zeros((d, d))
    m = np.arange(d)
    out[(m - k) % d, m] = 1.0
    return out


class Term(NamedTuple):
    alice: int
    bob: int
    ancilla_a: int | None
    ancilla_b: int | None
    light: complex
    coeff: complex


def _merge_labels(amps: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Combine columns whose labels agree to ``_LABEL_DECIMALS`` decimals."""
    keys = np.round(labels.real, _LABEL_DECIMALS) + 1j * np.round(labels.imag, _LABEL_DECIMALS)
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    if len(uniq) == len(labels):
        return amps, labels
    merged = np.zeros(amps.shape[:-1] + (len(uniq),), dtype=complex)
    for src, dst in enumerate(inverse.ravel()):
        merged[..., dst] += amps[..., src]
    return merged, labels[first]


@dataclass(frozen=True)
class HybridState:
    """Superposition ``sum_{r, l} a[r, l] |r> |L_l>`` over registers and coherent labels.

    With ``idealized=True`` distinct labels are treated as orthogonal, which
    reproduces the textbook orthogonal-basis approximation.
    """

    n_pairs: int
    amplitudes: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    idealized: bool = False

    def __post_init__(self):
        _check_size(2 * self.n_pairs)
        amps = np.asarray(self.amplitudes, dtype=complex)
        labels = np.asarray(self.labels, dtype=complex).ravel()
        d = 2**self.n_pairs
        if amps.shape[:2] != (d, d) or amps.ndim not in (3, 5) or amps.shape[-1] != labels.size:
            raise DomainError(f"amplitude array of shape {amps.shape} does not fit {self.n_pairs} pairs")
        if amps.ndim == 5 and amps.shape[2:4] != (2, 2):
            raise DomainError("ancilla axes must have length 2")
        if labels.size and np.max(np.abs(labels)) ** 2 > AMPLITUDE_CAP:
            raise DomainError("coherent label exceeds the amplitude cap")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def initial(cls, n_pairs: int, alpha: complex, ancillas: bool = False, idealized: bool = False) -> "HybridState":
        """All qubits in ``|+>`` and the light in ``|alpha>``."""
        d = 2**n_pairs
        shape = (d, d, 2, 2, 1) if ancillas else (d, d, 1)
        n_qubits = 2 * n_pairs + (2 if ancillas else 0)
        amps = np.full(shape, 2.0 ** (-n_qubits / 2), dtype=complex)
        return cls(n_pairs, amps, np.array([alpha], dtype=complex), idealized)

    @property
    def has_ancillas(self) -> bool:
        return self.amplitudes.ndim == 5

    @property
    def register_shape(self) -> tuple[int, ...]:
        return self.amplitudes.shape[:-1]

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_pairs + (2 if self.has_ancillas else 0)

    def terms(self, tol: float = 0.0) -> Iterator[Term]:
        """Iterate over the non-zero terms in a flat, readable form."""
        for idx in zip(*np.nonzero(np.abs(self.amplitudes) > tol)):
            reg, lab = idx[:-1], idx[-1]
            anc = (int(reg[2]), int(reg[3])) if self.has_ancillas else (None, None)
            yield Term(int(reg[0]), int(reg[1]), *anc, complex(self.labels[lab]), complex(self.amplitudes[idx]))

    def gram(self) -> np.ndarray:
        """Overlap matrix ``<L_i|L_j>`` of the light labels."""
        if self.idealized:
            return np.eye(self.labels.size, dtype=complex)
        return overlap_matrix(self.labels, self.labels)

    def norm2(self) -> float:
        a = self.amplitudes.reshape(-1, self.labels.size)
        return float(np.real(np.einsum("ri,ij,rj->", a.conj(), self.gram(), a)))

    def normalized(self) -> "HybridState":
        n2 = self.norm2()
        if n2 < 1e-300:
            raise ZeroStateError("hybrid state has zero norm")
        return self._replace(amplitudes=self.amplitudes / math.sqrt(n2))

    def _replace(self, **kw) -> "HybridState":
        data = dict(n_pairs=self.n_pairs, amplitudes=self.amplitudes, labels=self.labels, idealized=self.idealized)
        data.update(kw)
        return HybridState(**data)

    def rotate_labels(self, phases: np.ndarray) -> "HybridState":
        """Multiply the label of every term with register index ``r`` by ``phases[r]``."""
        phases = np.asarray(phases, dtype=complex)
        if phases.shape != self.register_shape:
            raise DomainError(f"phase array shape {phases.shape} != register shape {self.register_shape}")
        k = self.labels.size
        new_labels = (phases[..., None] * self.labels).ravel()
        keys = np.round(new_labels.real, _LABEL_DECIMALS) + 1j * np.round(new_labels.imag, _LABEL_DECIMALS)
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        flat = self.amplitudes.reshape(-1, k)
        rows = np.repeat(np.arange(flat.shape[0]), k)
        amps = np.zeros((flat.shape[0], first.size), dtype=complex)
        np.add.at(amps, (rows, inverse.ravel()), flat.ravel())
        return self._replace(amplitudes=amps.reshape(self.register_shape + (-1,)), labels=new_labels[first])

    def map_labels(self, coefficients: np.ndarray, new_labels: np.ndarray) -> "HybridState":
        """Apply ``|L_l> -> c_l |L'_l>`` to every label (result is not renormalized)."""
        coefficients = np.asarray(coefficients, dtype=complex)
        new_labels = np.asarray(new_labels, dtype=complex)
        amps, labels = _merge_labels(self.amplitudes * coefficients, new_labels)
        return self._replace(amplitudes=amps, labels=labels)

    def annihilate(self) -> "HybridState":
        """Unnormalized action of the annihilation operator on the light."""
        out = self._replace(amplitudes=self.amplitudes * self.labels)
        if out.norm2() < 1e-300:
            raise ZeroStateError("annihilation operator maps this state to zero")
        return out

    def apply_register_unitary(self, axis: int, unitary: np.ndarray) -> "HybridState":
        """Apply ``unitary`` to one register axis (0 Alice, 1 Bob, 2/3 ancillas)."""
        moved = np.tensordot(unitary, self.amplitudes, axes=([1], [axis]))
        return self._replace(amplitudes=np.moveaxis(moved, 0, axis))

    def light_amplitudes(self, beta: complex) -> np.ndarray:
        """Unnormalized register vector ``<beta|_light |state>``.

        In idealized mode ``beta`` must coincide with one of the labels and
        the projection keeps only that label.
        """
        if self.idealized:
            match = np.abs(self.labels - beta) <= 1e-9 * max(1.0, abs(beta))
            return self.amplitudes[..., match].sum(axis=-1)
        ov = overlap_matrix(np.array([beta]), self.labels)[0]
        return self.amplitudes @ ov


@dataclass(frozen=True)
class QubitDensityMatrix:
    n_qubits: int
    matrix: np.ndarray = field(repr=False)
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        d = 2**self.n_qubits
        if mat.shape != (d, d):
            raise DomainError(f"matrix shape {mat.shape} does not match {self.n_qubits} qubits")
        object.__setattr__(self, "matrix", mat)
        if self.check:
            if np.max(np.abs(mat - mat.conj().T)) > 1e-10:
                raise DomainError("density matrix is not Hermitian")
            if abs(np.trace(mat) - 1.0) > 1e-10:
                raise DomainError(f"density matrix trace {np.trace(mat).real:.12g} != 1")
            if np.min(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))) < -1e-9:
                raise DomainError("density matrix has a negative eigenvalue")

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "QubitDensityMatrix":
        v = np.asarray(vector, dtype=complex).ravel()
        nrm = np.linalg.norm(v)
        if nrm < 1e-300:
            raise ZeroStateError("cannot build a density matrix from a zero vector")
        v = v / nrm
        n = int(round(math.log2(v.size)))
        # rank one and normalized by construction, so skip the eigenvalue check
        return cls(n, np.outer(v, v.conj()), check=False)

    def fidelity(self, target: np.ndarray) -> float:
        """``<t| rho |t>`` for a pure target (normalized internally)."""
        t = np.asarray(target, dtype=complex).ravel()
        t = t / np.linalg.norm(t)
        return float(np.clip(np.real(np.vdot(t, self.matrix @ t)), 0.0, 1.0))


def shifted_bell_state(n_pairs: int, k: int) -> np.ndarray:
    """``|Psi_k> = 2^{-N/2} sum_m |m>_A |m + k mod 2^N>_B`` as a 2-D array."""
    d = 2**n_pairs
    out = np.zeros((d, d), dtype=complex)
    m = np.arange(d)
    out[m, (m + k) % d] = 1.0 / math.sqrt(d)
    return out


def bell_target(n_pairs: int) -> np.ndarray:
    """``|Phi+>^{(x) N}`` written in the joint register basis."""
    return shifted_bell_state(n_pairs, 0)


def project_light_vector(state: HybridState, beta: complex) -> tuple[np.ndarray, float]:
    """Normalized register vector and its weight after projecting the light on ``beta``.

    The weight is ``|| <beta|psi> ||^2``: ``pi`` times the heterodyne density
    in exact mode, or the discrete outcome probability in idealized mode.
    """
    v = state.light_amplitudes(beta)
    prob = float(np.sum(np.abs(v) ** 2))
    if prob < 1e-300:
        raise ZeroProbabilityError(f"outcome {beta} has vanishing probability {prob:.3g}")
    return v / math.sqrt(prob), prob


def project_light(state: HybridState, outcome) -> tuple[QubitDensityMatrix, float]:
    """Density matrix of the registers conditioned on the light outcome."""
    beta = complex(getattr(outcome, "amplitude", outcome))
    v, prob = project_light_vector(state, beta)
    return QubitDensityMatrix.from_vector(v), prob
