"""Entangling maps, cavity-reflection physics and the end-to-end protocol driver."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, EncodingError, SizeError
from .loss import kraus_on_labels, loss_branch_weights
from .measurement import HeterodyneOutcome, sample_heterodyne_state
from .numerics import RngStream
from .registers import (
    HybridState,
    QubitDensityMatrix,
    add_constant,
    bell_target,
    phase_gate_r,
    project_light_vector,
    shifted_bell_state,
)

__all__ = [
    "LOSS_MODES",
    "tune_chi",
    "reflection_coefficient",
    "reflection_phase",
    "two_qubit_reflection_coefficient",
    "tune_two_qubit_chis",
    "two_qubit_chi_branches",
    "phase_expansion_kappa_int",
    "reflectance_expansion_kappa_int",
    "ProtocolParams",
    "RunRecord",
    "entangle_alice",
    "entangle_bob",
    "run_protocol",
    "uncorrected_loss_fidelity",
]

LOSS_MODES = ("none", "single_photon", "full_channel")
MAX_SIMULATED_PAIRS = 6


# --- cavity reflection -----------------------------------------------------

def tune_chi(phi_j: float, kappa: float) -> float:
    """Dispersive shift ``(kappa / 2) tan(phi_j / 4)`` giving a conditional phase ``phi_j``."""
    if not 0.0 < phi_j <= math.pi:
        raise DomainError("phi_j must lie in (0, pi]")
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    return 0.5 * kappa * math.tan(0.25 * phi_j)


def reflection_coefficient(omega, s: int, chi: float, kappa: float, kappa_int: float = 0.0):
    """``R_s(omega)`` of a single-sided cavity dispersively coupled to one qubit in state ``s``."""
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    shift = 1j * (np.asarray(omega) + (-1) ** s * chi)
    return (shift - 0.5 * (kappa - kappa_int)) / (shift + 0.5 * (kappa + kappa_int))


def reflection_phase(s: int, chi: float, kappa: float, kappa_int: float = 0.0) -> float:
    """``theta_s = arg R_s(0)``."""
    return float(np.angle(reflection_coefficient(0.0, s, chi, kappa, kappa_int)))


def two_qubit_reflection_coefficient(omega, s1: int, s2: int, chi1: float, chi2: float, kappa: float):
    """``R_{s1 s2}(omega)`` for two qubits sharing one lossless cavity."""
    shift = 1j * (np.asarray(omega) + (-1) ** s1 * chi1 + (-1) ** s2 * chi2)
    return (shift - 0.5 * kappa) / (shift + 0.5 * kappa)


def tune_two_qubit_chis(phi_j: float, kappa: float) -> tuple[float, float]:
    """``(chi_1, chi_2) = (-(kappa/2) sec(phi_j/2), (kappa/2) tan(phi_j/2))``.

    With these shifts the four conditional phases are ``phi0 + pi s_1 + phi_j s_2``
    with the global offset ``phi0 = -(pi + phi_j) / 2``.
    """
    if not 0.0 <= phi_j < math.pi:
        raise DomainError("phi_j must lie in [0, pi) for the shared-cavity tuning")
    return -0.5 * kappa / math.cos(0.5 * phi_j), 0.5 * kappa * math.tan(0.5 * phi_j)


def two_qubit_chi_branches(phi_j: float, kappa: float) -> list[tuple[float, float]]:
    """Solve the shared-cavity phase equations for every sign choice of ``chi_+-``.

    Each equation ``theta = sgn(c) pi - 2 arctan(2 c / kappa)`` is inverted
    with an assumed sign ``s``: ``c = (kappa/2) tan((s pi - theta) / 2)``.
    """
    offset = -0.5 * (math.pi + phi_j)
    out = []
    for s_plus in (1, -1):
        for s_minus in (1, -1):
            c_plus = 0.5 * kappa * math.tan(0.5 * (s_plus * math.pi - offset))
            c_minus = 0.5 * kappa * math.tan(0.5 * (s_minus * math.pi - offset - phi_j))
            out.append((0.5 * (c_plus + c_minus), 0.5 * (c_plus - c_minus)))
    return out


def phase_expansion_kappa_int(s: int, chi: float, kappa: float, x: float) -> float:
    """Leading correction ``-4 (-1)^s chi kappa^3 x^2 / (kappa^2 + 4 chi^2)^2`` to ``theta_s``."""
    return -4.0 * (-1) ** s * chi * kappa**3 * x**2 / (kappa**2 + 4.0 * chi**2) ** 2


def reflectance_expansion_kappa_int(chi: float, kappa: float, x: float) -> float:
    """Stated first-order reflectance ``1 - 4 kappa^2 x / (kappa^2 + 4 chi^2)``."""
    return 1.0 - 4.0 * kappa**2 * x / (kappa**2 + 4.0 * chi**2)


# --- parameters and records ------------------------------------------------

def _per_qubit(value, n: int, name: str) -> np.ndarray | None:
    if value is None:
        return None
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
    if arr.shape != (n,):
        raise DomainError(f"{name} needs one entry per qubit")
    return arr


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol configuration.

    ``kappa``, ``chi`` and ``delta`` may be scalars or per-qubit sequences.
    When ``chi`` is omitted it is tuned from ``phi_j``; physical reflection
    coefficients then reproduce the ideal phases exactly (for
    ``kappa_int = 0``).  ``pulse_duration`` only feeds a validity warning.
    """

    n_pairs: int
    alpha: complex
    eta: float = 1.0
    encoding: str = "phase"
    kappa: object = 1.0
    kappa_int: float = 0.0
    chi: object = None
    delta: object = None
    T2_star: float | None = None
    seed: int = 0
    idealized: bool = False
    parity_error: float = 0.0
    correct: bool = True
    pulse_duration: float | None = None

    def __post_init__(self):
        if not 1 <= self.n_pairs <= MAX_SIMULATED_PAIRS:
            raise SizeError(f"simulation supports 1 <= N <= {MAX_SIMULATED_PAIRS}")
        if self.encoding not in ("phase", "cat"):
            raise EncodingError(f"unknown encoding {self.encoding!r}")
        if not 0.0 < self.eta <= 1.0:
            raise DomainError("eta must lie in (0, 1]")
        if not 0.0 <= self.parity_error <= 1.0:
            raise DomainError("parity error probability must lie in [0, 1]")
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "kappa", _per_qubit(self.kappa, self.n_pairs, "kappa"))
        object.__setattr__(self, "chi", _per_qubit(self.chi, self.n_pairs, "chi"))
        object.__setattr__(self, "delta", _per_qubit(self.delta, self.n_pairs, "delta"))
        if np.any(self.kappa <= 0):
            raise DomainError("cavity decay rates must be positive")
        if self.pulse_duration is not None and self.pulse_duration < 10.0 / float(np.min(self.kappa)):
            warnings.warn("pulse duration is not long compared with 1/kappa_min; the "
                          "single-frequency reflection model is not reliable", RuntimeWarning, stacklevel=2)

    @property
    def phi(self) -> float:
        return 2.0 * math.pi / 2**self.n_pairs

    @property
    def phi_j(self) -> np.ndarray:
        return 2.0 ** np.arange(self.n_pairs) * self.phi

    @property
    def chi_tuned(self) -> np.ndarray:
        if self.chi is not None:
            return self.chi
        return np.array([tune_chi(p, k) for p, k in zip(self.phi_j, self.kappa)])

    def qubit_factors(self, sign: int = 1) -> np.ndarray:
        """Light multiplier for qubit ``j`` in ``|1>`` relative to ``|0>``.

        With ``sign = -1`` the conjugate phase (Bob's convention) is returned.
        Built from ``R_1(0) / R_0(0)``; the ``|0>`` phase is absorbed into the
        phase reference of ``alpha``.
        """
        out = np.empty(self.n_pairs, dtype=complex)
        for j, (chi, kap) in enumerate(zip(self.chi_tuned, self.kappa)):
            r1 = reflection_coefficient(0.0, 1, chi, kap, self.kappa_int)
            r0 = reflection_coefficient(0.0, 0, chi, kap, self.kappa_int)
            ratio = r1 / r0
            out[j] = np.conj(ratio) if sign < 0 else ratio
        return out

    def register_factors(self, sign: int = 1) -> np.ndarray:
        """Light multiplier ``prod_j factor_j^{m_j}`` for every register value ``m``."""
        q = self.qubit_factors(sign)
        d = 2**self.n_pairs
        out = np.ones(d, dtype=complex)
        for m in range(d):
            for j in range(self.n_pairs):
                if (m >> j) & 1:
                    out[m] *= q[j]
        return out


@dataclass(frozen=True)
class RunRecord:
    shot: int
    heterodyne_k: int
    heterodyne_beta: complex
    parity_lambda: int | None
    z_outcomes: tuple[int, int] | None
    correction_applied: str
    bob_addition_k: int
    photons_lost: int | None
    fidelity_vs_target: float
    final_vector: np.ndarray = field(repr=False, compare=False)

    @property
    def final_state(self) -> QubitDensityMatrix:
        return QubitDensityMatrix.from_vector(self.final_vector)

    def to_json_dict(self) -> dict:
        """Serializable view with a fixed key order."""
        return {
            "shot": self.shot,
            "heterodyne_k": self.heterodyne_k,
            "heterodyne_beta_re": float(self.heterodyne_beta.real),
            "heterodyne_beta_im": float(self.heterodyne_beta.imag),
            "parity_lambda": self.parity_lambda,
            "z_outcomes": list(self.z_outcomes) if self.z_outcomes is not None else None,
            "correction_applied": self.correction_applied,
            "bob_addition_k": self.bob_addition_k,
            "photons_lost": self.photons_lost,
            "fidelity_vs_target": float(self.fidelity_vs_target),
        }


# --- entangling maps -------------------------------------------------------

def _register_phases(state: HybridState, params: ProtocolParams, bob: bool) -> np.ndarray:
    if state.n_pairs != params.n_pairs:
        raise DomainError("state and parameters disagree on the number of pairs")
    cat = params.encoding == "cat"
    if cat and not state.has_ancillas:
        raise EncodingError("cat encoding needs ancilla qubits in the hybrid state")
    d = 2**params.n_pairs
    reg = params.register_factors(-1 if bob else 1)
    shape = state.register_shape
    phases = np.ones(shape, dtype=complex)
    axis = 1 if bob else 0
    view = [1] * len(shape)
    view[axis] = d
    phases = phases * reg.reshape(view)
    if cat:
        anc_axis = 3 if bob else 2
        view = [1] * len(shape)
        view[anc_axis] = 2
        phases = phases * np.array([1.0, -1.0]).reshape(view)
    return phases


def entangle_alice(state: HybridState, params: ProtocolParams) -> HybridState:
    """``|m>|L> -> |m>|e^{i m phi} L>``, with an extra sign on Alice's ancilla in cat mode."""
    return state.rotate_labels(_register_phases(state, params, bob=False))


def entangle_bob(state: HybridState, params: ProtocolParams) -> HybridState:
    """``|n>|L> -> |n>|e^{-i n phi} L>``, with an extra sign on Bob's ancilla in cat mode."""
    return state.rotate_labels(_register_phases(state, params, bob=True))


# --- driver ----------------------------------------------------------------

@dataclass
class _Prepared:
    """Deterministic part of a run shared by all shots."""

    params: ProtocolParams
    loss_mode: str
    loss_point: str

    @cached_property
    def initial(self) -> HybridState:
        p = self.params
        return HybridState.initial(p.n_pairs, p.alpha, ancillas=p.encoding == "cat", idealized=p.idealized)

    @cached_property
    def branches(self) -> tuple[np.ndarray, list[HybridState]]:
        """Loss-branch probabilities and the corresponding normalized states after Bob."""
        p = self.params
        after_alice = entangle_alice(self.initial, p)
        if self.loss_mode == "none":
            return np.array([1.0]), [entangle_bob(after_alice, p)]
        if self.loss_mode == "single_photon":
            if self.loss_point == "transit":
                state = entangle_bob(after_alice.annihilate().normalized(), p)
            else:
                state = entangle_bob(after_alice, p).annihilate().normalized()
            return np.array([1.0]), [state]
        weights = loss_branch_weights(after_alice, p.eta)
        states = []
        for k, w in enumerate(weights):
            branch = kraus_on_labels(after_alice, k, p.eta)
            states.append(entangle_bob(branch.normalized(), p) if w > 1e-300 else None)
        return weights / weights.sum(), states

    @cached_property
    def adders(self) -> list[np.ndarray]:
        return [add_constant(k, self.params.n_pairs) for k in range(2**self.params.n_pairs)]

    @cached_property
    def correction(self) -> np.ndarray:
        return np.diag(phase_gate_r(1, self.params.n_pairs))

    @cached_property
    def reference_angle(self) -> float:
        p = self.params
        scale = math.sqrt(p.eta) if self.loss_mode == "full_channel" else 1.0
        return float(np.angle(p.alpha * scale)) if p.alpha != 0 else 0.0


def _run_shot(prep: _Prepared, shot: int, stream: RngStream) -> RunRecord:
    p = prep.params
    rng = stream.generator(shot)
    d = 2**p.n_pairs
    half = d // 2
    weights, states = prep.branches
    lost = None
    if prep.loss_mode == "full_channel":
        lost = int(rng.choice(weights.size, p=weights))
    elif prep.loss_mode == "single_photon":
        lost = 1
    else:
        lost = 0
    state = states[lost if prep.loss_mode == "full_channel" else 0]
    outcome: HeterodyneOutcome = sample_heterodyne_state(state, rng, prep.reference_angle)
    vec, _ = project_light_vector(state, outcome.beta)
    k = (-outcome.decoded_k) % d
    lam = None
    z = None
    correction = "none"
    k_bob = k
    if p.encoding == "cat":
        flipped = vec[:, :, ::-1, ::-1]
        plus = 0.5 * (vec + flipped)
        p_plus = float(np.sum(np.abs(plus) ** 2))
        true_lam = 1 if rng.random() < p_plus else -1
        vec = plus if true_lam == 1 else 0.5 * (vec - flipped)
        vec = vec / np.linalg.norm(vec)
        lam = true_lam
        if p.parity_error > 0 and rng.random() < p.parity_error:
            lam = -true_lam
        if lam == -1 and p.correct:
            vec = vec * prep.correction[:, None, None, None]
            correction = "R_on_Alice"
        probs = np.sum(np.abs(vec) ** 2, axis=(0, 1)).ravel()
        idx = int(rng.choice(4, p=probs / probs.sum()))
        s_a, s_b = divmod(idx, 2)
        z = (s_a, s_b)
        vec = vec[:, :, s_a, s_b]
        vec = vec / np.linalg.norm(vec)
        k_bob = (k + (s_a ^ s_b) * half) % d
    vec = (prep.adders[k_bob] @ vec.T).T
    fid = float(np.clip(abs(np.vdot(bell_target(p.n_pairs).ravel(), vec.ravel())) ** 2, 0.0, 1.0))
    return RunRecord(shot, k, outcome.beta, lam, z, correction, k_bob, lost, fid, vec.ravel())


def run_protocol(params: ProtocolParams, loss_mode: str, shots: int, stream_id: int = 0,
                 workers: int | None = None, loss_point: str = "transit") -> list[RunRecord]:
    """Simulate ``shots`` independent runs; records come back in shot order.

    Every shot draws from its own generator derived from ``(seed, stream_id, shot)``,
    so the output does not depend on ``workers``.  ``loss_point`` selects where
    the single lost photon is removed: ``"transit"`` (between Alice and Bob) or
    ``"before_detection"`` (after Bob).
    """
    if loss_mode not in LOSS_MODES:
        raise DomainError(f"loss mode must be one of {LOSS_MODES}")
    if loss_point not in ("transit", "before_detection"):
        raise DomainError("loss point must be 'transit' or 'before_detection'")
    if shots < 1:
        raise DomainError("need at least one shot")
    prep = _Prepared(params, loss_mode, loss_point)
    _ = prep.branches, prep.adders, prep.correction
    stream = RngStream(params.seed, stream_id)
    if workers is None or workers <= 1:
        return [_run_shot(prep, i, stream) for i in range(shots)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: _run_shot(prep, i, stream), range(shots)))


def uncorrected_loss_fidelity(n_pairs: int, k: int = 0) -> float:
    """``|<Psi_k| R_A^dag |Psi_k>|^2`` by explicit matrix algebra."""
    psi = shifted_bell_state(n_pairs, k)
    r_dag = phase_gate_r(1, n_pairs).conj().T
    return float(abs(np.vdot(psi.ravel(), (r_dag @ psi).ravel())) ** 2)
