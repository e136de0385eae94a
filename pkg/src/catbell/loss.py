"""Amplitude-damping channel: Kraus operators, parity-resolved tables and branch states.

Everything in :class:`LossChannelTables` assumes a real, positive cat
amplitude ``alpha``; the loss acts only on the light travelling from Alice to
Bob.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TruncationError
from .numerics import binomial_loss_pmf
from .optics import cat_normalization
from .registers import HybridState, QubitDensityMatrix, phase_gate_r

__all__ = [
    "kraus_operator_fock",
    "kraus_completeness_defect",
    "kraus_on_labels",
    "loss_branch_weights",
    "dephasing_factor_phase",
    "LossChannelTables",
    "parity_channel_tables",
    "branch_state_vectors",
    "post_measurement_state",
    "ideal_branch_target",
]


def kraus_operator_fock(k: int, eta: float, cutoff: int) -> np.ndarray:
    """Matrix of the ``k``-photon loss operator ``M_k`` on ``{|0>, ..., |cutoff>}``.

    ``M_k |n> = sqrt(C(n, k) eta^{n-k} (1-eta)^k) |n - k>``.
    """
    if not 0 <= k <= cutoff:
        raise TruncationError(f"cannot remove {k} photons with cutoff {cutoff}")
    if not 0.0 <= eta <= 1.0:
        raise DomainError("eta must lie in [0, 1]")
    out = np.zeros((cutoff + 1, cutoff + 1))
    for n in range(k, cutoff + 1):
        out[n - k, n] = math.sqrt(binomial_loss_pmf(n, k, eta))
    return out


def kraus_completeness_defect(eta: float, cutoff: int) -> float:
    """``max |sum_k M_k^dag M_k - I|`` on the truncated space."""
    acc = np.zeros((cutoff + 1, cutoff + 1))
    for k in range(cutoff + 1):
        m = kraus_operator_fock(k, eta, cutoff)
        acc += m.T @ m
    return float(np.max(np.abs(acc - np.eye(cutoff + 1))))


def kraus_on_labels(state: HybridState, k: int, eta: float) -> HybridState:
    """Unnormalized branch ``M_k |state>``, using ``M_k|L> = c_k(L) |sqrt(eta) L>``.

    ``c_k(L) = sqrt((1-eta)^k / k!) L^k exp(-(1-eta)|L|^2 / 2)``.
    """
    if k < 0:
        raise DomainError("photon count must be non-negative")
    if not 0.0 < eta <= 1.0:
        raise DomainError("eta must lie in (0, 1]")
    L = state.labels
    if eta == 1.0:
        coeff = np.full(L.shape, 1.0 if k == 0 else 0.0, dtype=complex)
    else:
        log_mag = 0.5 * k * math.log1p(-eta) - 0.5 * math.lgamma(k + 1) - 0.5 * (1 - eta) * np.abs(L) ** 2
        with np.errstate(divide="ignore"):
            log_mag = log_mag + k * np.log(np.abs(L))
        coeff = np.exp(log_mag) * np.exp(1j * k * np.angle(L))
    return state.map_labels(coeff, math.sqrt(eta) * L)


def loss_branch_weights(state: HybridState, eta: float, tail: float = 1e-13, k_max: int | None = None):
    """Probabilities ``||M_k psi||^2`` for ``k = 0, 1, ...`` until the remaining mass is below ``tail``."""
    mean = (1 - eta) * float(np.max(np.abs(state.labels)) ** 2)
    if k_max is None:
        k_max = int(math.ceil(mean + 12.0 * math.sqrt(mean + 1.0) + 20))
    weights = []
    total = 0.0
    for k in range(k_max + 1):
        w = kraus_on_labels(state, k, eta).norm2()
        weights.append(w)
        total += w
        if 1.0 - total < tail and k > mean:
            break
    return np.array(weights)


def dephasing_factor_phase(n_ell: float, dm: int, phi: float) -> complex:
    """``exp(i n_l sin(dm phi) - 2 n_l sin^2(dm phi / 2))``."""
    if n_ell < 0:
        raise DomainError("n_ell must be non-negative")
    x = dm * phi
    return complex(np.exp(1j * n_ell * math.sin(x) - 2.0 * n_ell * math.sin(0.5 * x) ** 2))


def _log_cosh(x: float) -> float:
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def _log_sinh(x: float) -> float:
    return x + math.log(-math.expm1(-2.0 * x)) - math.log(2.0)


@dataclass(frozen=True)
class LossChannelTables:
    """Parity-resolved coefficients of the loss channel acting on the cat-qudit state.

    ``p_lambda_sigma[l, s, t]`` stores ``p^lambda_{sigma sigma'}`` with index
    0 for ``+`` and 1 for ``-`` on every axis.
    """

    alpha: float
    eta: float
    n_ell: float
    J_plus: float
    J_minus: float
    K_plus: float
    K_minus: float
    D_plus: float
    D_minus: float
    p_lambda_sigma: np.ndarray
    n_pairs: int | None = None

    def p(self, lam: int, sigma: int, sigma_p: int) -> float:
        return float(self.p_lambda_sigma[_sign_index(lam), _sign_index(sigma), _sign_index(sigma_p)])

    def branch_probability(self, lam: int) -> float:
        """``p^lambda = sum_sigma p^lambda_{sigma sigma}``."""
        i = _sign_index(lam)
        return float(self.p_lambda_sigma[i, 0, 0] + self.p_lambda_sigma[i, 1, 1])

    def omega(self, lam: int, dm, n_pairs: int | None = None):
        """``Omega^lambda`` for register difference ``dm`` (vectorized over ``dm``)."""
        n_pairs = self.n_pairs if n_pairs is None else n_pairs
        if n_pairs is None:
            raise DomainError("number of pairs needed to fix the phase increment")
        phi = 2.0 * np.pi / 2**n_pairs
        z = self.n_ell * np.exp(1j * phi * np.asarray(dm))
        n = self.n_ell
        if lam == 1:
            if n < 20.0:
                return np.cosh(z) / math.cosh(n)
            return (np.exp(z - n) + np.exp(-z - n)) / (1.0 + math.exp(-2.0 * n))
        if lam == -1:
            if n == 0.0:
                return np.exp(1j * phi * np.asarray(dm))
            if n < 20.0:
                return np.sinh(z) / math.sinh(n)
            return (np.exp(z - n) - np.exp(-z - n)) / (1.0 - math.exp(-2.0 * n))
        raise DomainError("lambda must be +1 or -1")

    def omega_matrix(self, lam: int, n_pairs: int | None = None) -> np.ndarray:
        n_pairs = self.n_pairs if n_pairs is None else n_pairs
        d = 2**n_pairs
        m = np.arange(d)
        return self.omega(lam, m[:, None] - m[None, :], n_pairs)


def _sign_index(s: int) -> int:
    if s == 1:
        return 0
    if s == -1:
        return 1
    raise DomainError("sign labels must be +1 or -1")


def parity_channel_tables(alpha: float, eta: float, n_pairs: int | None = None) -> LossChannelTables:
    """Tables for the cat-qudit state with amplitude ``alpha`` and transmission ``eta``."""
    if not (np.isreal(alpha) and float(np.real(alpha)) > 0):
        raise DomainError("alpha must be real and positive")
    alpha = float(np.real(alpha))
    if not 0.0 < eta <= 1.0:
        raise DomainError("eta must lie in (0, 1]")
    x = alpha * alpha
    n_ell = (1.0 - eta) * x
    ex = eta * x
    log_j = {1: _log_cosh(ex) - _log_cosh(x), -1: _log_sinh(ex) - _log_sinh(x)}
    log_k = {1: (_log_sinh(ex) if ex > 0 else -np.inf) - _log_cosh(x), -1: _log_cosh(ex) - _log_sinh(x)}
    log_cn = _log_cosh(n_ell)
    log_sn = _log_sinh(n_ell) if n_ell > 0 else -np.inf
    p = np.zeros((2, 2, 2))
    for s in (1, -1):
        for t in (1, -1):
            norm = cat_normalization(x, s) * cat_normalization(x, t) / 4.0
            p[0, _sign_index(s), _sign_index(t)] = norm * math.exp(0.5 * (log_j[s] + log_j[t]) + log_cn)
            if n_ell > 0:
                p[1, _sign_index(s), _sign_index(t)] = norm * math.exp(0.5 * (log_k[s] + log_k[t]) + log_sn)
    e = math.exp(-2.0 * ex)
    d_plus = 0.5 * (math.sqrt(1.0 + e) + math.sqrt(1.0 - e))
    d_minus = 0.5 * (math.sqrt(1.0 + e) - math.sqrt(1.0 - e))
    return LossChannelTables(
        alpha=alpha,
        eta=eta,
        n_ell=n_ell,
        J_plus=math.exp(log_j[1]),
        J_minus=math.exp(log_j[-1]),
        K_plus=math.exp(log_k[1]),
        K_minus=math.exp(log_k[-1]),
        D_plus=d_plus,
        D_minus=d_minus,
        p_lambda_sigma=p,
        n_pairs=n_pairs,
    )


def branch_state_vectors(tables: LossChannelTables, n_pairs: int, k: int, lam: int, mu: int,
                         second_sign: int | None = None) -> np.ndarray:
    """Vectors ``Psi^{lambda,mu}_{m,k}`` stacked as ``out[m, a, b]``.

    ``Psi_m = D^{(-)^mu} |m, m+k> + s D^{(-)^{mu+1}} |m, m+k+2^{N-1}>``.

    The brute-force Fock evaluation of the channel fixes ``s = +1`` in both
    parity branches; ``second_sign=-1`` is accepted so the alternative sign
    convention can be compared against it.
    """
    if mu not in (0, 1):
        raise DomainError("mu must be 0 or 1")
    d = 2**n_pairs
    half = d // 2
    s = 1 if second_sign is None else second_sign
    first, second = (tables.D_plus, tables.D_minus) if mu == 0 else (tables.D_minus, tables.D_plus)
    out = np.zeros((d, d, d), dtype=complex)
    m = np.arange(d)
    out[m, m, (m + k) % d] += first
    out[m, m, (m + k + half) % d] += s * second
    return out


def post_measurement_state(tables: LossChannelTables, n_pairs: int, k: int, lam: int, mu: int,
                           second_sign: int | None = None) -> QubitDensityMatrix:
    """``rho^{lambda,mu}_k = 2^{-N} sum_{m,m'} Omega^lambda_{mm'} |Psi_m><Psi_m'|`` on ``2N`` qubits."""
    if tables.n_pairs not in (None, n_pairs):
        raise DomainError("tables were built for a different number of pairs")
    psi = branch_state_vectors(tables, n_pairs, k, lam, mu, second_sign).reshape(2**n_pairs, -1)
    omega = tables.omega_matrix(lam, n_pairs)
    rho = psi.T @ omega @ psi.conj() / 2**n_pairs
    rho = 0.5 * (rho + rho.conj().T)
    return QubitDensityMatrix(2 * n_pairs, rho)


def ideal_branch_target(n_pairs: int, k: int, lam: int) -> np.ndarray:
    """``|Psi_k>`` for ``lambda = +1`` and ``R_A^dag |Psi_k>`` for ``lambda = -1`` (flattened)."""
    from .registers import shifted_bell_state

    psi = shifted_bell_state(n_pairs, k)
    if lam == -1:
        psi = phase_gate_r(1, n_pairs).conj().T @ psi
    return psi.ravel()
