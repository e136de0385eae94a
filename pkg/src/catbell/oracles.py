"""Brute-force Fock-space oracle for the cat-qudit loss channel.

Nothing here reuses the closed forms of :mod:`catbell.loss`: coherent states
are expanded in the Fock basis, cats are built and normalized numerically,
and the channel is applied Kraus operator by Kraus operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .loss import kraus_operator_fock
from .optics import coherent_to_fock, default_cutoff

__all__ = ["FockChannelOracle", "fock_channel_oracle"]


def _coherent(amplitude: complex, cutoff: int) -> np.ndarray:
    return coherent_to_fock(amplitude, cutoff).amplitudes


def _cat(amplitude: complex, parity: int, cutoff: int) -> np.ndarray:
    v = _coherent(amplitude, cutoff) + parity * _coherent(-amplitude, cutoff)
    return v / np.linalg.norm(v)


@dataclass
class FockChannelOracle:
    """Channel action on Alice's cat-qudit state, evaluated in a truncated Fock space."""

    n_pairs: int
    alpha: float
    eta: float
    cutoff: int

    def __post_init__(self):
        d = 2**self.n_pairs
        self.phi = 2.0 * np.pi / d
        # Alice's state: phi_A[m, s, :] with all qubits in |+>
        amp = 1.0 / math.sqrt(2 * d)
        self.phi_a = np.zeros((d, 2, self.cutoff + 1), dtype=complex)
        for m in range(d):
            for s in (0, 1):
                self.phi_a[m, s] = amp * _coherent((-1) ** s * np.exp(1j * m * self.phi) * self.alpha, self.cutoff)
        self.kraus = [kraus_operator_fock(k, self.eta, self.cutoff) for k in range(self.cutoff + 1)]
        self.branches = [self.phi_a @ mk.T for mk in self.kraus]

    def _sigma_basis(self, v: np.ndarray) -> np.ndarray:
        """Rotate the ancilla axis (axis 1) from Z to X eigenstates (index 0: +, 1: -)."""
        return np.stack([(v[:, 0] + v[:, 1]) / math.sqrt(2), (v[:, 0] - v[:, 1]) / math.sqrt(2)], axis=1)

    def block_coefficients(self, lam: int) -> tuple[np.ndarray, float]:
        """Scalars ``X[m, s, m', s'] = p^lam_{ss'} Omega^lam_{mm'} / 2^N`` and the rank-one residual.

        The channel output restricted to ancilla X states ``s, s'`` and
        registers ``m, m'`` is projected onto the attenuated cat
        ``C^{lam s}`` at angle ``m phi``; the residual measures what that
        projection misses.
        """
        d = 2**self.n_pairs
        cats = np.zeros((d, 2, self.cutoff + 1), dtype=complex)
        for m in range(d):
            for si, s in enumerate((1, -1)):
                cats[m, si] = _cat(math.sqrt(self.eta) * self.alpha * np.exp(1j * m * self.phi), lam * s, self.cutoff)
        x = np.zeros((d, 2, d, 2), dtype=complex)
        full = np.zeros((d, 2, self.cutoff + 1, d, 2, self.cutoff + 1), dtype=complex)
        parity = 0 if lam == 1 else 1
        for k in range(parity, self.cutoff + 1, 2):
            v = self._sigma_basis(self.branches[k])
            full += np.einsum("msf,ntg->msfntg", v, v.conj())
            c = np.einsum("msf,msf->ms", cats.conj(), v)
            x += np.einsum("ms,nt->msnt", c, c.conj())
        model = np.einsum("msnt,msf,ntg->msfntg", x, cats, cats.conj())
        residual = float(np.max(np.abs(full - model)))
        return x, residual

    def tables(self) -> dict:
        """Numerically extracted ``p^lam_{ss'}`` and ``Omega^lam_{mm'}`` (index 0 is ``+``)."""
        d = 2**self.n_pairs
        p = np.zeros((2, 2, 2))
        omega = np.zeros((2, d, d), dtype=complex)
        residual = 0.0
        for li, lam in enumerate((1, -1)):
            x, res = self.block_coefficients(lam)
            residual = max(residual, res)
            p[li] = np.real(d * x[0, :, 0, :])
            ref = x[0, 0, 0, 0]
            omega[li] = x[:, 0, :, 0] / ref if abs(ref) > 0 else np.nan
        return {"p": p, "omega": omega, "residual": residual}

    def post_measurement_state(self, k: int, lam: int, mu: int) -> np.ndarray:
        """Normalized ``rho^{lam,mu}_k`` on Alice's and Bob's registers.

        Bob's rotation is applied as a Fock-diagonal phase, the ancillas are
        projected on ``XX = lam`` and then on ``Z`` outcomes ``(0, mu)``.  The
        light is read out in the idealized basis: it is expanded in the cats
        ``C^{+-}`` at the angles ``d phi`` (``d < 2^{N-1}``), those are taken as
        orthonormal, and outcome ``w = -k`` is ``(C^+ +- C^-) / sqrt 2``.
        """
        d = 2**self.n_pairs
        half = d // 2
        f = np.arange(self.cutoff + 1)
        gamma = math.sqrt(self.eta) * self.alpha
        basis = np.zeros((self.cutoff + 1, 2 * half), dtype=complex)
        for j in range(half):
            basis[:, 2 * j] = _cat(gamma * np.exp(1j * j * self.phi), 1, self.cutoff)
            basis[:, 2 * j + 1] = _cat(gamma * np.exp(1j * j * self.phi), -1, self.cutoff)
        w = (-k) % d
        j, sign = w % half, (1 if w < half else -1)
        readout = np.zeros(2 * half, dtype=complex)
        readout[2 * j] = 1 / math.sqrt(2)
        readout[2 * j + 1] = sign / math.sqrt(2)
        pinv = np.linalg.pinv(basis)
        xx = np.fliplr(np.eye(4))  # X (x) X on |s_A s_B>, index 2 s_A + s_B
        proj = 0.5 * (np.eye(4) + lam * xx)
        z_out = np.zeros(4)
        z_out[2 * 0 + mu] = 1.0
        rho = np.zeros((d * d, d * d), dtype=complex)
        bob_amp = 1.0 / math.sqrt(2 * d)
        for vk in self.branches:
            # joint[m, n, sA, sB, fock]
            joint = np.zeros((d, d, 2, 2, self.cutoff + 1), dtype=complex)
            for n in range(d):
                for sb in (0, 1):
                    theta = n * self.phi + sb * np.pi
                    joint[:, n, :, sb, :] = bob_amp * vk * np.exp(-1j * theta * f)
            anc = joint.reshape(d, d, 4, -1)
            anc = np.einsum("ab,mnbf->mnaf", proj, anc)
            anc = np.einsum("a,mnaf->mnf", z_out, anc)
            coeffs = anc @ pinv.T
            v = (coeffs @ readout.conj()).ravel()
            rho += np.outer(v, v.conj())
        return rho / np.trace(rho).real


def fock_channel_oracle(n_pairs: int, alpha: float, eta: float, cutoff: int | None = None) -> FockChannelOracle:
    if cutoff is None:
        cutoff = max(40, default_cutoff(alpha * alpha))
    return FockChannelOracle(n_pairs, alpha, eta, cutoff)
