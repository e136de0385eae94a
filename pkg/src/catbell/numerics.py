"""Scalar special functions, loss-count distributions and seeded random streams."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "erfc",
    "lambert_w0",
    "binomial_loss_pmf",
    "poisson_pmf",
    "RngStream",
]

_INV_E = math.exp(-1.0)


def erfc(x):
    """Complementary error function for scalars or arrays.

    Backed by the Cephes implementation in :mod:`scipy.special`, which is
    accurate to a few ulp over the whole real line.
    """
    out = special.erfc(x)
    return float(out) if np.ndim(out) == 0 else out


def _w0_initial_guess(x: float) -> float:
    if x < -0.32:
        # series about the branch point x = -1/e
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    if x < 3.0:
        return math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
    l1 = math.log(x)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def _lambert_w0_scalar(x: float, tol: float = 1e-16, max_iter: int = 64) -> float:
    x = float(x)
    if math.isnan(x):
        return math.nan
    if x < -_INV_E:
        # allow the rounding of -1/e itself
        if x < -_INV_E * (1.0 + 4 * np.finfo(float).eps):
            raise DomainError(f"lambert_w0 requires x >= -1/e, got {x!r}")
        return -1.0
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    w = _w0_initial_guess(x)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        # Halley step
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= tol * (1.0 + abs(w)):
            break
    return w


def lambert_w0(x):
    """Principal branch W0 of the Lambert-W function.

    Solves ``w * exp(w) = x`` for ``x >= -1/e`` by Halley iteration. The
    starting point is the branch-point series ``-1 + p - p^2/3 + 11 p^3/72``
    with ``p = sqrt(2(e x + 1))`` for ``x < -0.32``, a damped ``log1p`` for
    moderate arguments and ``L1 - L2 + L2/L1`` (``L1 = ln x``, ``L2 = ln L1``)
    for ``x >= 3``.

    Raises
    ------
    DomainError
        If any ``x < -1/e``.
    """
    if np.ndim(x) == 0:
        return _lambert_w0_scalar(x)
    arr = np.asarray(x, dtype=float)
    return np.vectorize(_lambert_w0_scalar, otypes=[float])(arr)


def binomial_loss_pmf(n: int, n_lost: int, eta: float) -> float:
    """Probability of losing ``n_lost`` of ``n`` photons, each kept with prob ``eta``.

    Evaluated in log space so large ``n`` does not overflow.
    """
    if n < 0 or n_lost < 0 or n_lost > n:
        raise DomainError(f"need 0 <= n_lost <= n, got n={n}, n_lost={n_lost}")
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    kept = n - n_lost
    if eta == 1.0:
        return 1.0 if n_lost == 0 else 0.0
    if eta == 0.0:
        return 1.0 if kept == 0 else 0.0
    log_p = (
        math.lgamma(n + 1)
        - math.lgamma(n_lost + 1)
        - math.lgamma(kept + 1)
        + kept * math.log(eta)
        + n_lost * math.log1p(-eta)
    )
    return math.exp(log_p)


def poisson_pmf(n_ell: float, n_lost: int) -> float:
    """Poisson probability of ``n_lost`` losses with mean ``n_ell``."""
    if n_ell < 0:
        raise DomainError(f"Poisson mean must be non-negative, got {n_ell}")
    if n_lost < 0:
        return 0.0
    if n_ell == 0.0:
        return 1.0 if n_lost == 0 else 0.0
    return math.exp(n_lost * math.log(n_ell) - n_ell - math.lgamma(n_lost + 1))


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream addressed by ``(seed, stream_id)``.

    Streams with the same key produce identical sequences; distinct
    ``stream_id`` values map to statistically independent children of the
    same :class:`numpy.random.SeedSequence`.
    """

    seed: int
    stream_id: int = 0

    def generator(self, *substream: int) -> np.random.Generator:
        """Generator for this stream, optionally for a nested sub-stream (e.g. a shot index)."""
        key = (self.stream_id, *substream)
        if any(k < 0 for k in key):
            raise DomainError("stream identifiers must be non-negative")
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))
