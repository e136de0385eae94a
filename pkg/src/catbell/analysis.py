"""Closed-form fidelities, error budgets, photon-number optimization and dephasing.

Notation used throughout: ``N`` pairs, ``phi = 2 pi / 2^N``, transmission
``eta``, mean photon number ``n = |alpha|^2`` and mean lost photon number
``n_l = (1 - eta) n``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DomainError, RegimeError, SizeError
from .measurement import p_measurement_error
from .numerics import lambert_w0

__all__ = [
    "ENCODINGS",
    "FidelityReport",
    "fidelity_loss",
    "fidelity_cat_branch",
    "fidelity_cat_branch_double_sum",
    "fidelity_cat_parity_averaged",
    "total_error",
    "optimize_n_numeric",
    "lambda_regime",
    "closed_form_n",
    "closed_form_residual",
    "epsilon_tilde",
    "epsilon_tilde_asymptotic",
    "lambda_for_error",
    "eta_from_lambda",
    "table_required_eta",
    "table_required_eta_numeric",
    "DephasingParams",
    "dephasing_fidelity",
    "dephasing_monte_carlo",
    "dephasing_phase_shift",
    "dephasing_phase_shift_exact",
    "dephasing_regime",
    "double_sum_direct",
    "double_sum_reduced",
    "subset_sum_direct",
    "subset_sum_reduced",
]

ENCODINGS = ("phase", "cat")


def _check_encoding(encoding: str) -> None:
    if encoding not in ENCODINGS:
        raise DomainError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")


def _phi(n_pairs: int) -> float:
    if n_pairs < 1:
        raise SizeError("need at least one pair")
    return 2.0 * math.pi / 2**n_pairs


def _cosh_ratio(a, b: float):
    """``cosh(a) / cosh(b)`` for real ``a`` and ``b >= 0`` without overflow."""
    a = np.abs(np.asarray(a, dtype=float))
    return np.exp(a - b) * (1.0 + np.exp(-2.0 * a)) / (1.0 + math.exp(-2.0 * b))


def _f_phase(n_ell: float, angle: np.ndarray) -> np.ndarray:
    return np.exp(-2.0 * n_ell * np.sin(0.5 * angle) ** 2) * np.cos(n_ell * np.sin(angle))


def _f_cat(n_ell: float, angle: np.ndarray) -> np.ndarray:
    return np.cos(n_ell * np.sin(angle)) * _cosh_ratio(n_ell * np.cos(angle), n_ell)


def _j_sum(n_pairs: int, values: np.ndarray) -> float:
    """``4^{-N} [2^N + sum_{j >= 1} (2^N - j) values_j]`` for ``values`` indexed by ``j = 1 .. 2^N - 1``."""
    d = 2**n_pairs
    j = np.arange(1, d)
    return float((d + np.sum((d - j) * values)) / d**2)


def fidelity_loss(encoding: str, n_pairs: int, n_ell: float) -> float:
    """Loss-limited fidelity ``F_zeta(n_l)`` (cat: conditioned on ``XX = +1``, ``(D^+)^2 = 1``)."""
    _check_encoding(encoding)
    if n_ell < 0:
        raise DomainError("n_ell must be non-negative")
    angle = np.arange(1, 2**n_pairs) * _phi(n_pairs)
    f = _f_phase(n_ell, angle) if encoding == "phase" else _f_cat(n_ell, angle)
    return float(np.clip(_j_sum(n_pairs, 2.0 * f), 0.0, 1.0))


def _d_plus_sq(transmitted_photons: float | None) -> float:
    if transmitted_photons is None or math.isinf(transmitted_photons):
        return 1.0
    return 0.5 * (1.0 + math.sqrt(-math.expm1(-4.0 * transmitted_photons)))


def _sinh_ratio_complex(z: np.ndarray, n: float) -> np.ndarray:
    """``sinh(z) / sinh(n)`` with ``|Re z| <= n``."""
    if n == 0.0:
        raise DomainError("ratio undefined at n = 0")
    if n < 20.0:
        return np.sinh(z) / math.sinh(n)
    return (np.exp(z - n) - np.exp(-z - n)) / (1.0 - math.exp(-2.0 * n))


def fidelity_cat_branch(n_pairs: int, n_ell: float, branch: str,
                        transmitted_photons: float | None = None) -> float:
    """Conditional cat fidelity for ``branch`` in ``{"XXplus", "XXminus"}``.

    ``transmitted_photons = eta |alpha|^2`` sets the prefactor ``(D^+)^2``;
    leaving it out uses the large-amplitude value 1.
    """
    if n_ell < 0:
        raise DomainError("n_ell must be non-negative")
    phi = _phi(n_pairs)
    angle = np.arange(1, 2**n_pairs) * phi
    if branch == "XXplus":
        f = 2.0 * _f_cat(n_ell, angle)
    elif branch == "XXminus":
        if n_ell == 0.0:
            f = np.full(angle.shape, 2.0)
        else:
            # sum over sigma of sgn(sigma) e^{sigma n cos} cos(n sin - sigma j phi) / sinh n
            c, s = np.cos(angle), np.sin(angle)
            if n_ell < 20.0:
                f = (np.exp(n_ell * c) * np.cos(n_ell * s - angle)
                     - np.exp(-n_ell * c) * np.cos(n_ell * s + angle)) / math.sinh(n_ell)
            else:
                scale = 2.0 / (1.0 - math.exp(-2.0 * n_ell))
                f = scale * (np.exp(n_ell * (c - 1)) * np.cos(n_ell * s - angle)
                             - np.exp(-n_ell * (c + 1)) * np.cos(n_ell * s + angle))
    else:
        raise DomainError("branch must be 'XXplus' or 'XXminus'")
    return float(np.clip(_d_plus_sq(transmitted_photons) * _j_sum(n_pairs, f), 0.0, 1.0))


def fidelity_cat_branch_double_sum(n_pairs: int, n_ell: float, branch: str,
                                   transmitted_photons: float | None = None) -> float:
    """Same quantity as :func:`fidelity_cat_branch`, summed over all ``(m, m')`` pairs."""
    d = 2**n_pairs
    phi = _phi(n_pairs)
    m = np.arange(d)
    dm = m[:, None] - m[None, :]
    z = n_ell * np.exp(1j * phi * dm)
    if branch == "XXplus":
        if n_ell < 20.0:
            omega = np.cosh(z) / math.cosh(n_ell)
        else:
            omega = (np.exp(z - n_ell) + np.exp(-z - n_ell)) / (1.0 + math.exp(-2.0 * n_ell))
        total = omega.sum()
    elif branch == "XXminus":
        omega = np.exp(1j * phi * dm) if n_ell == 0.0 else _sinh_ratio_complex(z, n_ell)
        total = (np.exp(-1j * phi * dm) * omega).sum()
    else:
        raise DomainError("branch must be 'XXplus' or 'XXminus'")
    return float(_d_plus_sq(transmitted_photons) * total.real / d**2)


def fidelity_cat_parity_averaged(n_pairs: int, alpha2: float, eta: float) -> dict:
    """Branch fidelities, their probabilities ``p^lambda`` and the weighted average."""
    from .loss import parity_channel_tables

    tables = parity_channel_tables(math.sqrt(alpha2), eta, n_pairs)
    n_ell = (1.0 - eta) * alpha2
    fp = fidelity_cat_branch(n_pairs, n_ell, "XXplus", eta * alpha2)
    fm = fidelity_cat_branch(n_pairs, n_ell, "XXminus", eta * alpha2)
    pp, pm = tables.branch_probability(1), tables.branch_probability(-1)
    return {"F_plus": fp, "F_minus": fm, "p_plus": pp, "p_minus": pm, "F_average": pp * fp + pm * fm}


@dataclass(frozen=True)
class FidelityReport:
    encoding: str
    N: int
    eta: float
    n: float
    n_ell: float
    F: float
    p_m: float
    epsilon: float
    branch: str | None = None


def total_error(encoding: str, n_pairs: int, eta: float, n: float) -> FidelityReport:
    """``epsilon = 1 - (1 - p_m) F`` at mean photon number ``n``."""
    _check_encoding(encoding)
    if not 0.0 < eta <= 1.0:
        raise DomainError("eta must lie in (0, 1]")
    if n <= 0:
        raise DomainError("mean photon number must be positive")
    n_ell = (1.0 - eta) * n
    f = fidelity_loss(encoding, n_pairs, n_ell)
    pm = min(1.0, p_measurement_error(n_pairs, eta, n))
    eps = 1.0 - (1.0 - pm) * f
    return FidelityReport(encoding, n_pairs, eta, n, n_ell, f, pm, eps, "XXplus" if encoding == "cat" else None)


def lambda_regime(n_pairs: int, eta: float) -> float:
    """``Lambda_{N, eta} = (1 - eta) / (eta sin^2(pi / 2^N))``."""
    if not 0.0 < eta <= 1.0:
        raise DomainError("eta must lie in (0, 1]")
    return (1.0 - eta) / (eta * math.sin(math.pi / 2**n_pairs) ** 2)


def optimize_n_numeric(encoding: str, n_pairs: int, eta: float, rtol: float = 1e-7) -> tuple[float, float]:
    """Minimize the total error over ``n``; returns ``(n_opt, epsilon_opt)``.

    A logarithmic grid scan brackets the minimum, then a bounded Brent search
    in ``ln n`` refines it.
    """
    _check_encoding(encoding)
    if not 0.0 < eta < 1.0:
        raise ConvergenceError("the total error has no finite minimizer unless 0 < eta < 1")
    if lambda_regime(n_pairs, eta) >= 1.0:
        warnings.warn("Lambda >= 1: outside the regime where the closed forms apply", RuntimeWarning, stacklevel=2)

    def objective(log_n: float) -> float:
        return total_error(encoding, n_pairs, eta, math.exp(log_n)).epsilon

    hi = math.log(max(100.0, 40.0 / (1.0 - eta)) * 4**n_pairs)
    grid = np.linspace(math.log(1e-3), hi, 600)
    values = np.array([objective(x) for x in grid])
    i = int(np.argmin(values))
    if i == 0 or i == grid.size - 1:
        raise ConvergenceError("minimum of the total error lies on the scan boundary")
    res = optimize.minimize_scalar(objective, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                   options={"xatol": rtol})
    if not res.success:
        raise ConvergenceError(f"scalar minimization failed: {res.message}")
    n_opt = math.exp(res.x)
    return n_opt, float(res.fun)


def closed_form_n(encoding: str, n_pairs: int, eta: float) -> float:
    """Lambert-W approximation of the optimal mean photon number."""
    _check_encoding(encoding)
    lam = lambda_regime(n_pairs, eta)
    if lam >= 1.0:
        raise RegimeError(f"Lambda = {lam:.4g} >= 1: closed form not applicable")
    if lam == 0.0:
        raise DomainError("closed form diverges for a lossless channel")
    if encoding == "phase":
        return 0.5 * lam / (1.0 - eta) * float(lambert_w0(2.0 / (math.pi * lam**2)))
    arg = (2.0 / 3.0) * (1.0 / (math.sqrt(math.pi) * lam**2)) ** (2.0 / 3.0)
    return 1.5 * lam / (1.0 - eta) * float(lambert_w0(arg))


def closed_form_residual(encoding: str, n_pairs: int, eta: float) -> float:
    """Relative residual of the stationarity equation solved by :func:`closed_form_n`.

    Phase: ``e^{-x} / sqrt(pi x) = Lambda``; cat: ``e^{-x} / sqrt(pi x) = Lambda^2 x``,
    with ``x = eta n sin^2(pi / 2^N)``.
    """
    lam = lambda_regime(n_pairs, eta)
    x = eta * closed_form_n(encoding, n_pairs, eta) * math.sin(math.pi / 2**n_pairs) ** 2
    lhs = math.exp(-x) / math.sqrt(math.pi * x)
    rhs = lam if encoding == "phase" else lam**2 * x
    return abs(lhs - rhs) / rhs


def epsilon_tilde(encoding: str, y: float) -> float:
    """Approximate optimal total error as a function of ``y = Lambda``.

    The cat form evaluates Lambert-W at ``h(y) = (2/3) [1 / (sqrt(pi) y^2)]^{2/3}``,
    the argument that solves the cat stationarity equation.
    """
    _check_encoding(encoding)
    if not 0.0 < y < 1.0:
        raise RegimeError("epsilon_tilde requires 0 < Lambda < 1")
    if encoding == "phase":
        return y * (1.0 + 0.5 * (1.0 - y) * float(lambert_w0(2.0 / (math.pi * y * y))))
    w = float(lambert_w0((2.0 / 3.0) * (1.0 / (math.sqrt(math.pi) * y * y)) ** (2.0 / 3.0)))
    # 1 - (1 - a)(1 - b), arranged to avoid cancellation at small y
    a, b = 1.5 * y * y * w, 1.125 * y * y * w * w
    return a + b - a * b


def epsilon_tilde_asymptotic(encoding: str, y: float) -> float:
    """Small-``Lambda`` forms obtained from ``W(x) ~ ln x``."""
    _check_encoding(encoding)
    if not 0.0 < y < 1.0:
        raise RegimeError("asymptotic form requires 0 < Lambda < 1")
    if encoding == "phase":
        return 0.5 * y * math.log(2.0 / (math.pi * y * y))
    return 0.5 * y * y * math.log((2.0 / 3.0) ** 1.5 / (math.sqrt(math.pi) * y * y)) ** 2


def lambda_for_error(encoding: str, target_error: float) -> float:
    """Solve ``epsilon_tilde(Lambda) = target_error`` for ``Lambda``."""
    if not 0.0 < target_error < 1.0:
        raise DomainError("target error must lie in (0, 1)")
    g = lambda y: epsilon_tilde(encoding, y) - target_error
    lo, hi = 1e-14, 0.999
    if g(lo) > 0 or g(hi) < 0:
        raise ConvergenceError("target error not bracketed on (0, 1)")
    return optimize.brentq(g, lo, hi, xtol=1e-16, rtol=1e-14)


def eta_from_lambda(n_pairs: int, lam: float) -> float:
    """Invert ``Lambda_{N, eta}`` for the transmission ``eta``."""
    return 1.0 / (1.0 + lam * math.sin(math.pi / 2**n_pairs) ** 2)


def table_required_eta(target_fidelity: float, n_pairs: int) -> tuple[float, float]:
    """Transmissions ``(eta_cat, eta_phase)`` reaching ``target_fidelity`` via the closed forms."""
    if not 0.0 < target_fidelity < 1.0:
        raise DomainError("target fidelity must lie in (0, 1)")
    eps = 1.0 - target_fidelity
    return tuple(eta_from_lambda(n_pairs, lambda_for_error(enc, eps)) for enc in ("cat", "phase"))


def table_required_eta_numeric(target_fidelity: float, n_pairs: int) -> tuple[float, float]:
    """Same as :func:`table_required_eta` with the numerically optimized error."""
    if not 0.0 < target_fidelity < 1.0:
        raise DomainError("target fidelity must lie in (0, 1)")
    eps = 1.0 - target_fidelity
    out = []
    for enc in ("cat", "phase"):
        def g(log_loss: float) -> float:
            return optimize_n_numeric(enc, n_pairs, 1.0 - math.exp(log_loss))[1] - eps

        guess = math.log(1.0 - eta_from_lambda(n_pairs, lambda_for_error(enc, eps)))
        lo, hi = guess - 1.0, guess + 1.0
        if g(lo) > 0 or g(hi) < 0:
            raise ConvergenceError("numeric transmission search failed to bracket the target")
        out.append(1.0 - math.exp(optimize.brentq(g, lo, hi, xtol=1e-10)))
    return out[0], out[1]


# --- quasistatic dephasing -------------------------------------------------

@dataclass(frozen=True)
class DephasingParams:
    """Quasistatic dephasing set-up; rates are angular frequencies, times in seconds."""

    n_pairs: int
    T2_star: float
    alpha2: float
    t: float
    delta_a: np.ndarray = field(repr=False)
    delta_b: np.ndarray = field(repr=False)
    delta_anc_a: float = math.inf
    delta_anc_b: float = math.inf

    def __post_init__(self):
        for name in ("delta_a", "delta_b"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            if arr.size != self.n_pairs:
                raise DomainError(f"{name} needs one detuning per qubit")
            object.__setattr__(self, name, arr)
        if self.T2_star <= 0:
            raise DomainError("T2* must be positive")

    @classmethod
    def uniform(cls, n_pairs: int, T2_star: float, kappa: float, delta: float, alpha2: float,
                encoding: str = "cat", t: float | None = None) -> "DephasingParams":
        """Equal detunings everywhere and ``t = N_tot / kappa`` unless given."""
        n_tot = 2 * n_pairs + (2 if encoding == "cat" else 0)
        t = n_tot / kappa if t is None else t
        d = np.full(n_pairs, float(delta))
        return cls(n_pairs, T2_star, alpha2, t, d, d.copy(), float(delta), float(delta))

    @property
    def variance(self) -> float:
        """``<<delta omega^2>> = 2 / T2*^2``."""
        return 2.0 / self.T2_star**2

    def phi_j(self) -> np.ndarray:
        return 2.0 ** np.arange(self.n_pairs) * _phi(self.n_pairs)


def _x_register(p: DephasingParams, delta: np.ndarray) -> np.ndarray:
    return p.t - 2.0 * np.sin(0.5 * p.phi_j()) * p.alpha2 / delta


def dephasing_fidelity(encoding: str, params: DephasingParams) -> float:
    """``G(t)`` for the phase protocol and ``G(t) G_a(t)`` for the cat protocol.

    The subset sum runs literally over all subsets of the ``N`` qubits.
    """
    _check_encoding(encoding)
    n = params.n_pairs
    if n > 8:
        raise SizeError("the literal subset sum is limited to N <= 8")
    s2 = np.sin(0.5 * params.phi_j()) ** 2
    t2 = params.T2_star
    phi2 = float(np.sum(s2 / (t2 * params.delta_a) ** 2 + s2 / (t2 * params.delta_b) ** 2))
    log_g = -params.alpha2 * phi2 - n * math.log(4.0)
    for delta in (params.delta_a, params.delta_b):
        w = _x_register(params, delta) ** 2 / t2**2
        total = 0.0
        for k in range(n + 1):
            for subset in itertools.combinations(range(n), k):
                total += math.exp(-sum(w[j] for j in subset))
        log_g += math.log(total)
    if encoding == "phase":
        return math.exp(log_g)
    phi2_a = (1.0 / (t2 * params.delta_anc_a)) ** 2 + (1.0 / (t2 * params.delta_anc_b)) ** 2
    log_ga = -params.alpha2 * phi2_a - math.log(16.0)
    for delta in (params.delta_anc_a, params.delta_anc_b):
        xa = params.t - 2.0 * params.alpha2 / delta
        log_ga += math.log(2.0 + 2.0 * math.exp(-xa**2 / t2**2))
    return math.exp(log_g + log_ga)


def dephasing_monte_carlo(encoding: str, params: DephasingParams, samples: int,
                          rng: np.random.Generator, batch: int = 20_000) -> tuple[float, float]:
    """Average of ``|<ideal|perturbed>|^2`` over Gaussian frequency offsets.

    Each sample draws independent ``delta omega`` for every qubit with
    variance ``2 / T2*^2`` and evaluates the overlap term by term, with
    distinct light labels treated as orthogonal.  Returns ``(mean, stderr)``.
    """
    _check_encoding(encoding)
    n = params.n_pairs
    d = 2**n
    sd = math.sqrt(params.variance)
    signs = np.array([[(-1) ** ((m >> j) & 1) for j in range(n)] for m in range(d)], dtype=float)
    sin_half = np.sin(0.5 * params.phi_j())
    cat = encoding == "cat"
    acc, acc2, done = 0.0, 0.0, 0
    while done < samples:
        s = min(batch, samples - done)
        dw_a = rng.normal(scale=sd, size=(s, n))
        dw_b = rng.normal(scale=sd, size=(s, n))
        omega = 0.5 * (dw_a @ signs.T)[:, :, None] + 0.5 * (dw_b @ signs.T)[:, None, :]
        shift = -((dw_a * sin_half / params.delta_a) @ signs.T)[:, :, None] \
            - ((dw_b * sin_half / params.delta_b) @ signs.T)[:, None, :]
        if cat:
            anc = np.array([1.0, -1.0])
            wa = rng.normal(scale=sd, size=s)
            wb = rng.normal(scale=sd, size=s)
            omega = omega[:, :, :, None, None] + 0.5 * (wa[:, None] * anc)[:, None, None, :, None] \
                + 0.5 * (wb[:, None] * anc)[:, None, None, None, :]
            shift = shift[:, :, :, None, None] - (wa[:, None] * anc / params.delta_anc_a)[:, None, None, :, None] \
                - (wb[:, None] * anc / params.delta_anc_b)[:, None, None, None, :]
        terms = np.exp(1j * omega * params.t + params.alpha2 * np.expm1(1j * shift))
        amp = terms.reshape(s, -1).mean(axis=1)
        f = np.abs(amp) ** 2
        acc += float(f.sum())
        acc2 += float((f * f).sum())
        done += s
    mean = acc / samples
    var = max(acc2 / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


def dephasing_phase_shift(delta_omega, delta, phi_j):
    """Leading-order imprinted phase error ``-2 sin(phi_j / 2) delta_omega / Delta``."""
    if np.any(np.abs(delta_omega) >= np.abs(delta)):
        raise DomainError("requires |delta omega| < |Delta|")
    return -2.0 * np.sin(0.5 * np.asarray(phi_j)) * np.asarray(delta_omega) / delta


def dephasing_phase_shift_exact(delta_omega: float, delta: float, phi_j: float, kappa: float) -> float:
    """Exact change of the conditional reflection phase when ``chi = g^2 / (Delta + delta_omega)``.

    The coupling ``g`` is fixed by tuning ``chi`` for ``phi_j`` at detuning ``Delta``.
    """
    from .protocol import reflection_coefficient, tune_chi

    g2 = tune_chi(phi_j, kappa) * delta
    chi = g2 / (delta + delta_omega)
    r1 = reflection_coefficient(0.0, 1, chi, kappa, 0.0)
    r0 = reflection_coefficient(0.0, 0, chi, kappa, 0.0)
    diff = np.angle(r1 / r0)
    return float(np.angle(np.exp(1j * (diff - phi_j))))


class RegimeNumbers(NamedTuple):
    inverse_delta_t2: float
    dephasing_parameter: float
    imprint_parameter: float


def dephasing_regime(n_pairs: int, encoding: str, kappa: float, T2_star: float, delta: float,
                     alpha2: float) -> RegimeNumbers:
    """``1/(Delta T2*)``, ``N_tot sqrt(N) / (kappa T2*)`` and ``2 |alpha|^2 sqrt(N) / (Delta T2*)``."""
    _check_encoding(encoding)
    n_tot = 2 * n_pairs + (2 if encoding == "cat" else 0)
    return RegimeNumbers(
        1.0 / (delta * T2_star),
        n_tot * math.sqrt(n_pairs) / (kappa * T2_star),
        2.0 * alpha2 * math.sqrt(n_pairs) / (delta * T2_star),
    )


# --- combinatorial identities ----------------------------------------------

def double_sum_direct(p, n_pairs: int) -> complex:
    """``sum_{m, m'} p((m - m') mod 2^N)`` by brute force; ``p`` is indexed by residue."""
    d = 2**n_pairs
    p = np.asarray(p)
    m = np.arange(d)
    return complex(p[(m[:, None] - m[None, :]) % d].sum())


def double_sum_reduced(p, n_pairs: int) -> complex:
    """``2^N + sum_{j=1}^{2^N - 1} (2^N - j) [p(j) + p(-j)]`` (requires ``p(0) = 1``)."""
    d = 2**n_pairs
    p = np.asarray(p)
    j = np.arange(1, d)
    return complex(d + np.sum((d - j) * (p[j] + p[(-j) % d])))


def subset_sum_direct(x) -> float:
    """``sum_k sum_{S, |S| = k} sum_{j in S} x_j`` by enumerating subsets."""
    x = np.asarray(x, dtype=float)
    n = x.size
    return float(sum(x[list(s)].sum() for k in range(n + 1) for s in itertools.combinations(range(n), k)))


def subset_sum_reduced(x) -> float:
    """``2^{N-1} sum_j x_j``."""
    x = np.asarray(x, dtype=float)
    return float(2 ** (x.size - 1) * x.sum())
