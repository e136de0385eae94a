"""Oracle-equivalence checks run by ``catbell validate``.

Each check compares two independent routes to the same quantity and reports
the largest deviation found.  Setting ``CATBELL_PERTURB`` to a float scales
every analytic reference by ``1 + value``; it exists so the failure path of
the command can be exercised.
"""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import analysis, loss, measurement, protocol, registers
from .numerics import RngStream, lambert_w0
from .oracles import fock_channel_oracle

__all__ = ["CheckResult", "run_checks", "CHECKS"]

PERTURB_ENV = "CATBELL_PERTURB"


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    seconds: float
    detail: str = ""


def _perturb() -> float:
    try:
        return 1.0 + float(os.environ.get(PERTURB_ENV, "0"))
    except ValueError:
        return 1.0


def _channel_oracle(quick: bool) -> tuple[float, float, str]:
    alphas = (1.5,) if quick else (0.8, 1.5, 2.5)
    etas = (0.8,) if quick else (0.8, 0.95)
    scale = _perturb()
    worst = 0.0
    for n in ((1,) if quick else (1, 2)):
        for a in alphas:
            for eta in etas:
                orc = fock_channel_oracle(n, a, eta)
                tab = loss.parity_channel_tables(a, eta, n)
                num = orc.tables()
                worst = max(worst, float(np.max(np.abs(num["p"] - scale * tab.p_lambda_sigma))))
                for li, lam in enumerate((1, -1)):
                    worst = max(worst, float(np.max(np.abs(num["omega"][li] - scale * tab.omega_matrix(lam)))))
                    for k in range(2**n):
                        for mu in (0, 1):
                            rho = orc.post_measurement_state(k, lam, mu)
                            target = loss.ideal_branch_target(n, k, lam)
                            f_num = float(np.real(np.vdot(target, rho @ target)))
                            f_an = loss.post_measurement_state(tab, n, k, lam, mu).fidelity(target)
                            worst = max(worst, abs(f_num - scale * f_an))
    return worst, 1e-6, "Fock brute force vs analytic channel tables"


def _wedge_mc(quick: bool) -> tuple[float, float, str]:
    rng = RngStream(2024, 7).generator(0)
    shots = 200_000 if quick else 1_000_000
    worst = 0.0
    for n, a in ((2, 3.0), (3, 4.5), (4, 8.0)):
        rate, err = measurement.monte_carlo_wedge_error(n, a, shots, rng)
        pm = _perturb() * measurement.p_measurement_error(n, 1.0, a * a)
        worst = max(worst, abs(rate - pm) / err)
    return worst, 5.0, "heterodyne Monte Carlo vs erfc law, in standard errors"


def _dephasing(quick: bool) -> tuple[float, float, str]:
    rng = RngStream(2024, 8).generator(0)
    samples = 20_000 if quick else 100_000
    worst = 0.0
    for enc in analysis.ENCODINGS:
        p = analysis.DephasingParams.uniform(2, 10e-6, 2 * math.pi * 50e6, 2 * math.pi * 2.5e9, 10.0, enc,
                                             t=2e-6)
        g = _perturb() * analysis.dephasing_fidelity(enc, p)
        mean, err = analysis.dephasing_monte_carlo(enc, p, samples, rng)
        worst = max(worst, abs(mean - g) / err)
    return worst, 5.0, "dephasing Monte Carlo vs G G_a, in standard errors"


def _optima(quick: bool) -> tuple[float, float, str]:
    worst = 0.0
    grid = np.logspace(-4, math.log10(3e-2), 4 if quick else 12)
    for enc in analysis.ENCODINGS:
        for loss_prob in grid:
            eta = 1.0 - loss_prob
            _, eps = analysis.optimize_n_numeric(enc, 2, eta)
            tilde = _perturb() * analysis.epsilon_tilde(enc, analysis.lambda_regime(2, eta))
            worst = max(worst, abs(tilde - eps) / eps)
    return worst, 0.15, "closed-form vs numerically optimal total error (relative)"


def _structure(quick: bool) -> tuple[float, float, str]:
    worst = 0.0
    for n in range(1, 4 if quick else 6):
        for k in range(2**n):
            diff = registers.add_constant(k, n) - registers.subtraction_permutation(k, n)
            worst = max(worst, float(np.max(np.abs(diff))))
    worst = max(worst, loss.kraus_completeness_defect(0.9, 60))
    tab = loss.parity_channel_tables(1.3, 0.9)
    worst = max(worst, abs(_perturb() * (tab.branch_probability(1) + tab.branch_probability(-1)) - 1.0))
    worst = max(worst, abs(tab.D_plus**2 + tab.D_minus**2 - 1.0))
    for x in (1e-6, 0.3, 1.0, 10.0, 1e6):
        w = float(lambert_w0(x))
        worst = max(worst, abs(w * math.exp(w) - x) / x)
    return worst, 1e-10, "adder, Kraus completeness, probability sums, Lambert W"


def _reflection(quick: bool) -> tuple[float, float, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for phi_j in rng.uniform(1e-6, math.pi, 10 if quick else 50):
        chi = protocol.tune_chi(phi_j, 1.0)
        diff = protocol.reflection_phase(1, chi, 1.0) - protocol.reflection_phase(0, chi, 1.0)
        worst = max(worst, abs(np.angle(np.exp(1j * (diff - _perturb() * phi_j)))))
        for s in (0, 1):
            worst = max(worst, abs(abs(protocol.reflection_coefficient(0.3, s, chi, 1.0)) - 1.0))
    return worst, 1e-10, "tuned conditional phase and lossless unimodularity"


CHECKS: dict[str, Callable[[bool], tuple[float, float, str]]] = {
    "structure": _structure,
    "reflection": _reflection,
    "channel_oracle": _channel_oracle,
    "wedge_monte_carlo": _wedge_mc,
    "dephasing_monte_carlo": _dephasing,
    "closed_form_optima": _optima,
}


def run_checks(quick: bool = False, names=None) -> list[CheckResult]:
    """Run the named checks (all by default) and collect their results."""
    out = []
    for name in names or CHECKS:
        start = time.perf_counter()
        deviation, tol, detail = CHECKS[name](quick)
        out.append(CheckResult(name, bool(deviation <= tol), deviation, tol, time.perf_counter() - start, detail))
    return out
