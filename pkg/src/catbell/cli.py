"""``catbell`` command line: sweeps, tables, protocol simulation, dephasing and validation.

Settings come from built-in defaults, then an optional TOML file (top-level
keys, overridden by a table named after the subcommand), then flags.
Exit codes: 1 for a failed validation, 2 for configuration errors, 3 for
errors raised while simulating.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from . import analysis
from .errors import CatBellError, RegimeError
from .numerics import RngStream

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_SIMULATION = 3

SWEEP_HEADER = ["encoding", "N", "one_minus_eta", "n_numeric", "eps_numeric", "eps_tilde"]
TABLE_HEADER = ["N", "eta_cat_percent", "eta_phase_percent"]
OPTIMIZE_HEADER = ["encoding", "N", "eta", "lambda", "n_numeric", "eps_numeric", "n_closed", "eps_tilde"]
DEPHASE_HEADER = ["encoding", "N", "alpha2", "t", "G_analytic", "mc_mean", "mc_stderr",
                  "inverse_delta_t2", "dephasing_parameter"]

_COMMON = {"n_pairs": 2, "eta": 0.99, "encoding": "both", "seed": 0, "out": None, "force": False, "quick": False}
DEFAULTS = {
    "sweep": {**_COMMON, "grid_min": 1e-4, "grid_max": 1e-1, "grid_points": 13},
    "table": {**_COMMON, "target": 0.99, "n_values": [2, 3, 4, 5], "format": "csv"},
    "simulate": {**_COMMON, "encoding": "cat", "alpha2": None, "shots": 100, "loss_mode": "none",
                 "readout": "exact", "parity_error": 0.0, "no_correction": False},
    "dephase": {**_COMMON, "alpha2": 10.0, "t2_star": 10e-6, "kappa": 2 * math.pi * 50e6,
                "delta": 2 * math.pi * 2.5e9, "t": None, "samples": 100_000},
    "optimize": dict(_COMMON),
    "validate": {"quick": False, "out": None},
}
LOSS_MODE_NAMES = {"none": "none", "single": "single_photon", "full": "full_channel"}


class ConfigError(Exception):
    pass


class SimulationFailure(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".12g")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def _encodings(cfg) -> tuple[str, ...]:
    enc = cfg["encoding"]
    if enc == "both":
        return ("phase", "cat")
    if enc not in analysis.ENCODINGS:
        raise ConfigError(f"unknown encoding {enc!r}")
    return (enc,)


def _threads() -> int:
    raw = os.environ.get("CATBELL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"CATBELL_THREADS must be an integer, got {raw!r}") from exc


# --- commands --------------------------------------------------------------

def cmd_sweep(cfg) -> str:
    points = int(cfg["grid_points"])
    lo, hi = float(cfg["grid_min"]), float(cfg["grid_max"])
    if points < 1 or not 0 < lo <= hi < 1:
        raise ConfigError("sweep grid is empty or outside (0, 1)")
    n = int(cfg["n_pairs"])
    rows = []
    for loss_prob in np.geomspace(lo, hi, points):
        eta = 1.0 - loss_prob
        for enc in _encodings(cfg):
            n_opt, eps = analysis.optimize_n_numeric(enc, n, eta)
            lam = analysis.lambda_regime(n, eta)
            if lam >= 1.0 and not cfg["force"]:
                raise ConfigError(f"Lambda = {lam:.4g} >= 1 at 1-eta = {loss_prob:.4g}; use --force")
            tilde = analysis.epsilon_tilde(enc, lam) if lam < 1.0 else math.nan
            rows.append([enc, n, loss_prob, n_opt, eps, tilde])
    return _csv(SWEEP_HEADER, rows)


def cmd_table(cfg) -> str:
    try:
        target = float(cfg["target"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed target fidelity {cfg['target']!r}") from exc
    if not 0.0 < target < 1.0:
        raise ConfigError("target fidelity must lie in (0, 1)")
    rows = []
    for n in cfg["n_values"]:
        eta_cat, eta_phase = analysis.table_required_eta(target, int(n))
        rows.append([int(n), 100.0 * eta_cat, 100.0 * eta_phase])
    if cfg["format"] == "markdown":
        lines = [f"| N | cat eta (%) for F = {target:g} | phase eta (%) for F = {target:g} |",
                 "|---|---|---|"]
        lines += [f"| {n} | {c:.3f} | {p:.3f} |" for n, c, p in rows]
        return "\n".join(lines) + "\n"
    if cfg["format"] != "csv":
        raise ConfigError("format must be csv or markdown")
    return _csv(TABLE_HEADER, rows)


def cmd_optimize(cfg) -> str:
    n = int(cfg["n_pairs"])
    eta = float(cfg["eta"])
    rows = []
    for enc in _encodings(cfg):
        lam = analysis.lambda_regime(n, eta)
        if lam >= 1.0 and not cfg["force"]:
            raise ConfigError(f"Lambda = {lam:.4g} >= 1; closed forms need --force")
        n_opt, eps = analysis.optimize_n_numeric(enc, n, eta)
        closed = analysis.closed_form_n(enc, n, eta) if lam < 1.0 else math.nan
        tilde = analysis.epsilon_tilde(enc, lam) if lam < 1.0 else math.nan
        rows.append([enc, n, eta, lam, n_opt, eps, closed, tilde])
    return _csv(OPTIMIZE_HEADER, rows)


def cmd_dephase(cfg) -> str:
    n = int(cfg["n_pairs"])
    samples = int(cfg["samples"])
    if samples < 2:
        raise ConfigError("need at least two Monte Carlo samples")
    rows = []
    for i, enc in enumerate(_encodings(cfg)):
        p = analysis.DephasingParams.uniform(n, float(cfg["t2_star"]), float(cfg["kappa"]), float(cfg["delta"]),
                                             float(cfg["alpha2"]), enc, cfg["t"])
        g = analysis.dephasing_fidelity(enc, p)
        rng = RngStream(int(cfg["seed"]), i).generator(0)
        mean, err = analysis.dephasing_monte_carlo(enc, p, samples, rng)
        regime = analysis.dephasing_regime(n, enc, float(cfg["kappa"]), float(cfg["t2_star"]),
                                           float(cfg["delta"]), float(cfg["alpha2"]))
        rows.append([enc, n, p.alpha2, p.t, g, mean, err, regime.inverse_delta_t2, regime.dephasing_parameter])
    return _csv(DEPHASE_HEADER, rows)


def _simulation_params(cfg):
    from .protocol import ProtocolParams

    if cfg["encoding"] not in analysis.ENCODINGS:
        raise ConfigError("simulate needs --encoding phase or cat")
    if cfg["loss_mode"] not in LOSS_MODE_NAMES:
        raise ConfigError(f"loss mode must be one of {sorted(LOSS_MODE_NAMES)}")
    if int(cfg["shots"]) < 1:
        raise ConfigError("need at least one shot")
    if cfg["readout"] not in ("exact", "idealized"):
        raise ConfigError("readout must be exact or idealized")
    alpha2 = cfg["alpha2"]
    eta = float(cfg["eta"])
    if alpha2 is None:
        alpha2 = analysis.optimize_n_numeric(cfg["encoding"], int(cfg["n_pairs"]), eta)[0] if eta < 1 else 16.0
    return ProtocolParams(
        n_pairs=int(cfg["n_pairs"]),
        alpha=math.sqrt(float(alpha2)),
        eta=eta,
        encoding=cfg["encoding"],
        seed=int(cfg["seed"]),
        idealized=cfg["readout"] == "idealized",
        parity_error=float(cfg["parity_error"]),
        correct=not cfg["no_correction"],
    )


def cmd_simulate(cfg) -> str:
    from .protocol import run_protocol

    try:
        params = _simulation_params(cfg)
    except CatBellError as exc:
        raise ConfigError(str(exc)) from exc
    workers = _threads()
    try:
        records = run_protocol(params, LOSS_MODE_NAMES[cfg["loss_mode"]], int(cfg["shots"]), workers=workers)
    except CatBellError as exc:
        raise SimulationFailure(str(exc)) from exc
    lines = [json.dumps(r.to_json_dict()) for r in records]
    fid = np.array([r.fidelity_vs_target for r in records])
    lam = [r.parity_lambda for r in records if r.parity_lambda is not None]
    summary = {
        "summary": True,
        "shots": len(records),
        "alpha2": abs(params.alpha) ** 2,
        "mean_fidelity": float(fid.mean()),
        "stderr": float(fid.std(ddof=1) / math.sqrt(fid.size)) if fid.size > 1 else 0.0,
        "parity_minus_fraction": (sum(1 for x in lam if x == -1) / len(lam)) if lam else None,
    }
    lines.append(json.dumps(summary))
    return "\n".join(lines) + "\n"


def cmd_validate(cfg) -> tuple[str, bool]:
    from .validation import run_checks

    results = run_checks(quick=bool(cfg["quick"]))
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name}: deviation={r.deviation:.3e} "
             f"tolerance={r.tolerance:.1e} ({r.seconds:.2f} s) {r.detail}" for r in results]
    ok = all(r.passed for r in results)
    lines.append("all checks passed" if ok else "validation FAILED")
    return "\n".join(lines) + "\n", ok


# --- argument handling -----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catbell", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with settings; flags override it")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--n-pairs", type=int, dest="n_pairs")
    common.add_argument("--eta", type=float)
    common.add_argument("--alpha2", type=float, help="mean photon number |alpha|^2")
    common.add_argument("--encoding", choices=["phase", "cat", "both"])
    common.add_argument("--shots", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--loss-mode", dest="loss_mode", choices=sorted(LOSS_MODE_NAMES))
    common.add_argument("--force", action="store_true", default=None, help="allow Lambda >= 1")
    common.add_argument("--quick", action="store_true", default=None, help="reduced validation set")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common], help="total error vs channel loss")
    p.add_argument("--grid-min", type=float, dest="grid_min")
    p.add_argument("--grid-max", type=float, dest="grid_max")
    p.add_argument("--grid-points", type=int, dest="grid_points")

    p = sub.add_parser("table", parents=[common], help="transmission needed for a target fidelity")
    p.add_argument("--target")
    p.add_argument("--n-values", type=int, nargs="+", dest="n_values")
    p.add_argument("--format", choices=["csv", "markdown"])

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo runs of the protocol (JSONL)")
    p.add_argument("--readout", choices=["exact", "idealized"],
                   help="idealized treats distinct coherent labels as orthogonal")
    p.add_argument("--parity-error", type=float, dest="parity_error")
    p.add_argument("--no-correction", action="store_true", default=None, dest="no_correction")

    p = sub.add_parser("dephase", parents=[common], help="quasistatic dephasing: analytic vs Monte Carlo")
    p.add_argument("--t2-star", type=float, dest="t2_star", help="seconds")
    p.add_argument("--kappa", type=float, help="cavity decay rate (rad/s)")
    p.add_argument("--delta", type=float, help="qubit-cavity detuning (rad/s)")
    p.add_argument("--t", type=float, help="protocol duration (s); default N_tot / kappa")
    p.add_argument("--samples", type=int)

    sub.add_parser("optimize", parents=[common], help="numeric and closed-form optimal photon number")
    sub.add_parser("validate", parents=[common], help="run the oracle-equivalence checks")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the TOML file and explicit flags (flags win)."""
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        section = data.get(args.command, {})
        top = {k: v for k, v in data.items() if not isinstance(v, dict)}
        for key, value in {**top, **section}.items():
            key = key.replace("-", "_")
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    ok = True
    try:
        cfg = resolve_config(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            if args.command == "validate":
                text, ok = cmd_validate(cfg)
            else:
                text = {"sweep": cmd_sweep, "table": cmd_table, "simulate": cmd_simulate,
                        "dephase": cmd_dephase, "optimize": cmd_optimize}[args.command](cfg)
    except (ConfigError, RegimeError) as exc:
        print(f"catbell: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationFailure as exc:
        print(f"catbell: simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except CatBellError as exc:
        print(f"catbell: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if args.command != "simulate" else EXIT_SIMULATION
    _emit(text, cfg.get("out"))
    return 0 if ok else EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
