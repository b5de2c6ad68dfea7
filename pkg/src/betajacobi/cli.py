"""Command line entry point.

Exit codes: 0 pass, 1 verification failure, 2 usage or config error,
3 numeric breakdown.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics, ensemble
from .errors import DomainError, NumericError, SingularityError
from .harness import (
    ConfigError,
    ExperimentConfig,
    coeffs_csv,
    report_render,
    record_grid,
    run,
    start_point,
    summary_json,
    zeros_csv,
)
from .jacobi1d import jacobi_zeros, stieltjes_residual
from .martcoef import compare_printed, esym_at_z
from .params import alpha_beta_from_k

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

VERIFY_KINDS = ("martingale", "charpoly", "eigen", "stationary", "ode", "coeffs", "zeros")

# CLI flag -> config key
_OVERRIDES = {
    "n_particles": "N",
    "degree": "N",
    "kappa": "kappa",
    "p": "p",
    "q": "q",
    "k1": "k1",
    "k2": "k2",
    "k3": "k3",
    "alpha": "alpha",
    "beta": "beta",
    "dt": "dt",
    "t_grid": "t_grid",
    "t_max": "t_max",
    "h": "h",
    "paths": "M",
    "draws": "S",
    "start": "start",
    "y_values": "y_values",
    "compare_kappas": "compare_kappas",
    "burn_in": "burn_in",
    "thin": "thin",
    "chains": "chains",
    "workers": "workers",
    "compare_printed": "compare_printed",
    "seed": "seed",
}


class UsageError(Exception):
    pass


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _start(text: str):
    if text in ("zeros", "equispaced"):
        return text
    return _floats(text)


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--config", type=Path, help="JSON config; flags override its keys")
    c.add_argument("--seed", type=_u64)
    c.add_argument("--out", type=Path, help="directory for CSV/JSON outputs")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--workers", type=int)
    c.add_argument("-v", "--verbose", action="store_true")
    return c


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-particles", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--k1", type=float)
    p.add_argument("--k2", type=float)
    p.add_argument("--k3", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="betajacobi", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coeffs", parents=[common], help="martingale coefficients as CSV")
    _model_flags(c)
    c.add_argument("--compare-printed", action="store_true", default=None)

    z = sub.add_parser("zeros", parents=[common], help="Jacobi zeros and equilibrium residuals")
    z.add_argument("--degree", type=int)
    z.add_argument("--alpha", type=float)
    z.add_argument("--beta", type=float)

    s = sub.add_parser("simulate", parents=[common], help="simulate the normalized process")
    _model_flags(s)
    s.add_argument("--t-max", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--t-grid", type=_floats)
    s.add_argument("--paths", type=int)
    s.add_argument("--start", type=_start)

    v = sub.add_parser("verify", parents=[common], help="run a verification experiment")
    v.add_argument("kind", choices=VERIFY_KINDS)
    _model_flags(v)
    v.add_argument("--degree", type=int, help="alias of --n-particles for the zeros kind")
    v.add_argument("--alpha", type=float)
    v.add_argument("--beta", type=float)
    v.add_argument("--dt", type=float)
    v.add_argument("--t-grid", type=_floats)
    v.add_argument("--t-max", type=float)
    v.add_argument("--h", type=float)
    v.add_argument("--paths", type=int)
    v.add_argument("--draws", type=int)
    v.add_argument("--start", type=_start)
    v.add_argument("--y-values", type=_floats)
    v.add_argument("--compare-kappas", type=_floats)
    v.add_argument("--compare-printed", action="store_true", default=None)
    v.add_argument("--burn-in", type=int)
    v.add_argument("--thin", type=int)
    v.add_argument("--chains", type=int)

    e = sub.add_parser("sample-ensemble", parents=[common], help="MCMC draws from the stationary ensemble")
    e.add_argument("--n-particles", type=int)
    e.add_argument("--k1", type=float)
    e.add_argument("--k2", type=float)
    e.add_argument("--k3", type=float)
    e.add_argument("--draws", type=int)
    e.add_argument("--burn-in", type=int)
    e.add_argument("--thin", type=int)
    e.add_argument("--chains", type=int)
    return ap


def _config_dict(args, kind: str) -> dict:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    data["kind"] = kind
    for flag, key in _OVERRIDES.items():
        v = getattr(args, flag, None)
        if v is not None:
            data[key] = v
    return data


def _emit(args, name: str, text: str) -> None:
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / name).write_text(text)
    else:
        sys.stdout.write(text)


def _require(data: dict, *keys) -> None:
    missing = [k for k in keys if data.get(k) is None]
    if missing:
        raise UsageError(f"missing required parameters: {missing}")


def _cmd_coeffs(args) -> int:
    data = _config_dict(args, "coeffs")
    _require(data, "N", "p", "q")
    table = compare_printed(int(data["N"]), float(data["p"]), float(data["q"]))
    _emit(args, "coeffs.csv", coeffs_csv(table, bool(data.get("compare_printed"))))
    return EXIT_PASS


def _cmd_zeros(args) -> int:
    data = _config_dict(args, "zeros")
    _require(data, "N", "alpha", "beta")
    a, b = float(data["alpha"]), float(data["beta"])
    z = jacobi_zeros(int(data["N"]), a, b)
    res = stieltjes_residual(z, a, b)
    _emit(args, "zeros.csv", zeros_csv(z, res))
    tol = float(data.get("tol_det", 1e-9))
    return EXIT_PASS if np.max(np.abs(res)) <= tol else EXIT_FAIL


def _cmd_simulate(args) -> int:
    data = _config_dict(args, "martingale")
    if args.t_max is not None and args.t_grid is None:
        data["t_grid"] = [args.t_max * i / 10 for i in range(1, 11)]
    cfg = ExperimentConfig.from_dict(data)
    params = cfg.params()
    x0 = start_point(cfg, params)
    grid = record_grid(cfg)
    ens = dynamics.simulate(params, x0, grid[-1], cfg.dt, cfg.M, cfg.seed, grid, workers=cfg.workers)
    moments = dynamics.moments_csv(dynamics.esym_moments(ens))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "trajectories.csv").write_text(dynamics.trajectory_csv(ens))
        (args.out / "moments.csv").write_text(moments)
    else:
        sys.stdout.write(moments)
    return EXIT_PASS


def _cmd_sample(args) -> int:
    data = _config_dict(args, "stationary")
    cfg = ExperimentConfig.from_dict(data)
    k = cfg.multiplicities()
    tuning = ensemble.Tuning(burn_in=cfg.burn_in, thin=cfg.thin, chains=cfg.chains)
    sample = ensemble.mcmc_sample(k, cfg.N, cfg.S, cfg.seed, tuning, workers=cfg.workers)
    alpha, beta = alpha_beta_from_k(k)
    e_z = esym_at_z(cfg.N, alpha, beta)
    records = []
    for n in range(1, cfg.N + 1):
        est, se = ensemble.moment_estimate(sample, ensemble.esym_observable(n))
        z = (est - e_z[n]) / se if se > 0 else math.nan
        records.append({"observable": f"e{n}", "estimate": est, "stderr": se, "predicted": float(e_z[n]), "zscore": z})
    summary = summary_json(records)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "sample.csv").write_text(ensemble.sample_csv(sample))
        (args.out / "summary.json").write_text(summary)
    sys.stdout.write(summary)
    return EXIT_PASS


def _cmd_verify(args) -> int:
    cfg = ExperimentConfig.from_dict(_config_dict(args, args.kind))
    report = run(cfg, args.out, args.format)
    sys.stdout.buffer.write(report_render(report, args.format))
    sys.stdout.flush()
    logging.getLogger(__name__).info("wall time %.2fs", report.wall_time)
    if report.numeric_error is not None:
        print(f"numeric breakdown: {report.numeric_error}", file=sys.stderr)
        return EXIT_NUMERIC
    if not report.passed:
        print("FAILED: " + ", ".join(report.failures()), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


_COMMANDS = {
    "coeffs": _cmd_coeffs,
    "zeros": _cmd_zeros,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "sample-ensemble": _cmd_sample,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError, DomainError, SingularityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric breakdown: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
