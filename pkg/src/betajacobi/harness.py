"""Experiment configuration, verification runs and report serialization."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, ensemble
from .errors import DomainError, NumericError, SingularityError
from .jacobi1d import jacobi_zeros, monic_jacobi, stieltjes_residual
from .martcoef import (
    MartingaleSystem,
    compare_printed,
    esym_at_z,
    esym_at_z_recursive,
    expected_esym_curve,
    remark45_parity,
)
from .params import (
    MultiplicityParams,
    Params,
    alpha_beta_from_k,
    convert_k_to_pq,
    convert_pq_to_k,
    validate,
)
from .sympoly import charpoly_from_esym, esym_all

log = logging.getLogger(__name__)

KINDS = ("coeffs", "zeros", "martingale", "charpoly", "eigen", "stationary", "ode")
REPORT_COLUMNS = ("name", "t", "estimate", "stderr", "predicted", "zscore")
ACCEPTANCE_INDICES = (-0.5, 0.0, 0.5, 1.5, 3.0)


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass
class ExperimentConfig:
    kind: str
    N: int | None = None
    kappa: float | None = None
    p: float | None = None
    q: float | None = None
    k1: float | None = None
    k2: float | None = None
    k3: float | None = None
    alpha: float | None = None
    beta: float | None = None
    seed: int = 0
    dt: float | None = None
    t_grid: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    t_max: float = 1.0
    h: float = 1e-4
    M: int = 20_000
    S: int = 100_000
    start: object = "zeros"
    y_values: list = field(default_factory=lambda: [-1.0, -0.5, 0.0, 0.5, 1.0])
    compare_kappas: list = field(default_factory=list)
    compare_printed: bool = False
    burn_in: int = 10_000
    thin: int = 10
    chains: int = 8
    ks_check: bool = True
    points: int = 100
    N_values: list | None = None
    k1_values: list = field(default_factory=lambda: [0.5, 1.0])
    k2_values: list = field(default_factory=lambda: [0.5, 1.0])
    k3_values: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    tol_det: float = 1e-9
    tol_ode_fixed_point: float = 1e-8
    tol_ode_curve: float = 1e-6
    z_max: float = 3.0
    abs_floor: float = 0.01
    workers: int = 1

    # execution controls that must not change the report bytes
    _NOT_ECHOED = ("workers",)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in data:
            raise ConfigError("config needs a 'kind'")
        data = dict(data)
        if isinstance(data.get("kappa"), str):
            try:
                data["kappa"] = float(data["kappa"])
            except ValueError as exc:
                raise ConfigError(f"bad kappa {data['kappa']!r}") from exc
        cfg = cls(**data)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def echo(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            if f.name in self._NOT_ECHOED:
                continue
            v = getattr(self, f.name)
            out[f.name] = _jsonable(v)
        return out

    def params(self) -> Params:
        if self.p is not None and self.q is not None:
            if self.N is None or self.kappa is None:
                raise ConfigError("p, q need N and kappa")
            return Params(self.N, self.kappa, self.p, self.q)
        if self.multiplicities() is not None and self.N is not None:
            return convert_k_to_pq(self.multiplicities(), self.N)
        raise ConfigError("need (N, kappa, p, q) or (N, k1, k2, k3)")

    def multiplicities(self) -> MultiplicityParams | None:
        if None in (self.k1, self.k2, self.k3):
            return None
        return MultiplicityParams(self.k1, self.k2, self.k3)

    def check(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        need = {"stationary": ("N", "k1", "k2", "k3")}.get(self.kind, ())
        missing = [n for n in need if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"kind {self.kind!r} needs {missing}")
        if self.kind in ("martingale", "charpoly"):
            has_pq = None not in (self.N, self.kappa, self.p, self.q)
            has_k = None not in (self.N, self.k1, self.k2, self.k3)
            if not (has_pq or has_k):
                raise ConfigError(f"kind {self.kind!r} needs N with (kappa, p, q) or (k1, k2, k3)")
        if self.kind == "coeffs" and len({getattr(self, n) is None for n in ("N", "p", "q")}) > 1:
            raise ConfigError("coeffs needs all of N, p, q, or none for the full grid")
        if self.kind == "zeros" and (self.N is None) != (self.alpha is None or self.beta is None):
            raise ConfigError("zeros needs all of N, alpha, beta, or none for the full grid")
        if self.kind == "ode" and self.kappa is not None and not math.isinf(self.kappa):
            raise ConfigError("ode runs at kappa = inf")


@dataclass
class ReportRow:
    name: str
    t: float | None
    estimate: float
    stderr: float | None
    predicted: float | None
    zscore: float | None
    role: str = "stat"  # stat | det | bound | info
    tol: float | None = None
    z_max: float = 3.0

    @property
    def passed(self) -> bool:
        if self.role == "info":
            return True
        if self.role == "bound":
            return self.estimate <= self.predicted
        diff = abs(self.estimate - self.predicted)
        if self.role == "det":
            return diff <= self.tol
        within = self.zscore is not None and abs(self.zscore) <= self.z_max
        return bool(within or (self.tol is not None and diff <= self.tol))


def _stat_row(name, t, est, se, pred, z_max, floor=None) -> ReportRow:
    diff = est - pred
    if se > 0:
        z = diff / se
    else:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return ReportRow(name, t, float(est), float(se), float(pred), float(z), "stat", floor, z_max)


def _det_row(name, est, pred, tol, t=None) -> ReportRow:
    return ReportRow(name, t, float(est), None, float(pred), None, "det", tol)


@dataclass
class VerificationReport:
    kind: str
    rows: list
    config: dict
    wall_time: float = 0.0
    numeric_error: str | None = None
    artifacts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.numeric_error is None and all(r.passed for r in self.rows)

    @property
    def max_abs_z(self) -> float:
        zs = [abs(r.zscore) for r in self.rows if r.role == "stat" and r.zscore is not None]
        return max(zs) if zs else 0.0

    def failures(self) -> list[str]:
        return [r.name + ("" if r.t is None else f"@{r.t:g}") for r in self.rows if not r.passed]

    def summary(self, include_timing: bool = False) -> dict:
        out = {
            "kind": self.kind,
            "pass": self.passed,
            "max_abs_z": self.max_abs_z,
            "n_rows": len(self.rows),
            "failures": self.failures(),
            "numeric_error": self.numeric_error,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    return v


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_render(report: VerificationReport, fmt: str = "csv", include_timing: bool = False) -> bytes:
    """Serialize deterministically; wall time is left out unless asked for."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([_csv_cell(getattr(r, c)) for c in REPORT_COLUMNS])
        return buf.getvalue().encode()
    if fmt == "json":
        doc = {
            "config": report.config,
            "rows": [
                {
                    **{c: _jsonable(getattr(r, c)) for c in REPORT_COLUMNS},
                    "role": r.role,
                    "tol": _jsonable(r.tol),
                    "pass": r.passed,
                }
                for r in report.rows
            ],
            "summary": {k: _jsonable(v) for k, v in report.summary(include_timing).items()},
        }
        return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}")


# ---- kinds -------------------------------------------------------------------


def _zero_checks(N, p, q, tol, prefix=""):
    """``q_n(z) = 0`` and three routes to ``e_n(z)`` at the zeros for ``(p, q)``."""
    sys_ = MartingaleSystem.build(N, p, q)
    z = jacobi_zeros(N, q - N, p - N)
    e = esym_all(z)
    closed = esym_at_z(N, q - N, p - N)
    recursive = esym_at_z_recursive(sys_)
    rows = []
    for n in range(1, N + 1):
        rows.append(_det_row(f"{prefix}q{n}_at_zeros", float(sys_.T[n] @ e), 0.0, tol))
    for n in range(1, N + 1):
        rows.append(_det_row(f"{prefix}e{n}_z_sum_vs_vieta", float(closed[n]), float(e[n]), tol))
        rows.append(_det_row(f"{prefix}e{n}_z_sum_vs_recursion", float(closed[n]), float(recursive[n]), tol))
    return rows


def _coeffs(cfg: ExperimentConfig):
    if cfg.N is None:
        Ns = cfg.N_values or list(range(1, 9))
        rows = []
        for N in Ns:
            for a in ACCEPTANCE_INDICES:
                for b in ACCEPTANCE_INDICES:
                    rows += _zero_checks(N, b + N, a + N, cfg.tol_det, f"N{N}_a{a:g}_b{b:g}_")
        return rows, {}
    N, p, q = cfg.N, cfg.p, cfg.q
    rows = _zero_checks(N, p, q, cfg.tol_det) if p > N - 1 and q > N - 1 else []
    table = compare_printed(N, p, q)
    if cfg.compare_printed:
        for r in table:
            rows.append(
                ReportRow(
                    f"c_{r['n']}_{r['l']}_printed_vs_canonical",
                    None,
                    r["c_printed"],
                    None,
                    r["c_canonical"],
                    None,
                    "info",
                )
            )
    return rows, {"coeffs.csv": coeffs_csv(table, cfg.compare_printed)}


def coeffs_csv(table: list[dict], compare: bool = True) -> str:
    buf = io.StringIO()
    buf.write("n,l,c_canonical,c_printed,abs_diff\n")
    for r in table:
        printed = repr(r["c_printed"]) if compare else ""
        diff = repr(r["abs_diff"]) if compare else ""
        buf.write(f"{r['n']},{r['l']},{r['c_canonical']!r},{printed},{diff}\n")
    return buf.getvalue()


def zeros_csv(z, residual) -> str:
    buf = io.StringIO()
    buf.write("index,z,residual\n")
    for i, (zi, ri) in enumerate(zip(z, residual), start=1):
        buf.write(f"{i},{float(zi)!r},{float(ri)!r}\n")
    return buf.getvalue()


def _zeros(cfg: ExperimentConfig):
    if cfg.N is not None:
        cases = [(cfg.N, cfg.alpha, cfg.beta)]
    else:
        Ns = cfg.N_values or list(range(1, 9))
        cases = [(N, a, b) for N in Ns for a in ACCEPTANCE_INDICES for b in ACCEPTANCE_INDICES]
    rows, artifacts = [], {}
    for N, a, b in cases:
        z = jacobi_zeros(N, a, b)
        res = stieltjes_residual(z, a, b)
        rows.append(_det_row(f"stieltjes_N{N}_a{a:g}_b{b:g}", float(np.max(np.abs(res))), 0.0, cfg.tol_det))
        if len(cases) == 1:
            artifacts["zeros.csv"] = zeros_csv(z, res)
            for i, zi in enumerate(z, start=1):
                rows.append(ReportRow(f"z_{i}", None, float(zi), None, None, None, "info"))
    return rows, artifacts


def start_point(cfg: ExperimentConfig, params: Params) -> np.ndarray:
    if isinstance(cfg.start, str):
        if cfg.start == "zeros":
            if not validate(params).zeros_start_ok:
                raise ConfigError("start=zeros needs p, q > N - 1")
            return jacobi_zeros(params.N, params.alpha, params.beta)
        if cfg.start == "equispaced":
            return np.linspace(-1, 1, params.N + 2)[1:-1]
        raise ConfigError(f"unknown start {cfg.start!r}")
    x0 = np.asarray(cfg.start, dtype=float)
    if x0.shape != (params.N,):
        raise ConfigError(f"start must have {params.N} coordinates")
    return x0


def record_grid(cfg: ExperimentConfig) -> list:
    ts = sorted(float(t) for t in cfg.t_grid)
    if not ts or ts[0] <= 0:
        raise ConfigError("t_grid must hold positive times")
    return [0.0] + ts


def _monte_carlo(cfg: ExperimentConfig, with_martingale: bool):
    base = cfg.params()
    x0 = start_point(cfg, base)
    grid = record_grid(cfg)
    sys_ = MartingaleSystem.build(base.N, base.p, base.q)
    kappas = [base.kappa] + [float(k) for k in cfg.compare_kappas]
    rows, artifacts, runs = [], {}, {}
    mono = monic_jacobi(base.N, base.alpha, base.beta) if cfg.start == "zeros" else None
    # each comparison run gets its own noise so the two-sample z is valid
    for replica, kappa in enumerate(kappas):
        params = base.with_kappa(kappa)
        if not validate(params).valid:
            raise ConfigError(f"parameters not admissible: {params}")
        ens = dynamics.simulate(params, x0, grid[-1], cfg.dt, cfg.M, cfg.seed, grid, workers=cfg.workers, replica=replica)
        e = ens.esym()
        runs[kappa] = e
        tag = f"k{kappa:g}"
        moment_rows = dynamics.esym_moments(ens)
        artifacts[f"moments_{tag}.csv"] = dynamics.moments_csv(moment_rows)
        artifacts[f"trajectories_{tag}.csv"] = dynamics.trajectory_csv(ens)
        for row in moment_rows:
            t, n = row["t"], row["n"]
            if t == 0 or n == 0:
                continue
            pred = expected_esym_curve(sys_, x0, t)[n]
            rows.append(_stat_row(f"{tag}_e{n}", t, row["estimate"], row["stderr"], pred, cfg.z_max, cfg.abs_floor))
        for k, t in enumerate(grid):
            if t == 0:
                continue
            if with_martingale:
                for n in range(1, base.N + 1):
                    vals = math.exp(sys_.r[n] * t) * (e[:, k] @ sys_.T[n])
                    pred = float(esym_all(x0) @ sys_.T[n])
                    rows.append(
                        _stat_row(f"{tag}_mart_q{n}", t, vals.mean(), vals.std(ddof=1) / math.sqrt(cfg.M), pred, cfg.z_max)
                    )
            exp_e = expected_esym_curve(sys_, x0, t)
            for y in cfg.y_values:
                vals = charpoly_from_esym(e[:, k], y)
                pred = mono(y) if mono is not None else charpoly_from_esym(exp_e, y)
                rows.append(
                    _stat_row(f"{tag}_charpoly_y{y:g}", t, vals.mean(), vals.std(ddof=1) / math.sqrt(cfg.M), pred, cfg.z_max)
                )
    for a in range(len(kappas)):
        for b in range(a + 1, len(kappas)):
            ea, eb = runs[kappas[a]], runs[kappas[b]]
            for k, t in enumerate(grid):
                if t == 0:
                    continue
                for n in range(1, base.N + 1):
                    da, db = ea[:, k, n], eb[:, k, n]
                    se = math.sqrt(da.var(ddof=1) / len(da) + db.var(ddof=1) / len(db))
                    rows.append(
                        _stat_row(
                            f"kdiff_e{n}_k{kappas[a]:g}_vs_k{kappas[b]:g}", t, da.mean() - db.mean(), se, 0.0, cfg.z_max
                        )
                    )
    if mono is not None:
        e_z = esym_at_z(base.N, base.alpha, base.beta)
        ys = np.asarray(cfg.y_values, dtype=float)
        gap = np.max(np.abs(charpoly_from_esym(e_z, ys) - mono(ys)))
        rows.append(_det_row("charpoly_two_route", float(gap), 0.0, cfg.tol_det))
    return rows, artifacts


def _eigen(cfg: ExperimentConfig):
    rng = np.random.default_rng(cfg.seed)
    Ns = cfg.N_values or list(range(2, 7))
    rows = []

    def worst(k, sys_, N, pts):
        out = 0.0
        for x in pts:
            Le = dynamics.generator_on_esym(k, x)
            e = esym_all(x)
            for n in range(1, N + 1):
                lam = dynamics.generator_eigenvalue(k, N, n)
                qn = e @ sys_.T[n]
                res = abs(Le @ sys_.T[n] - lam * qn) / max(1.0, abs(lam * qn))
                out = max(out, res)
        return out

    for N in Ns:
        pts = np.sort(rng.uniform(-1, 1, size=(cfg.points, N)), axis=1)
        for k1 in cfg.k1_values:
            for k2 in cfg.k2_values:
                for k3 in cfg.k3_values:
                    k = MultiplicityParams(k1, k2, k3)
                    P = convert_k_to_pq(k, N)
                    sys_ = MartingaleSystem.build(N, P.p, P.q)
                    rows.append(_det_row(f"eigen_N{N}_k{k1:g},{k2:g},{k3:g}", worst(k, sys_, N, pts), 0.0, cfg.tol_det))
                # one q_n from (p, q) at k3 = 1, tested against the generator for every k3
                P = convert_k_to_pq(MultiplicityParams(k1, k2, 1.0), N)
                sys_ = MartingaleSystem.build(N, P.p, P.q)
                for k3 in cfg.k3_values:
                    k = convert_pq_to_k(P.with_kappa(k3))
                    rows.append(
                        _det_row(f"same_q_N{N}_k{k1:g},{k2:g}_kappa{k3:g}", worst(k, sys_, N, pts), 0.0, cfg.tol_det)
                    )
    return rows, {}


def _ode(cfg: ExperimentConfig):
    N = cfg.N if cfg.N is not None else 4
    p = cfg.p if cfg.p is not None else 5.0
    q = cfg.q if cfg.q is not None else 7.0
    params = Params(N, math.inf, p, q)
    z = jacobi_zeros(N, params.alpha, params.beta)
    _, xs = dynamics.ode_integrate(params, z, cfg.t_max, cfg.h)
    rows = [_det_row("ode_fixed_point_sup", float(np.max(np.abs(xs - z))), 0.0, cfg.tol_ode_fixed_point)]
    x0 = start_point(cfg, params) if cfg.start != "zeros" else np.linspace(-1, 1, N + 2)[1:-1]
    ts, xs = dynamics.ode_integrate(params, x0, cfg.t_max, cfg.h)
    sys_ = MartingaleSystem.build(N, p, q)
    e = esym_all(xs)
    dev = max(float(np.max(np.abs(e[i] - expected_esym_curve(sys_, x0, t)))) for i, t in enumerate(ts))
    rows.append(_det_row("ode_esym_curve_sup", dev, 0.0, cfg.tol_ode_curve))
    return rows, {}


def summary_json(records: list[dict]) -> str:
    return json.dumps([{k: _jsonable(v) for k, v in r.items()} for r in records], indent=2, sort_keys=True) + "\n"


def _stationary(cfg: ExperimentConfig):
    k = cfg.multiplicities()
    alpha, beta = alpha_beta_from_k(k)
    tuning = ensemble.Tuning(burn_in=cfg.burn_in, thin=cfg.thin, chains=cfg.chains)
    sample = ensemble.mcmc_sample(k, cfg.N, cfg.S, cfg.seed, tuning, workers=cfg.workers)
    e_z = esym_at_z(cfg.N, alpha, beta)
    rows, summary = [], []
    for n in range(1, cfg.N + 1):
        est, se = ensemble.moment_estimate(sample, ensemble.esym_observable(n))
        row = _stat_row(f"stationary_e{n}", None, est, se, e_z[n], cfg.z_max)
        rows.append(row)
        summary.append({"observable": f"e{n}", "estimate": est, "stderr": se, "predicted": row.predicted, "zscore": row.zscore})
    mono = monic_jacobi(cfg.N, alpha, beta)
    for y in cfg.y_values:
        est, se = ensemble.moment_estimate(sample, ensemble.charpoly_observable(y))
        row = _stat_row(f"stationary_charpoly_y{y:g}", None, est, se, mono(y), cfg.z_max)
        rows.append(row)
        summary.append({"observable": f"charpoly(y={y:g})", "estimate": est, "stderr": se, "predicted": row.predicted, "zscore": row.zscore})
    artifacts = {"sample.csv": ensemble.sample_csv(sample), "summary.json": summary_json(summary)}
    if cfg.ks_check:
        one = ensemble.mcmc_sample(k, 1, cfg.S, cfg.seed, tuning, workers=cfg.workers)
        stat, crit, _ = ensemble.ks_marginal(one)
        rows.append(ReportRow("ks_N1_marginal", None, stat, None, crit, None, "bound"))
    # alternative closed-form moments for alpha == beta, next to the canonical ones
    a2 = alpha
    rows.append(ReportRow("printed_parity_N2_e2_vs_canonical", None, remark45_parity(2, a2, 2), None, float(esym_at_z(2, a2, a2)[2]), None, "info"))
    if math.isclose(alpha, beta):
        e_sym = esym_at_z(cfg.N, alpha, alpha)
        for n in range(1, cfg.N + 1):
            rows.append(
                ReportRow(f"printed_parity_N{cfg.N}_e{n}_vs_canonical", None, remark45_parity(cfg.N, alpha, n), None, float(e_sym[n]), None, "info")
            )
    return rows, artifacts


_RUNNERS = {
    "coeffs": _coeffs,
    "zeros": _zeros,
    "martingale": lambda c: _monte_carlo(c, True),
    "charpoly": lambda c: _monte_carlo(c, False),
    "eigen": _eigen,
    "stationary": _stationary,
    "ode": _ode,
}


def run(cfg: ExperimentConfig, out_dir=None, fmt: str = "csv") -> VerificationReport:
    """Execute one experiment; write the report and its artifacts to ``out_dir``."""
    cfg.check()
    t0 = time.perf_counter()
    numeric_error = None
    try:
        rows, artifacts = _RUNNERS[cfg.kind](cfg)
    except NumericError as exc:
        rows, artifacts, numeric_error = [], {}, str(exc)
    except (DomainError, SingularityError) as exc:
        raise ConfigError(str(exc)) from exc
    report = VerificationReport(cfg.kind, rows, cfg.echo(), numeric_error=numeric_error, artifacts=artifacts)
    report.wall_time = time.perf_counter() - t0
    log.info("%s: pass=%s max|z|=%.3f wall=%.2fs", cfg.kind, report.passed, report.max_abs_z, report.wall_time)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"report.{fmt}").write_bytes(report_render(report, fmt))
        for name, text in artifacts.items():
            (out / name).write_text(text)
    return report
