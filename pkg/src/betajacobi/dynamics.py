"""Trajectories of the Jacobi process on the alcove.

Euler-Maruyama for the SDE (normalized or original time scale), RK4 for the
deterministic ``kappa = inf`` limit, and exact evaluation of the generator on
linear combinations of elementary symmetric polynomials.

Boundary policy after every Euler step: spread pairs closer than
``TIE_GAP``, clamp to ``[-1 + BOUNDARY_EPS, 1 - BOUNDARY_EPS]`` and sort.
All observables are symmetric, so relabeling by sorting is invisible to them.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError, SingularityError
from .params import MultiplicityParams, Params, inv_kappa, validate
from .streams import PATHS, stream
from .sympoly import charpoly_from_esym, esym_all, esym_gradient

TIE_GAP = 1e-10
BOUNDARY_EPS = 1e-12
BOUNDARY_POLICY = f"spread<{TIE_GAP:g}+clamp({BOUNDARY_EPS:g})+sort"
DRIFT_FORMS = ("standard", "pairwise", "radial", "factorized")
_CHUNK_STEPS = 256


def default_dt(p: float, q: float) -> float:
    return min(1e-3, 0.1 / (p + q))


def _check_interior(x: np.ndarray) -> None:
    if np.any(np.abs(x) >= 1):
        raise SingularityError("coordinates must lie strictly inside (-1, 1)")
    N = x.shape[-1]
    for i in range(N):
        for j in range(i + 1, N):
            if np.any(x[..., i] == x[..., j]):
                raise SingularityError(f"tied coordinates {i + 1} and {j + 1}")


def _drift_unchecked(p: float, q: float, x: np.ndarray) -> np.ndarray:
    # pair loop with a fixed summation order, independent of batch layout
    N = x.shape[-1]
    out = (p - q) - (p + q) * x
    for i in range(N):
        for j in range(i + 1, N):
            xi, xj = x[..., i], x[..., j]
            term = 2.0 * (1.0 - xi * xj) / (xi - xj)
            out[..., i] += term
            out[..., j] -= term
    return out


def drift(params: Params, x, form: str = "standard") -> np.ndarray:
    """Drift of the normalized process at interior points ``x`` (shape ``(..., N)``)."""
    x = np.asarray(x, dtype=float)
    _check_interior(x)
    p, q, N = params.p, params.q, x.shape[-1]
    if form == "standard":
        return _drift_unchecked(p, q, x)
    diff = x[..., :, None] - x[..., None, :]
    off = ~np.eye(N, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        if form == "pairwise":
            num = (1 + x[..., :, None]) * (1 - x[..., None, :]) + (1 + x[..., None, :]) * (
                1 - x[..., :, None]
            )
            inter = np.where(off, num / diff, 0.0).sum(-1)
            return (p - q) - (p + q) * x + inter
        recip = np.where(off, 1.0 / diff, 0.0).sum(-1)
        if form == "radial":
            return (p - q) + (2 * (N - 1) - (p + q)) * x + 2 * (1 - x**2) * recip
        if form == "factorized":
            return (
                2
                * (1 - x**2)
                * (
                    (p - (N - 1)) / 2 / (x + 1)
                    + (q - (N - 1)) / 2 / (x - 1)
                    + recip
                )
            )
    raise ValueError(f"unknown drift form {form!r}; expected one of {DRIFT_FORMS}")


def _spread(x: np.ndarray) -> int:
    """Enforce a minimal gap between sorted neighbours in place; return the event count."""
    N = x.shape[-1]
    events = 0
    for i in range(1, N):
        close = x[..., i] - x[..., i - 1] < TIE_GAP
        if np.any(close):
            events += int(np.count_nonzero(close))
            x[..., i] = np.where(close, x[..., i - 1] + TIE_GAP, x[..., i])
    top = 1.0 - BOUNDARY_EPS
    if np.any(x[..., N - 1] > top):
        x[..., N - 1] = np.minimum(x[..., N - 1], top)
        for i in range(N - 2, -1, -1):
            x[..., i] = np.minimum(x[..., i], x[..., i + 1] - TIE_GAP)
    return events


def _clamp_sort(x: np.ndarray) -> np.ndarray:
    np.clip(x, -1.0 + BOUNDARY_EPS, 1.0 - BOUNDARY_EPS, out=x)
    x.sort(axis=-1)
    return x


def _step(p, q, drift_scale, noise_scale, x, dt, noise):
    x = np.array(x, dtype=float)
    events = _spread(x)
    b = _drift_unchecked(p, q, x)
    new = x + drift_scale * b * dt
    if noise_scale:
        new += noise_scale * np.sqrt(np.maximum(1.0 - x * x, 0.0)) * math.sqrt(dt) * noise
    return _clamp_sort(new), events


def _scales(params: Params, normalized: bool) -> tuple[float, float]:
    ik = inv_kappa(params.kappa)
    if normalized:
        return 1.0, math.sqrt(2.0 * ik)
    if params.deterministic:
        raise DomainError("the original time scale needs a finite kappa")
    return params.kappa, math.sqrt(2.0)


def euler_step(params: Params, x, dt: float, noise, normalized: bool = True) -> np.ndarray:
    """One Euler-Maruyama step followed by the boundary policy."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    ds, ns = _scales(params, normalized)
    new, _ = _step(params.p, params.q, ds, ns, x, dt, np.asarray(noise, dtype=float))
    return new


@dataclass
class PathEnsemble:
    grid: np.ndarray
    paths: np.ndarray
    seed: int
    dt: float
    kappa: float
    p: float
    q: float
    normalized: bool
    n_steps: int
    boundary_policy: str = BOUNDARY_POLICY
    spread_events: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.paths.shape[0]

    @property
    def N(self) -> int:
        return self.paths.shape[2]

    def esym(self) -> np.ndarray:
        return esym_all(self.paths)


def _simulate_block(args):
    p, q, ds, ns, x0, dt, n_steps, record, seed, replica, start, stop = args
    B, N = stop - start, len(x0)
    x = np.tile(np.asarray(x0, dtype=float), (B, 1))
    out = np.empty((B, len(record), N))
    slot = {k: i for i, k in enumerate(record)}
    if 0 in slot:
        out[:, slot[0]] = x
    gens = [stream(seed, i, PATHS, replica) for i in range(start, stop)] if ns else None
    events = 0
    step = 0
    while step < n_steps:
        chunk = min(_CHUNK_STEPS, n_steps - step)
        if gens is not None:
            noise = np.stack([g.standard_normal((chunk, N)) for g in gens], axis=1)
        for c in range(chunk):
            xi = noise[c] if gens is not None else 0.0
            x, ev = _step(p, q, ds, ns, x, dt, xi)
            events += ev
            step += 1
            if step in slot:
                out[:, slot[step]] = x
    return out, events


def simulate(
    params: Params,
    x0,
    t_max: float,
    dt: float | None = None,
    M: int = 1000,
    seed: int = 0,
    grid=None,
    normalized: bool = True,
    workers: int = 1,
    block_size: int = 1024,
    replica: int = 0,
) -> PathEnsemble:
    """Simulate ``M`` independent paths, recording states at the times in ``grid``.

    Path ``i`` draws its noise from the stream keyed by ``(seed, i)``; the
    output does not depend on ``workers`` or ``block_size``. Runs with distinct
    ``replica`` values use independent noise.
    """
    if not validate(params).valid:
        raise DomainError(f"parameters outside the admissible region: {params}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (params.N,):
        raise DomainError(f"x0 must have length {params.N}")
    _check_interior(x0)
    if np.any(np.diff(x0) <= 0):
        raise DomainError("x0 must be strictly increasing")
    dt = default_dt(params.p, params.q) if dt is None else float(dt)
    n_steps = int(round(t_max / dt))
    if n_steps < 1 or abs(n_steps * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise DomainError(f"t_max={t_max} is not a positive multiple of dt={dt}")
    if grid is None:
        grid = np.linspace(0.0, t_max, 11)
    grid = np.asarray(grid, dtype=float)
    record = [int(round(t / dt)) for t in grid]
    for t, k in zip(grid, record):
        if abs(k * dt - t) > 1e-9 * max(1.0, t) or not 0 <= k <= n_steps:
            raise DomainError(f"grid time {t} is not on the step lattice of dt={dt}")
    if record != sorted(set(record)):
        raise DomainError("grid must be strictly increasing")
    ds, ns = _scales(params, normalized)
    jobs = [
        (params.p, params.q, ds, ns, x0, dt, n_steps, record, seed, replica, s, min(s + block_size, M))
        for s in range(0, M, block_size)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_simulate_block, jobs))
    else:
        results = [_simulate_block(j) for j in jobs]
    paths = np.concatenate([r[0] for r in results], axis=0)
    events = sum(r[1] for r in results)
    return PathEnsemble(
        grid=grid,
        paths=paths,
        seed=seed,
        dt=dt,
        kappa=params.kappa,
        p=params.p,
        q=params.q,
        normalized=normalized,
        n_steps=n_steps,
        spread_events=events,
        meta={"replica": replica},
    )


def esym_moments(ens: PathEnsemble) -> list[dict]:
    """Rows ``t, n, estimate, stderr`` of the sample means of ``e_n``."""
    e = ens.esym()
    mean = e.mean(axis=0)
    se = e.std(axis=0, ddof=1) / math.sqrt(ens.M)
    rows = []
    for k, t in enumerate(ens.grid):
        for n in range(ens.N + 1):
            rows.append(
                {"t": float(t), "n": n, "estimate": float(mean[k, n]), "stderr": float(se[k, n])}
            )
    return rows


def charpoly_moments(ens: PathEnsemble, y: float) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and standard error of ``prod_i (y - X_i)`` on the grid."""
    vals = charpoly_from_esym(ens.esym(), y)
    return vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(ens.M)


def _fmt(v) -> str:
    return repr(float(v))


def trajectory_csv(ens: PathEnsemble) -> str:
    buf = io.StringIO()
    buf.write(",".join(["path", "t"] + [f"x_{i + 1}" for i in range(ens.N)]) + "\n")
    for m in range(ens.M):
        for k, t in enumerate(ens.grid):
            buf.write(f"{m},{_fmt(t)}," + ",".join(_fmt(v) for v in ens.paths[m, k]) + "\n")
    return buf.getvalue()


def moments_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write("t,n,estimate,stderr\n")
    for r in rows:
        buf.write(f"{_fmt(r['t'])},{r['n']},{_fmt(r['estimate'])},{_fmt(r['stderr'])}\n")
    return buf.getvalue()


def _ode_ok(x: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(x)) and np.all(np.abs(x) < 1) and np.all(np.diff(x) > 0))


def _rk4(p, q, x, h):
    k1 = _drift_unchecked(p, q, x)
    k2 = _drift_unchecked(p, q, x + 0.5 * h * k1)
    k3 = _drift_unchecked(p, q, x + 0.5 * h * k2)
    k4 = _drift_unchecked(p, q, x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_adaptive(p, q, x, h, depth):
    with np.errstate(divide="ignore", invalid="ignore"):
        new = _rk4(p, q, x, h)
    if _ode_ok(new):
        return new
    if depth == 0:
        raise NumericError("RK4 step collapsed coordinates", {"x": x.tolist(), "h": h})
    half = _rk4_adaptive(p, q, x, h / 2, depth - 1)
    return _rk4_adaptive(p, q, half, h / 2, depth - 1)


def ode_integrate(params: Params, x0, t_max: float, h: float = 1e-4, max_halvings: int = 20):
    """Classical RK4 for the ``kappa = inf`` dynamics; returns ``(times, states)``."""
    if not params.deterministic:
        raise DomainError("ode_integrate needs kappa = inf")
    if not (params.p > params.N - 1 and params.q > params.N - 1):
        raise DomainError("need p, q > N - 1")
    x = np.asarray(x0, dtype=float).copy()
    _check_interior(x)
    n = int(round(t_max / h))
    times = np.arange(n + 1) * h
    states = np.empty((n + 1, len(x)))
    states[0] = x
    for k in range(n):
        x = _rk4_adaptive(params.p, params.q, x, h, max_halvings)
        states[k + 1] = x
    return times, states


def generator_eigenvalue(k: MultiplicityParams, N: int, n: int) -> float:
    """``-<lam, lam + 2 rho(k)>`` for the partition with ``n`` ones."""
    lam = np.zeros(N)
    lam[:n] = 1.0
    return float(-lam @ (lam + 2 * k.rho(N)))


def generator_on_esym(k: MultiplicityParams, x) -> np.ndarray:
    """Vector ``(L_k e_0, ..., L_k e_N)`` at the interior point ``x``.

    Only the first-order part contributes: each ``e_m`` is affine in every
    coordinate, so its pure second derivatives vanish.
    """
    x = np.asarray(x, dtype=float)
    _check_interior(x)
    N = len(x)
    b = -k.k1 - (1 + k.k1 + 2 * k.k2) * x
    for i in range(N):
        for j in range(N):
            if j != i:
                b[i] += 2 * k.k3 * (1 - x[i] ** 2) / (x[i] - x[j])
    return esym_gradient(x) @ b


def apply_generator(k: MultiplicityParams, coeffs, x) -> float:
    """``L_k f(x)`` for ``f = sum_m coeffs[m] e_m``."""
    return float(np.asarray(coeffs, dtype=float) @ generator_on_esym(k, x))
