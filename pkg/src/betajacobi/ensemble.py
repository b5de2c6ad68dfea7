"""Random-walk Metropolis sampling of the beta-Jacobi ensemble on the alcove.

Target density (unnormalized) on ``-1 < x_1 < ... < x_N < 1``::

    prod_i (1 - x_i)^(k1 + k2 - 1/2) (1 + x_i)^(k2 - 1/2) * prod_{i<j} |x_i - x_j|^(2 k3)

Chains are advanced together as a batch but each one consumes only its own
random stream, so the draws do not depend on how chains are grouped.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError
from .jacobi1d import jacobi_zeros
from .params import MultiplicityParams, alpha_beta_from_k
from .streams import CHAINS, stream
from .sympoly import charpoly_from_esym, esym_all


def log_density_unnormalized(k: MultiplicityParams, x):
    """Log of the ensemble weight; ``-inf`` off the open alcove or at ties."""
    x = np.asarray(x, dtype=float)
    N = x.shape[-1]
    a = k.k1 + k.k2 - 0.5
    b = k.k2 - 0.5
    inside = np.all(np.abs(x) < 1, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.zeros(x.shape[:-1])
        for i in range(N):
            xi = x[..., i]
            out = out + a * np.log1p(-xi) + b * np.log1p(xi)
        for i in range(N):
            for j in range(i + 1, N):
                gap = np.abs(x[..., j] - x[..., i])
                inside = inside & (gap > 0)
                out = out + 2 * k.k3 * np.log(gap)
    out = np.where(inside, out, -np.inf)
    return out if out.shape else float(out)


@dataclass(frozen=True)
class Tuning:
    burn_in: int = 10_000
    thin: int = 10
    chains: int = 8
    initial_scale: float = 0.1
    target: tuple[float, float] = (0.25, 0.35)
    adapt_every: int = 100


@dataclass
class EnsembleSample:
    draws: np.ndarray
    chain: np.ndarray
    k: MultiplicityParams
    seed: int
    tuning: Tuning
    scales: np.ndarray
    acceptance: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def S(self) -> int:
        return self.draws.shape[0]

    @property
    def N(self) -> int:
        return self.draws.shape[1]

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.acceptance))


def _draws_per_chain(S: int, chains: int) -> list[int]:
    base, extra = divmod(S, chains)
    return [base + (c < extra) for c in range(chains)]


def _run_chains(args):
    k, N, seed, tuning, chain_ids, counts, start = args
    C = len(chain_ids)
    gens = [stream(seed, c, CHAINS) for c in chain_ids]
    x = np.tile(start, (C, 1))
    lp = log_density_unnormalized(k, x)
    scale = np.full(C, tuning.initial_scale)
    counts = np.asarray(counts)
    total = tuning.burn_in + tuning.thin * int(counts.max())
    out = np.empty((C, int(counts.max()), N))
    window = np.zeros(C)
    accepted = np.zeros(C)
    lo, hi = tuning.target
    step = 0
    while step < total:
        chunk = min(1024, total - step)
        z = np.stack([g.standard_normal((chunk, N)) for g in gens], axis=1)
        u = np.stack([g.random(chunk) for g in gens], axis=1)
        for c in range(chunk):
            prop = np.sort(x + scale[:, None] * z[c], axis=-1)
            lpp = log_density_unnormalized(k, prop)
            with np.errstate(divide="ignore"):
                acc = np.log(u[c]) < lpp - lp
            x = np.where(acc[:, None], prop, x)
            lp = np.where(acc, lpp, lp)
            step += 1
            if step <= tuning.burn_in:
                window += acc
                if step % tuning.adapt_every == 0:
                    rate = window / tuning.adapt_every
                    scale = np.where(rate < lo, scale * 0.8, np.where(rate > hi, scale * 1.25, scale))
                    window[:] = 0
            else:
                accepted += acc
                j = step - tuning.burn_in
                if j % tuning.thin == 0:
                    out[:, j // tuning.thin - 1] = x
    post = total - tuning.burn_in
    return out, scale, accepted / post


def mcmc_sample(
    k: MultiplicityParams,
    N: int,
    S: int,
    seed: int = 0,
    tuning: Tuning | None = None,
    workers: int = 1,
) -> EnsembleSample:
    """Draw ``S`` thinned states from ``tuning.chains`` independent chains.

    Chains start at the zeros of the Jacobi polynomial with the stationary
    indices and tune their proposal scale during burn-in only.
    """
    if not k.in_stationary_regime():
        raise DomainError(f"need k3 > 0, k2 > -1/2, k1 + k2 > -1/2; got {k}")
    tuning = tuning or Tuning()
    if S < 1 or tuning.chains < 1 or tuning.thin < 1:
        raise DomainError("S, chains and thin must be positive")
    alpha, beta = alpha_beta_from_k(k)
    start = jacobi_zeros(N, alpha, beta)
    counts = _draws_per_chain(S, tuning.chains)
    groups = np.array_split(np.arange(tuning.chains), max(1, min(workers, tuning.chains)))
    jobs = [(k, N, seed, tuning, g.tolist(), [counts[c] for c in g], start) for g in groups if len(g)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_chains, jobs))
    else:
        results = [_run_chains(j) for j in jobs]
    draws, chain_of, scales, acc = [], [], [], []
    for job, (out, sc, ac) in zip(jobs, results):
        for local, c in enumerate(job[4]):
            draws.append(out[local, : counts[c]])
            chain_of.append(np.full(counts[c], c))
        scales.append(sc)
        acc.append(ac)
    return EnsembleSample(
        draws=np.concatenate(draws),
        chain=np.concatenate(chain_of),
        k=k,
        seed=seed,
        tuning=tuning,
        scales=np.concatenate(scales),
        acceptance=np.concatenate(acc),
    )


def esym_observable(n: int):
    return lambda draws: esym_all(draws)[:, n]


def charpoly_observable(y: float):
    return lambda draws: charpoly_from_esym(esym_all(draws), y)


def moment_estimate(sample: EnsembleSample, observable, batches_per_chain: int = 20):
    """Mean of ``observable(draws)`` with a batch-means standard error.

    Batches are contiguous blocks within each chain, so serial correlation
    inside a chain inflates the error bar as it should.
    """
    if sample.S < 100:
        raise DomainError(f"need at least 100 draws for a moment estimate, got {sample.S}")
    vals = np.asarray(observable(sample.draws), dtype=float)
    means = []
    for c in np.unique(sample.chain):
        v = vals[sample.chain == c]
        nb = max(1, min(batches_per_chain, len(v) // 5))
        means.extend(b.mean() for b in np.array_split(v, nb))
    means = np.asarray(means)
    if len(means) < 2:
        raise DomainError("too few batches for a standard error")
    return float(vals.mean()), float(means.std(ddof=1) / math.sqrt(len(means)))


def ks_marginal(sample: EnsembleSample, level: float = 0.01):
    """Kolmogorov-Smirnov test of an ``N = 1`` sample against the normalized weight.

    Returns ``(statistic, critical_value, p_value)``.
    """
    if sample.N != 1:
        raise DomainError("the marginal KS test applies to N = 1")
    a = sample.k.k1 + sample.k.k2 - 0.5
    b = sample.k.k2 - 0.5
    dist = stats.beta(b + 1, a + 1, loc=-1.0, scale=2.0)
    res = stats.kstest(sample.draws[:, 0], dist.cdf)
    crit = float(stats.kstwo.ppf(1 - level, sample.S))
    return float(res.statistic), crit, float(res.pvalue)


def sample_csv(sample: EnsembleSample) -> str:
    buf = io.StringIO()
    buf.write(",".join(["draw"] + [f"x_{i + 1}" for i in range(sample.N)]) + "\n")
    for d, row in enumerate(sample.draws):
        buf.write(f"{d}," + ",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()
