"""Parameter triples for the Jacobi process and conversions between them.

Three coordinate systems are in use:

* multiplicities ``(k1, k2, k3)`` of the BC_N root system,
* the SDE parameters ``(kappa, p, q)``,
* the classical Jacobi indices ``(alpha, beta) = (q - N, p - N)``.

``kappa`` may be ``math.inf`` (the deterministic limit); ``1/inf`` is 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

INFINITY = math.inf


def inv_kappa(kappa: float) -> float:
    return 0.0 if math.isinf(kappa) else 1.0 / kappa


@dataclass(frozen=True)
class Params:
    """Particle count ``N`` with the SDE parameters ``kappa``, ``p``, ``q``.

    Construction does not enforce the admissibility bounds; use
    :func:`validate` to get a report.
    """

    N: int
    kappa: float
    p: float
    q: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be an integer >= 1, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))

    @property
    def alpha(self) -> float:
        return self.q - self.N

    @property
    def beta(self) -> float:
        return self.p - self.N

    @property
    def deterministic(self) -> bool:
        return math.isinf(self.kappa)

    def with_kappa(self, kappa: float) -> "Params":
        return Params(self.N, kappa, self.p, self.q)


@dataclass(frozen=True)
class MultiplicityParams:
    k1: float
    k2: float
    k3: float

    def in_stationary_regime(self) -> bool:
        return self.k3 > 0 and self.k2 > -0.5 and self.k1 + self.k2 > -0.5

    def rho(self, N: int) -> np.ndarray:
        """Coordinates ``rho(k)_i = (k1 + 2 k2 + 2 k3 (N - i)) / 2`` for i = 1..N."""
        i = np.arange(1, N + 1)
        return (self.k1 + 2 * self.k2 + 2 * self.k3 * (N - i)) / 2.0


@dataclass(frozen=True)
class RegimeReport:
    valid: bool
    zeros_start_ok: bool
    nonattainment: bool
    bound_valid: float
    bound_nonattainment: float


def convert_k_to_pq(k: MultiplicityParams, N: int) -> Params:
    if not k.k3 > 0:
        raise DomainError(f"k3 must be positive, got {k.k3}")
    q = N - 1 + (1 + 2 * k.k1 + 2 * k.k2) / (2 * k.k3)
    p = N - 1 + (1 + 2 * k.k2) / (2 * k.k3)
    return Params(N, k.k3, p, q)


def convert_pq_to_k(params: Params) -> MultiplicityParams:
    """Inverse of :func:`convert_k_to_pq`; requires finite kappa."""
    kappa = params.kappa
    if not (kappa > 0) or math.isinf(kappa):
        raise DomainError(f"multiplicities need a finite positive kappa, got {kappa}")
    k3 = kappa
    k2 = ((params.p - params.N + 1) * 2 * k3 - 1) / 2
    k1 = k3 * (params.q - params.p)
    return MultiplicityParams(k1, k2, k3)


def alpha_beta(params: Params) -> tuple[float, float]:
    return params.q - params.N, params.p - params.N


def alpha_beta_from_k(k: MultiplicityParams) -> tuple[float, float]:
    """Jacobi indices of the stationary mean characteristic polynomial."""
    if not k.k3 > 0:
        raise DomainError(f"k3 must be positive, got {k.k3}")
    alpha = (1 + 2 * k.k1 + 2 * k.k2) / (2 * k.k3) - 1
    beta = (1 + 2 * k.k2) / (2 * k.k3) - 1
    return alpha, beta


def validate(params: Params) -> RegimeReport:
    N, kappa, p, q = params.N, params.kappa, params.p, params.q
    kappa_ok = kappa > 0
    ik = inv_kappa(kappa) if kappa_ok else math.nan
    bound_valid = N - 1 + ik
    bound_na = N - 1 + 2 * ik
    valid = bool(kappa_ok and p > bound_valid and q > bound_valid)
    zeros_ok = bool(p > N - 1 and q > N - 1)
    nonattainment = bool(kappa_ok and kappa >= 1 and p >= bound_na and q >= bound_na)
    return RegimeReport(valid, zeros_ok, nonattainment, bound_valid, bound_na)
