"""Classical Jacobi polynomials P_n^(alpha, beta) on [-1, 1].

Evaluation uses the three-term recurrence in the degree. Zeros are found by
Newton's method with deflation, and the electrostatic equilibrium residual
serves as an independent certificate for them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, SingularityError


def _check_indices(alpha: float, beta: float) -> None:
    if not (alpha > -1 and beta > -1):
        raise DomainError(f"need alpha, beta > -1, got ({alpha}, {beta})")


def lgamma_signed(x: float) -> tuple[float, int]:
    """``(log|Gamma(x)|, sign Gamma(x))``; raises at the poles."""
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"Gamma has a pole at {x}")
    sign = 1 if x > 0 else (-1) ** math.ceil(-x)
    return math.lgamma(x), sign


def gen_binom(a: float, k: int) -> float:
    """Generalized binomial coefficient ``C(a, k)`` for real ``a``, integer ``k >= 0``."""
    la, sa = lgamma_signed(a + 1)
    lk, _ = lgamma_signed(k + 1)
    lb, sb = lgamma_signed(a - k + 1)
    return sa * sb * math.exp(la - lk - lb)


def poch(a: float, k: int) -> float:
    """Rising factorial ``(a)_k``."""
    out = 1.0
    for i in range(k):
        out *= a + i
    return out


def _recurrence_terms(k: int, alpha: float, beta: float):
    s = alpha + beta
    a1 = 2 * k * (k + s) * (2 * k + s - 2)
    a2 = (2 * k + s - 1) * (alpha * alpha - beta * beta)
    a3 = (2 * k + s - 2) * (2 * k + s - 1) * (2 * k + s)
    a4 = 2 * (k + alpha - 1) * (k + beta - 1) * (2 * k + s)
    return a1, a2, a3, a4


def jacobi_eval(n: int, alpha: float, beta: float, y):
    """Value of ``P_n^(alpha, beta)(y)``; ``y`` may be an array."""
    _check_indices(alpha, beta)
    y = np.asarray(y, dtype=float)
    prev = np.ones_like(y)
    if n == 0:
        return prev if prev.shape else float(prev)
    cur = (alpha + 1) + (alpha + beta + 2) * (y - 1) / 2
    for k in range(2, n + 1):
        a1, a2, a3, a4 = _recurrence_terms(k, alpha, beta)
        prev, cur = cur, ((a2 + a3 * y) * cur - a4 * prev) / a1
    return cur if cur.shape else float(cur)


def jacobi_deriv(n: int, alpha: float, beta: float, y):
    if n == 0:
        return np.zeros_like(np.asarray(y, dtype=float))
    return 0.5 * (n + alpha + beta + 1) * jacobi_eval(n - 1, alpha + 1, beta + 1, y)


def jacobi_coeffs(n: int, alpha: float, beta: float) -> np.ndarray:
    """Monomial coefficients of ``P_n^(alpha, beta)``, ascending powers."""
    _check_indices(alpha, beta)
    prev = np.array([1.0])
    if n == 0:
        return prev
    cur = np.array([(alpha + 1) - (alpha + beta + 2) / 2, (alpha + beta + 2) / 2])
    for k in range(2, n + 1):
        a1, a2, a3, a4 = _recurrence_terms(k, alpha, beta)
        nxt = np.zeros(k + 1)
        nxt[:k] += a2 * cur
        nxt[1:] += a3 * cur
        nxt[: k - 1] -= a4 * prev
        prev, cur = cur, nxt / a1
    return cur


def leading_coeff(N: int, alpha: float, beta: float) -> float:
    """``2^-N * C(2N + alpha + beta, N)``, the leading coefficient of ``P_N``."""
    s = alpha + beta
    lnum, snum = lgamma_signed(2 * N + s + 1)
    lden, sden = lgamma_signed(N + s + 1)
    return snum * sden * math.exp(lnum - math.lgamma(N + 1) - lden - N * math.log(2.0))


@dataclass(frozen=True)
class JacobiPoly:
    """Monic Jacobi polynomial; ``coeffs`` in ascending powers, ``coeffs[-1] == 1``."""

    n: int
    alpha: float
    beta: float
    coeffs: np.ndarray

    def __call__(self, y):
        out = np.polynomial.polynomial.polyval(np.asarray(y, dtype=float), self.coeffs)
        return out if np.ndim(out) else float(out)


def monic_jacobi(N: int, alpha: float, beta: float) -> JacobiPoly:
    c = jacobi_coeffs(N, alpha, beta)
    c = c / c[-1]
    c[-1] = 1.0
    return JacobiPoly(N, float(alpha), float(beta), c)


def _newton_deflated(N, alpha, beta, max_iter):
    lead = leading_coeff(N, alpha, beta)
    roots = []
    for i in range(1, N + 1):
        r = -math.cos((2 * i - 1) * math.pi / (2 * N))
        for _ in range(max_iter):
            f = jacobi_eval(N, alpha, beta, r) / lead
            fp = jacobi_deriv(N, alpha, beta, r) / lead
            s = sum(1.0 / (r - x) for x in roots)
            delta = f / (fp - f * s)
            r -= delta
            if not -1.0 < r < 1.0:
                return None
            if abs(delta) <= 4e-16 * max(1.0, abs(r)):
                break
        # one undeflated polishing step
        fp = jacobi_deriv(N, alpha, beta, r)
        if fp != 0:
            r -= jacobi_eval(N, alpha, beta, r) / fp
        roots.append(r)
    return np.array(roots)


def _bisection(N, alpha, beta, grid_factor=400):
    grid = -np.cos(np.linspace(0.0, math.pi, grid_factor * N + 1))[1:-1]
    vals = jacobi_eval(N, alpha, beta, grid)
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(a)
            continue
        if fa * fb > 0:
            continue
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = jacobi_eval(N, alpha, beta, m)
            if fm == 0 or b - a <= 2e-16:
                break
            if fa * fm < 0:
                b = m
            else:
                a, fa = m, fm
        roots.append(0.5 * (a + b))
    return np.array(roots)


def _acceptable(z, N):
    return (
        z is not None
        and len(z) == N
        and np.all(np.isfinite(z))
        and np.all(np.abs(z) < 1)
        and np.all(np.diff(z) > 0)
    )


def jacobi_zeros(N: int, alpha: float, beta: float, max_iter: int = 100) -> np.ndarray:
    """The ``N`` zeros of ``P_N^(alpha, beta)`` in increasing order."""
    _check_indices(alpha, beta)
    if N < 1:
        return np.empty(0)
    z = _newton_deflated(N, alpha, beta, max_iter)
    if _acceptable(z, N):
        return np.sort(z)
    z2 = _bisection(N, alpha, beta)
    if _acceptable(z2, N):
        return z2
    raise NumericError(
        f"could not locate the {N} zeros of P_{N}^({alpha},{beta})",
        {"newton": None if z is None else z.tolist(), "bisection": z2.tolist()},
    )


def stieltjes_residual(x, alpha: float, beta: float) -> np.ndarray:
    """Equilibrium residual whose unique root on the open alcove is the zero set."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1):
        raise SingularityError("coordinates must lie strictly inside (-1, 1)")
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, np.inf)
    if np.any(diff == 0):
        raise SingularityError("coincident coordinates")
    return (
        np.sum(1.0 / diff, axis=1)
        + (alpha + 1) / (2 * (x - 1))
        + (beta + 1) / (2 * (x + 1))
    )
