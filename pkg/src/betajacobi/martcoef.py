"""Martingales built from elementary symmetric polynomials.

For ``r_n = n (p + q - n + 1)`` the process ``exp(r_n t) q_n(X_t)`` with
``q_n = e_n + sum_l c_{n,l} e_{n-l}`` is a martingale for the normalized
Jacobi process, whatever the value of ``kappa``. The rows of the unit lower
triangular matrix ``T`` hold the ``q_n`` in the ``e``-basis, so that
``E[e(X_t)] = T^-1 diag(exp(-r t)) T e(x0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateParameterError, DomainError
from .jacobi1d import gen_binom, monic_jacobi, poch
from .sympoly import esym_all


def rate_r(n: int, p: float, q: float) -> float:
    return n * (p + q - n + 1)


def _rate_gap(n: int, l: int, p: float, q: float) -> float:
    gap = l * (p + q - 2 * n + l + 1)
    if gap == 0:
        raise DegenerateParameterError(
            f"r_{n} == r_{n - l} for p + q = {p + q}; no martingale coefficients"
        )
    return gap


def esym_drift(m: int, r: float, N: int, p: float, q: float) -> dict[int, float]:
    """Drift of ``exp(r t) e_m`` as ``{index: coefficient}`` on the e-basis.

    ``d(exp(rt) e_m) = dM + exp(rt) [(r - r_m) e_m + (p-q)(N-m+1) e_{m-1}
    - (N-m+2)(N-m+1) e_{m-2}] dt``; terms with negative index are dropped.
    """
    out = {m: r - rate_r(m, p, q)}
    if m >= 1:
        out[m - 1] = (p - q) * (N - m + 1)
    if m >= 2:
        out[m - 2] = -(N - m + 2) * (N - m + 1)
    return out


def mart_coeffs(N: int, n: int, p: float, q: float) -> np.ndarray:
    """Coefficients ``c_{n,0..n}`` that cancel the drift of ``exp(r_n t) q_n``.

    The ``e_{n-l}`` component of the drift is
    ``c_l (r_n - r_{n-l}) + c_{l-1} (p-q)(N-n+l) - c_{l-2} (N-n+l)(N-n+l-1)``,
    which is solved forward in ``l``.
    """
    if not 0 <= n <= N:
        raise DomainError(f"need 0 <= n <= N, got n={n}, N={N}")
    c = np.zeros(n + 1)
    c[0] = 1.0
    for l in range(1, n + 1):
        m = N - n + l
        acc = -(p - q) * m * c[l - 1]
        if l >= 2:
            acc += m * (m - 1) * c[l - 2]
        c[l] = acc / _rate_gap(n, l, p, q)
    return c


def mart_coeffs_printed(N: int, n: int, p: float, q: float) -> np.ndarray:
    """Alternative recurrence with flipped signs, for the discrepancy report.

    With ``p == q`` the matching closed form ``printed_closed_form`` is used.
    """
    if p == q:
        return printed_closed_form(N, n, p, q)
    c = np.zeros(n + 1)
    c[0] = 1.0
    for l in range(1, n + 1):
        m = N - n + l
        acc = (p - q) * m * c[l - 1]
        if l >= 2:
            acc -= m * (m + 1) * c[l - 2]
        c[l] = acc / _rate_gap(n, l, p, q)
    return c


def printed_closed_form(N: int, n: int, p: float, q: float) -> np.ndarray:
    """Alternative closed form for ``p == q``: zero odd entries and
    ``c_{n,2l} = (-1)^l (N-n+2)_{2l} / (l! 2^l prod_{i<=l} (p+q-2n+2i+1))``."""
    c = np.zeros(n + 1)
    c[0] = 1.0
    for l in range(1, n // 2 + 1):
        den = math.factorial(l) * 2**l
        for i in range(1, l + 1):
            den *= p + q - 2 * n + 2 * i + 1
        if den == 0:
            raise DegenerateParameterError(f"vanishing denominator at n={n}, l={l}")
        c[2 * l] = (-1) ** l * poch(N - n + 2, 2 * l) / den
    return c


@dataclass(frozen=True)
class MartingaleSystem:
    N: int
    p: float
    q: float
    r: np.ndarray
    T: np.ndarray

    @classmethod
    def build(cls, N: int, p: float, q: float) -> "MartingaleSystem":
        r = np.array([rate_r(n, p, q) for n in range(N + 1)], dtype=float)
        T = np.zeros((N + 1, N + 1))
        for n in range(N + 1):
            c = mart_coeffs(N, n, p, q)
            T[n, n::-1] = c
        r.setflags(write=False)
        T.setflags(write=False)
        return cls(N, float(p), float(q), r, T)

    def coeffs(self, n: int) -> np.ndarray:
        """``q_n`` as a vector over ``e_0..e_N``."""
        return self.T[n].copy()


def q_n_eval(sys: MartingaleSystem, n: int, x):
    e = esym_all(x)
    return e @ sys.T[n]


def expected_esym_curve(sys: MartingaleSystem, x0, t: float) -> np.ndarray:
    """Exact ``E[e(X~_t)]`` for the normalized process started at ``x0``.

    For the original process at time ``t`` pass ``kappa * t``.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    e0 = esym_all(x0)
    v = np.exp(-sys.r * t) * (sys.T @ e0)
    return solve_triangular(sys.T, v, lower=True, unit_diagonal=True)


def transfer_coefficients(sys: MartingaleSystem, x0) -> np.ndarray:
    """Matrix ``A`` with ``E[e_n(X~_t)] = sum_l A[n, l] exp(-r_l t)``."""
    w = sys.T @ esym_all(x0)
    Tinv = solve_triangular(sys.T, np.eye(sys.N + 1), lower=True, unit_diagonal=True)
    return Tinv * w[None, :]


def esym_at_z(N: int, alpha: float, beta: float) -> np.ndarray:
    """``e_n`` of the zeros of ``P_N^(alpha, beta)`` from the explicit coefficient sum."""
    if not (alpha > -1 and beta > -1):
        raise DomainError(f"need alpha, beta > -1, got ({alpha}, {beta})")
    s = alpha + beta
    pref = 2.0**N / gen_binom(2 * N + s, N)
    out = np.empty(N + 1)
    for n in range(N + 1):
        acc = 0.0
        for l in range(N - n, N + 1):
            acc += (
                (-1) ** (N - l)
                * math.comb(N, l)
                * math.comb(l, N - n)
                * poch(N + s + 1, l)
                * poch(alpha + l + 1, N - l)
                / (math.factorial(N) * 2.0**l)
            )
        out[n] = pref * acc
    out[0] = 1.0  # the n = 0 sum equals one up to rounding
    return out


def esym_at_z_recursive(sys: MartingaleSystem) -> np.ndarray:
    """``e_n(z)`` from ``q_n(z) = 0``: ``e_n(z) = -sum_{l>=1} c_{n,l} e_{n-l}(z)``."""
    e = np.zeros(sys.N + 1)
    e[0] = 1.0
    for n in range(1, sys.N + 1):
        e[n] = -(sys.T[n, :n] @ e[:n])
    return e


def remark45_parity(N: int, alpha: float, n: int) -> float:
    """Alternative closed form for ``e_n(z)`` at ``alpha == beta``, kept for comparison.

    ``n`` indexes the elementary symmetric polynomial. For ``N = 2R`` the
    formula covers ``e_{2m}``; for ``N = 2R + 1`` it covers ``e_{2m+1}`` and
    sets the even-index values to zero. The expression is evaluated as is,
    including outside that index range. It disagrees with ``esym_at_z``.
    """
    R = N // 2
    if N % 2 == 0:
        if n % 2 == 1:
            return 0.0
        m, shift = n // 2, 0.5
    else:
        if n % 2 == 0:
            return 0.0
        m, shift = (n - 1) // 2, 1.5
    if m > R:
        return 0.0
    ratio = poch(2 * R + alpha + shift - m, m) / poch(shift + R - m, m)
    return (-1) ** m * math.factorial(R) * math.factorial(m) / math.factorial(R - m) * ratio


def expected_charpoly(N: int, alpha: float, beta: float, y):
    return monic_jacobi(N, alpha, beta)(y)


def compare_printed(N: int, p: float, q: float) -> list[dict]:
    """Rows ``n, l, c_canonical, c_printed, abs_diff`` for ``1 <= l <= n <= N``."""
    rows = []
    for n in range(1, N + 1):
        canon = mart_coeffs(N, n, p, q)
        printed = mart_coeffs_printed(N, n, p, q)
        for l in range(1, n + 1):
            rows.append(
                {
                    "n": n,
                    "l": l,
                    "c_canonical": float(canon[l]) + 0.0,
                    "c_printed": float(printed[l]) + 0.0,
                    "abs_diff": float(abs(canon[l] - printed[l])),
                }
            )
    return rows
