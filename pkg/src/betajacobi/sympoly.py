"""Elementary symmetric polynomials and the Vieta expansion.

All functions broadcast over leading axes: a point set of shape ``(..., N)``
produces values of shape ``(..., N + 1)``.
"""
from __future__ import annotations

import numpy as np


def esym_all(x) -> np.ndarray:
    """Return ``(e_0, ..., e_N)`` of the coordinates in the last axis of ``x``."""
    x = np.asarray(x, dtype=float)
    N = x.shape[-1]
    e = np.zeros(x.shape[:-1] + (N + 1,))
    e[..., 0] = 1.0
    for j in range(N):
        xj = x[..., j]
        # descending so e[m - 1] is still the value without x_j
        for m in range(j + 1, 0, -1):
            e[..., m] = e[..., m] + xj * e[..., m - 1]
    return e


def esym_leave_one_out(x, j: int) -> np.ndarray:
    """Elementary symmetric values of ``x`` with coordinate ``j`` removed.

    ``j`` is 1-based (``1 <= j <= N``). The result has length ``N``.
    """
    x = np.asarray(x, dtype=float)
    N = x.shape[-1]
    if not 1 <= j <= N:
        raise IndexError(f"coordinate index {j} out of range 1..{N}")
    return esym_all(np.delete(x, j - 1, axis=-1))


def esym_gradient(x) -> np.ndarray:
    """Matrix ``G`` with ``G[n, i] = d e_n / d x_i = e_{n-1}(x without x_i)``.

    Row 0 is identically zero. Pure second derivatives of every ``e_n``
    vanish, since ``e_n`` is affine in each coordinate.
    """
    x = np.asarray(x, dtype=float)
    N = x.shape[-1]
    G = np.zeros(x.shape[:-1] + (N + 1, N))
    for i in range(N):
        G[..., 1:, i] = esym_leave_one_out(x, i + 1)
    return G


def charpoly_from_esym(e, y):
    """Evaluate ``sum_n (-1)^n e_n y^(N-n)``, i.e. ``prod_i (y - x_i)``."""
    e = np.asarray(e, dtype=float)
    y = np.asarray(y, dtype=float)
    N = e.shape[-1] - 1
    out = np.ones(np.broadcast_shapes(e.shape[:-1], y.shape))
    for n in range(1, N + 1):
        out = out * y + (-1) ** n * e[..., n]
    return out if out.shape else float(out)
