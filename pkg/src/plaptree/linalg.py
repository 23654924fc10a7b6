"""Dense symmetric eigen-machinery: Householder reduction, Sturm bisection,
inverse iteration.  Used only by the linear (p = 2) reference solver."""

from __future__ import annotations

import math

import numpy as np


def householder_tridiagonal(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a symmetric matrix to tridiagonal form by Householder reflections.

    Returns the diagonal ``d`` (length n) and off-diagonal ``e`` (length n-1)
    of a tridiagonal matrix orthogonally similar to ``a``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    for k in range(n - 2):
        x = a[k + 1:, k]
        alpha = -math.copysign(np.linalg.norm(x), x[0]) if x[0] != 0 else -np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] -= alpha
        vnorm2 = v @ v
        if vnorm2 == 0.0:
            continue
        sub = a[k + 1:, k + 1:]
        # A <- H A H with H = I - 2 v v^T / (v^T v), as a symmetric rank-2 update
        pvec = sub @ v * (2.0 / vnorm2)
        kvec = pvec - v * ((v @ pvec) / vnorm2)
        sub -= np.outer(v, kvec) + np.outer(kvec, v)
        a[k + 1, k] = a[k, k + 1] = alpha
        a[k + 2:, k] = 0.0
        a[k, k + 2:] = 0.0
    return np.diag(a).copy(), np.diag(a, 1).copy()


def sturm_count(d: np.ndarray, e: np.ndarray, x: float) -> int:
    """Number of eigenvalues of the tridiagonal matrix ``(d, e)`` below ``x``."""
    count = 0
    q = 1.0
    tiny = np.finfo(float).tiny
    for i in range(d.size):
        off = e[i - 1] * e[i - 1] if i else 0.0
        q = d[i] - x - (off / q if i else 0.0)
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
    return count


def smallest_eigenvalue(d: np.ndarray, e: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric tridiagonal matrix by bisection,
    refined until the bracket stops shrinking in floating point."""
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    radius = np.abs(np.concatenate(([0.0], e))) + np.abs(np.concatenate((e, [0.0])))
    lo = float(np.min(d - radius))
    hi = float(np.max(d + radius))
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sturm_count(d, e, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def inverse_iteration(a: np.ndarray, shift: float, steps: int = 3) -> np.ndarray:
    """Unit eigenvector of symmetric ``a`` for the eigenvalue nearest ``shift``."""
    n = a.shape[0]
    shifted = a - shift * np.eye(n)
    # keep the solve nonsingular when the shift is exact to working precision
    shifted += np.eye(n) * (np.finfo(float).eps * max(1.0, np.abs(a).max()) * n)
    v = np.ones(n) / math.sqrt(n)
    for _ in range(steps):
        v = np.linalg.solve(shifted, v)
        v /= np.linalg.norm(v)
    return v
