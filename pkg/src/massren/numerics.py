"""Small numerical helpers shared by the compute modules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_panels(edges, n: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights over consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    x, w = _legendre(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def geometric_edges(lo: float, hi: float, ratio: float = 2.0, start: float = 0.0) -> np.ndarray:
    """Panel edges start, lo, lo*ratio, ... up to hi (inclusive)."""
    if hi <= lo:
        return np.array([start, hi])
    n = int(np.ceil(np.log(hi / lo) / np.log(ratio)))
    return np.concatenate([[start], lo * ratio ** np.arange(n), [hi]])


def richardson(values, ratio: float, orders=None) -> tuple[float, float, np.ndarray]:
    """Richardson extrapolation of a sequence with error terms h^p1, h^p2, ...

    ``values[k]`` is sampled at h_k = h_0 / ratio**k.  Returns the best
    estimate, an error estimate (difference of the last two diagonal entries)
    and the full tableau.
    """
    values = np.asarray(values, dtype=complex if np.iscomplexobj(values) else float)
    n = len(values)
    if orders is None:
        orders = np.arange(1, n)
    table = np.full((n, n), np.nan, dtype=values.dtype)
    table[:, 0] = values
    for j in range(1, n):
        fac = ratio ** orders[j - 1]
        table[j:, j] = table[j:, j - 1] + (table[j:, j - 1] - table[j - 1:-1, j - 1]) / (fac - 1.0)
    best = table[n - 1, n - 1]
    err = abs(table[n - 1, n - 1] - table[n - 1, n - 2]) if n > 1 else np.inf
    return best, float(err), table


def central_derivatives(y: np.ndarray, dt: float, order: int) -> np.ndarray:
    """Derivative of uniform samples along axis 0, 4th-order accurate.

    Interior points use 5-point central stencils; the two points at each edge
    use one-sided 4th-order stencils.
    """
    y = np.asarray(y, dtype=float)
    if order == 0:
        return y.copy()
    if order == 1:
        c = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
        fwd = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
        fwd1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
    elif order == 2:
        c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
        fwd = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0
        fwd1 = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0
    else:
        return central_derivatives(central_derivatives(y, dt, order - 1), dt, 1)
    n = y.shape[0]
    if n < len(fwd) + 1:
        raise ValueError("too few samples for a 4th-order stencil")
    out = np.empty_like(y)
    out[2:-2] = sum(ck * y[k:n - 4 + k] for k, ck in enumerate(c))
    # one-sided stencils at both edges (sign flips for odd derivatives)
    sgn = -1.0 if order % 2 else 1.0
    out[0] = np.tensordot(fwd, y[:len(fwd)], axes=1)
    out[1] = np.tensordot(fwd1, y[:len(fwd1)], axes=1)
    out[-1] = sgn * np.tensordot(fwd, y[::-1][:len(fwd)], axes=1)
    out[-2] = sgn * np.tensordot(fwd1, y[::-1][:len(fwd1)], axes=1)
    return out / dt**order


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of log|y| against log x, with max abs residual."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y)))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(coef[0]), float(np.max(np.abs(A @ coef - ly)))


def linear_fit(x, y) -> tuple[float, float, float]:
    """Fit y = a x + b; returns (a, b, R^2)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((A @ coef - y) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2
