"""Mass ledger: bare mass, counterterm series and discarded vacuum constants."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import bisect


def divergent_mass(d: int, q: float, alpha: float, alpha0: float, c: float = 1.0) -> float:
    """The alpha-dependent mass shift absorbed into the bare mass."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if d == 2:
        return q * q / (4 * math.pi * c * c) * math.log(alpha / alpha0)
    if d == 3:
        return (4.0 / 3.0) * q * q / (c * c) * math.sqrt(alpha / (2 * math.pi))
    raise ValueError("dimension must be 2 or 3")


def bare_mass(d: int, m: float, q: float, alpha: float, alpha0: float, c: float = 1.0) -> float:
    return m - divergent_mass(d, q, alpha, alpha0, c)


def counterterm_ratio(d: int, m: float, q: float, alpha: float, alpha0: float, c: float = 1.0) -> float:
    """Geometric ratio r with m_bare = m (1 - r)."""
    return divergent_mass(d, q, alpha, alpha0, c) / m


@dataclass(frozen=True)
class CountertermSum:
    value: float
    ratio: float
    terms: int | None
    formal_series: bool


def counterterm_series(d: int, m: float, q: float, alpha: float, L: int | None,
                       alpha0: float = 1.0, c: float = 1.0) -> CountertermSum:
    """(1/2m) sum_{l=1}^{L} r^l; L=None is the convergent-mode limit.

    For |r| >= 1 only finite L is accepted and the result is flagged as a
    formal truncation.
    """
    r = counterterm_ratio(d, m, q, alpha, alpha0, c)
    formal = abs(r) >= 1.0
    if L is None:
        if formal:
            raise ValueError(f"|r| = {abs(r):.3g} >= 1: series not summable, give a truncation L")
        return CountertermSum(r / (1.0 - r) / (2 * m), r, None, False)
    if L < 1:
        raise ValueError("L must be >= 1")
    total, p = 0.0, 1.0
    for _ in range(L):
        p *= r
        total += p
    return CountertermSum(total / (2 * m), r, L, formal)


def p2_coefficient(d: int, m: float, q: float, alpha: float, alpha0: float, c: float = 1.0) -> float:
    """O(q^2) coefficient of p^2 in the Hamiltonian counterterm."""
    return counterterm_series(d, m, q, alpha, 1, alpha0, c).value


def discarded_vacuum_constant(d: int, alpha: float, q: float, m: float,
                              hbar: float = 1.0, c: float = 1.0) -> float:
    """j-independent divergent constant dropped from the level energies."""
    if d == 2:
        return q * q * hbar / (2 * m * c) * math.sqrt(alpha / (2 * math.pi))
    if d == 3:
        return q * q * hbar / (math.pi * m * c) * alpha
    raise ValueError("dimension must be 2 or 3")


def sign_flip_alpha(d: int, m: float, q: float, alpha0: float, c: float = 1.0) -> tuple[float, float]:
    """alpha* where the bare mass vanishes: (bisection root, closed form)."""
    if q == 0:
        raise ValueError("no sign flip for q = 0")
    if d == 3:
        closed = 2 * math.pi * (3 * m * c * c / (4 * q * q)) ** 2
    else:
        closed = alpha0 * math.exp(4 * math.pi * m * c * c / (q * q))
    f = lambda la: bare_mass(d, m, q, math.exp(la), alpha0, c)
    lo, hi = math.log(closed) - 5.0, math.log(closed) + 5.0
    while f(lo) < 0:
        lo -= 5.0
    while f(hi) > 0:
        hi += 5.0
    root = math.exp(bisect(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500))
    return root, closed


@dataclass(frozen=True)
class MassLedger:
    d: int
    m: float
    q: float
    alpha: float
    alpha0: float
    L: int = 1
    c: float = 1.0

    @property
    def m_bare(self) -> float:
        return bare_mass(self.d, self.m, self.q, self.alpha, self.alpha0, self.c)

    @property
    def identity_residual(self) -> float:
        return self.m_bare + divergent_mass(self.d, self.q, self.alpha, self.alpha0, self.c) - self.m

    def row(self) -> dict:
        ct = counterterm_series(self.d, self.m, self.q, self.alpha, self.L, self.alpha0, self.c)
        return {
            "alpha": self.alpha,
            "m_bare": self.m_bare,
            "counterterm_q2": p2_coefficient(self.d, self.m, self.q, self.alpha, self.alpha0, self.c),
            "counterterm_L": ct.value,
            "formal_series": ct.formal_series,
            "discarded_constant": discarded_vacuum_constant(self.d, self.alpha, self.q, self.m, c=self.c),
        }
