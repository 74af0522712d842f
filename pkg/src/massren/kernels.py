"""Regularized kernels of the Gaussian-smeared charge.

Units: hbar = c = 1 internally, so the Compton time is t~ = 1/m.  The ``c``
field is kept only so that formulas read like their textbook form.

The sine transform Xi_alpha has the Dawson-function representation

    Xi_alpha(s) = sqrt(2 alpha) * D(sqrt(alpha/2) s),

and every integral of Xi_alpha reduces to the Dawson integral
G(z) = int_0^z D(u) du, evaluated here by fixed Gauss-Legendre panels for
z <= 50 and by the integrated asymptotic series beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import dawsn

from .numerics import gauss_panels, richardson

_Z_ASYM = 25.0     # switch Xi to its 1/s series above this argument
_Z_G = 50.0        # switch the Dawson integral to its series above this
_ASYM_TERMS = 9
# (2n-1)!! for n = 0..8
_DFACT = np.array([1, 1, 3, 15, 105, 945, 10395, 135135, 2027025], dtype=float)

ZETA_LADDER = tuple(10.0 ** (2 + k / 2) for k in range(9))
ZETA_LADDER_ALT = tuple(10.0 ** (2.25 + k / 2) for k in range(9))


class ConvergenceError(RuntimeError):
    """A limit or extrapolation did not settle within tolerance."""


@dataclass(frozen=True)
class KernelContext:
    """Regulator and unit context shared by all kernels."""

    alpha: float
    m: float = 1.0
    eta: float = 1.0
    c: float = 1.0
    hbar: float = 1.0
    zeta: float = field(init=False)
    alpha0: float = field(init=False)

    def __post_init__(self):
        if not (self.alpha > 0 and self.eta > 0 and self.m > 0 and self.c > 0):
            raise ValueError("alpha, eta, m and c must be positive")
        z = zeta_const(self.m, self.c, self.hbar)
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "alpha0", math.exp(2.0 * self.c * z))

    @property
    def t_tilde(self) -> float:
        return self.hbar / (self.m * self.c**2)

    @property
    def t_c(self) -> float:
        return self.eta * self.t_tilde

    @property
    def K_scale(self) -> float:
        """Momentum split point sqrt(2 alpha0 e^{-gamma})."""
        return math.sqrt(2.0 * self.alpha0 * math.exp(-np.euler_gamma))

    def with_alpha(self, alpha: float) -> "KernelContext":
        return KernelContext(alpha=alpha, m=self.m, eta=self.eta, c=self.c, hbar=self.hbar)

    def with_eta(self, eta: float) -> "KernelContext":
        return KernelContext(alpha=self.alpha, m=self.m, eta=eta, c=self.c, hbar=self.hbar)


def rho_alpha(ctx: KernelContext, s):
    """sqrt(alpha/2pi) exp(-alpha s^2 / 2)."""
    s = np.asarray(s, dtype=float)
    return math.sqrt(ctx.alpha / (2 * math.pi)) * np.exp(-0.5 * ctx.alpha * s * s)


def rho_alpha_dd(ctx: KernelContext, s):
    """Second derivative of rho_alpha with respect to its argument."""
    s = np.asarray(s, dtype=float)
    a = ctx.alpha
    return math.sqrt(a / (2 * math.pi)) * np.exp(-0.5 * a * s * s) * (a * a * s * s - a)


def rho_moment(ctx: KernelContext, n: int) -> float:
    """int_0^inf tau^n d^2/dtau^2 rho_alpha(c tau) dtau, closed form."""
    a, c = ctx.alpha, ctx.c
    table = {
        0: 0.0,
        1: math.sqrt(a / (2 * math.pi)),
        2: 1.0 / c,
        3: (3.0 / c**2) * math.sqrt(2.0 / (math.pi * a)),
    }
    if n not in table:
        raise ValueError("moment order must be 0..3")
    return table[n]


def _dawson_series(z):
    """Asymptotic series of D(z) for large |z|."""
    inv2 = 1.0 / (2.0 * z * z)
    acc = np.zeros_like(z)
    for n in range(_ASYM_TERMS - 1, -1, -1):
        acc = acc * inv2 + _DFACT[n]
    return acc / (2.0 * z)


def dawson(z):
    """Dawson function with the large-argument series branch."""
    z = np.asarray(z, dtype=float)
    big = np.abs(z) > _Z_ASYM
    out = dawsn(np.where(big, 0.0, z))
    if np.any(big):
        out = np.where(big, _dawson_series(np.where(big, z, 1.0)), out)
    return out


def xi_alpha(ctx: KernelContext, s):
    """Xi_alpha(s) = int_0^inf sin(k s) exp(-k^2/2alpha) dk (odd in s)."""
    s = np.asarray(s, dtype=float)
    a = ctx.alpha
    return math.sqrt(2 * a) * dawson(math.sqrt(a / 2) * s)


def xi_alpha_d(ctx: KernelContext, s):
    """d Xi_alpha / ds = int_0^inf k cos(k s) exp(-k^2/2alpha) dk."""
    s = np.asarray(s, dtype=float)
    z = math.sqrt(ctx.alpha / 2) * s
    big = np.abs(z) > _Z_ASYM
    zz = np.where(big, 1.0, z)
    small = ctx.alpha * (1.0 - 2.0 * zz * dawsn(zz))
    if not np.any(big):
        return small
    # 1 - 2 z D(z) = -sum_{n>=1} (2n-1)!! / (2 z^2)^n for large z
    zb = np.where(big, z, 1.0)
    inv2 = 1.0 / (2.0 * zb * zb)
    acc = np.zeros_like(zb)
    for n in range(_ASYM_TERMS - 1, 0, -1):
        acc = (acc + _DFACT[n]) * inv2
    return np.where(big, -ctx.alpha * acc, small)


_GL_EDGES = np.array([0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, _Z_G]) / _Z_G
_GL_X, _GL_W = gauss_panels(_GL_EDGES, 40)


def _g_small(z: np.ndarray) -> np.ndarray:
    # int_0^z D(u) du via scaled panels on [0, z]
    u = z[..., None] * _GL_X
    return z * (dawsn(u) @ _GL_W)


@lru_cache(maxsize=1)
def _g_anchor() -> float:
    return float(_g_small(np.array(_Z_G)))


def dawson_integral(z):
    """G(z) = int_0^z D(u) du (even in z)."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z <= _Z_G
    if np.any(small):
        out[small] = _g_small(z[small])
    if np.any(~small):
        zb = z[~small]
        inc = 0.5 * np.log(zb / _Z_G)
        for n in range(1, _ASYM_TERMS):
            cn = _DFACT[n] / (2.0 ** (n + 2) * n)
            inc = inc + cn * (_Z_G ** (-2 * n) - zb ** (-2.0 * n))
        out[~small] = _g_anchor() + inc
    return out if out.ndim else float(out)


def f_alpha(ctx: KernelContext, delta):
    """F_alpha(delta) = int_{t_c}^{delta} Xi_alpha(c tau) dtau."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise ValueError("delta must be positive")
    k = math.sqrt(ctx.alpha / 2) * ctx.c
    return (2.0 / ctx.c) * (dawson_integral(k * delta) - dawson_integral(k * ctx.t_c))


def f_alpha_zero(ctx: KernelContext) -> float:
    """F_alpha(0) = int_0^inf exp(-k^2/2alpha)(cos(k c t_c) - 1)/(k c) dk."""
    z = math.sqrt(ctx.alpha / 2) * ctx.c * ctx.t_c
    return -(2.0 / ctx.c) * float(dawson_integral(z))


def _f0_raw(alpha: float, t_c: float, c: float) -> float:
    z = math.sqrt(alpha / 2) * c * t_c
    return -(2.0 / c) * float(dawson_integral(z))


def zeta_extrapolate(m: float, c: float = 1.0, hbar: float = 1.0, eta: float = 1.0,
                     ladder=ZETA_LADDER) -> tuple[float, float]:
    """Richardson limit of F_alpha(0) + ln(alpha)/(2c); returns (value, error)."""
    t_c = eta * hbar / (m * c * c)
    ladder = np.asarray(ladder, float)
    resid = np.array([_f0_raw(a, t_c, c) + math.log(a) / (2 * c) for a in ladder])
    ratio = ladder[1] / ladder[0]
    # residual expands in powers of 1/alpha; use the last 6 rungs
    best, err, _ = richardson(resid[-6:], ratio)
    return float(best), err


@lru_cache(maxsize=64)
def zeta_const(m: float, c: float = 1.0, hbar: float = 1.0, eta: float = 1.0,
               tol: float = 1e-9) -> float:
    """Finite constant zeta(eta) of the d=2 kernel expansion."""
    if m <= 0:
        raise ValueError("mass must be positive")
    val, err = zeta_extrapolate(m, c, hbar, eta)
    if not err < tol:
        raise ConvergenceError(f"zeta ladder did not converge (err={err:.3e})")
    return val


def polarization_basis(k_hat) -> np.ndarray:
    """Orthonormal transverse vectors (rows) for unit k_hat, d = 2 or 3."""
    k = np.asarray(k_hat, dtype=float)
    d = k.size
    if d == 2:
        return np.array([[-k[1], k[0]]])
    if d != 3:
        raise ValueError("dimension must be 2 or 3")
    trial = np.eye(3)[int(np.argmin(np.abs(k)))]
    e1 = trial - (trial @ k) * k
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(k, e1)
    return np.array([e1, e2])


def closure_check(k_hat, basis) -> float:
    """max |kk^T + sum eps eps^T - I|."""
    k = np.asarray(k_hat, dtype=float)
    if abs(np.linalg.norm(k) - 1.0) > 1e-12:
        raise ValueError("k_hat must be a unit vector")
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.shape != (k.size - 1, k.size):
        raise ValueError("basis must hold d-1 transverse vectors")
    m = np.outer(k, k) + basis.T @ basis - np.eye(k.size)
    return float(np.max(np.abs(m)))


def kernel_table(alphas, s_grid, which: str = "rho", **ctx_kw) -> list[tuple[float, float, float]]:
    """Rows (alpha, s, value) for plotting; ``which`` in rho|xi|f."""
    funcs = {"rho": rho_alpha, "xi": xi_alpha, "f": f_alpha}
    if which not in funcs:
        raise ValueError(f"unknown kernel {which!r}")
    rows = []
    for a in alphas:
        ctx = KernelContext(alpha=float(a), **ctx_kw)
        vals = np.atleast_1d(funcs[which](ctx, np.asarray(s_grid, float)))
        rows.extend((float(a), float(s), float(v)) for s, v in zip(s_grid, vals))
    return rows
