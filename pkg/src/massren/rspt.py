"""Second-order level shifts with the +i0 prescription.

Every shift is a sum over intermediate levels j' of one-dimensional
resolvent integrals

    J = int_a^b R(k) / (omega_{jj'} - k + i0) dk      (hbar = c = 1),

evaluated either as principal value minus i pi R(omega) ("pole" mode) or at
finite epsilon followed by Richardson extrapolation ("extrapolate" mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import exp1

from .atom import AtomSpectrum, momentum_coupling_sum
from .kernels import KernelContext
from .numerics import gauss_panels, linear_fit, loglog_slope, richardson

EULER = np.euler_gamma


class ResonanceOnBoundary(ValueError):
    pass


# ----------------------------------------------------------- resolvent core

def _cquad(f, a, b, points=()):
    pts = sorted(p for p in points if a < p < b)
    edges = [a] + pts + [b]
    tot = 0.0 + 0.0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        tot += quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400, complex_func=True)[0]
    return tot


def _geom_points(a: float, b: float, ref: float) -> list[float]:
    """Panel breaks growing geometrically from ``ref`` toward b."""
    lo = max(a, ref, 1e-300)
    if not math.isfinite(b) or b / lo < 10:
        return []
    return list(lo * 10.0 ** np.arange(1, int(math.log10(b / lo)) + 1))


def _regular(R, omega, a, b, scale):
    f = lambda k: R(k) / (omega - k)
    if math.isinf(b):
        hi = 12.0 * scale if math.isfinite(scale) else math.inf
        if math.isinf(hi) or hi <= a:
            mid = max(a, abs(omega), 1.0) * 10.0
            val = _cquad(f, a, mid, _geom_points(a, mid, max(abs(omega), a)))
            return val + quad(lambda k: f(k).real, mid, math.inf, epsabs=0.0, epsrel=1e-13, limit=400)[0]
        return _cquad(f, a, hi, _geom_points(a, hi, max(abs(omega), a)))
    return _cquad(f, a, b, _geom_points(a, b, max(abs(omega), a)))


def resolvent_pv(R: Callable, omega: float, a: float, b: float, scale: float = math.inf) -> complex:
    """int_a^b R(k)/(omega - k + i0) dk by symmetric subtraction plus residue.

    ``scale`` is the width of any Gaussian factor in R (integration stops at
    12 scale when b is infinite).
    """
    if not (a < omega < b):
        if omega == a or omega == b:
            raise ResonanceOnBoundary(f"pole at panel edge k={omega}")
        return _regular(R, omega, a, b, scale)
    delta = min(omega - a, b - omega, 0.5 * omega if a == 0 else math.inf)
    # symmetric pair: int_0^delta [R(w+u) - R(w-u)] / (-u) du; the odd
    # numerator kills the 1/u singularity, Taylor branch for tiny u
    u, w = gauss_panels(delta * np.array([0.0, 1e-3, 1e-2, 0.1, 0.4, 1.0]), 24)
    Rp = np.array([R(omega + x) for x in u])
    Rm = np.array([R(omega - x) for x in u])
    sym = np.sum(w * (Rp - Rm) / (-u))
    left = _regular(R, omega, a, omega - delta, scale) if omega - delta > a else 0.0
    right = _regular(R, omega, omega + delta, b, scale)
    return sym + left + right - 1j * math.pi * R(omega)


def resolvent_eps(R: Callable, omega: float, a: float, b: float, eps: float,
                  scale: float = math.inf) -> complex:
    """int_a^b R(k)/(omega - k + i eps) dk by adaptive quadrature at finite eps."""
    f = lambda k: R(k) / (omega - k + 1j * eps)
    pts = [omega + s * eps * m for s in (-1, 1) for m in (0.3, 1, 3, 10, 30, 100, 300, 1000)]
    pts.append(omega)
    if math.isinf(b):
        hi = 12.0 * scale if math.isfinite(scale) else math.inf
        if math.isinf(hi):
            mid = max(a, abs(omega), 1.0) * 10.0
            val = _cquad(f, a, mid, pts + _geom_points(a, mid, max(abs(omega), a)))
            return val + quad(lambda k: f(k).real, mid, math.inf, epsabs=0.0, epsrel=1e-13, limit=400)[0]
        b = hi
    return _cquad(f, a, b, pts + _geom_points(a, b, max(abs(omega), a)))


def resolvent_extrapolate(R, omega, a, b, scale=math.inf, eps0_rel=1e-2, levels=5):
    """Richardson eps -> 0 over eps0 * 2^-n, n = 0..levels-1."""
    eps0 = eps0_rel * max(abs(omega), 1e-12)
    vals = [resolvent_eps(R, omega, a, b, eps0 / 2**n, scale) for n in range(levels)]
    best, err, _ = richardson(np.array(vals), 2.0)
    return complex(best), err, eps0


# ---------------------------------------------------------------- results

@dataclass
class ComplexShift:
    E2: complex
    j: int
    d: int
    alpha: Optional[float]
    K_scale: Optional[float]
    eps_mode: str
    eps_used: Optional[float]
    J_max: int
    sum_rule_deficit: float
    pieces: dict = field(default_factory=dict)
    dE_dlnalpha: Optional[float] = None

    @property
    def gamma(self) -> float:
        return -2.0 * self.E2.imag + 0.0

    def to_dict(self) -> dict:
        out = {"re": self.E2.real, "im": self.E2.imag, "gamma": self.gamma, "j": self.j,
               "d": self.d, "alpha": self.alpha, "K_scale": self.K_scale,
               "eps_mode": self.eps_mode, "J_max": self.J_max,
               "sum_rule_deficit": self.sum_rule_deficit,
               "pieces": {k: (v.real if isinstance(v, complex) and v.imag == 0 else v)
                          for k, v in self.pieces.items()}}
        if self.dE_dlnalpha is not None:
            out["dE_dlnalpha"] = self.dE_dlnalpha
        return out


def _terms(spec: AtomSpectrum, j: int):
    """(omega_jj', |p_jj'|^2) for j' with non-zero coupling."""
    om = spec.omega(j)
    p2 = spec.p_abs2(j)
    keep = (p2 > 0) & (np.arange(p2.size) != j)
    if np.any(keep & (om == 0)):
        raise ValueError("degenerate level coupled by p: non-degenerate theory does not apply")
    return om[keep], p2[keep]


def _integrate(R_factory, om, a, b, scale, mode):
    tot, eps_used, err = 0.0 + 0.0j, None, 0.0
    for w in om:
        R = R_factory(w)
        if mode == "pole":
            tot += resolvent_pv(R, w, a, b, scale)
        elif mode == "extrapolate":
            v, e, eps_used = resolvent_extrapolate(R, w, a, b, scale)
            tot += v
            err = max(err, e)
        else:
            raise ValueError("eps_mode must be 'pole' or 'extrapolate'")
    return tot, eps_used


# ------------------------------------------------------------------ naive

def naive_shift(spec: AtomSpectrum, d: int, j: int, K: float, q: float,
                eps_mode: str = "pole") -> complex:
    """Cutoff-K partial integral of the unrenormalized second-order shift."""
    W = momentum_coupling_sum(spec, j, deficit_warn=math.inf)
    om, keep_w = spec.omega(j), W
    pref = q * q / (4 * math.pi**2 * spec.m**2)
    tot = 0.0 + 0.0j
    for w, wt in zip(om, keep_w):
        if wt == 0:
            continue
        R = (lambda k: 1.0) if d == 2 else (lambda k: k)
        if eps_mode == "pole":
            tot += wt * resolvent_pv(R, w, 0.0, K)
        else:
            tot += wt * resolvent_extrapolate(R, w, 0.0, K)[0]
    return pref * tot


def naive_closed_form(spec: AtomSpectrum, d: int, j: int, K: float, q: float) -> complex:
    """Analytic value of the cutoff integral (oracle)."""
    W = momentum_coupling_sum(spec, j, deficit_warn=math.inf)
    pref = q * q / (4 * math.pi**2 * spec.m**2)
    tot = 0.0 + 0.0j
    for w, wt in zip(spec.omega(j), W):
        if wt == 0:
            continue
        logpart = math.log(abs(w)) - math.log(abs(w - K)) - (1j * math.pi if 0 < w < K else 0.0)
        tot += wt * (logpart if d == 2 else -K + w * logpart)
    return pref * tot


@dataclass
class NaiveScan:
    K: np.ndarray
    E2: np.ndarray
    law: str
    slope: float
    r2: float
    expected_slope: float
    im_spread: float


def naive_shift_scan(spec: AtomSpectrum, d: int, j: int, K_list: Sequence[float], q: float,
                     eps_mode: str = "pole") -> NaiveScan:
    K = np.asarray(sorted(K_list), float)
    if K.size < 5:
        raise ValueError("need >= 5 cutoffs")
    E = np.array([naive_shift(spec, d, j, k, q, eps_mode) for k in K])
    x = K if d == 3 else np.log(K)
    slope, _, r2 = linear_fit(x, E.real)
    p2 = spec.p2[j]
    ang = math.pi if d == 2 else 8 * math.pi / 3
    expected = -q * q / (4 * math.pi**2 * spec.m**2) * ang * spec.p_abs2(j).sum()
    im_spread = float(np.ptp(E.imag)) if q else 0.0
    return NaiveScan(K, E, "K" if d == 3 else "log_K", slope, r2, expected, im_spread)


# -------------------------------------------------------------- renormalized

def _j2_factories(alpha):
    g = (lambda k: 1.0) if math.isinf(alpha) else (lambda k: math.exp(-k * k / (2 * alpha)))
    low = lambda w: (lambda k: g(k))
    high = lambda w: (lambda k: g(k) * w / k)
    return low, high


def renorm_shift_d2(spec: AtomSpectrum, ctx: KernelContext, j: int, q: float, *,
                    alpha_free: bool = False, eps_mode: str = "pole",
                    K_scale: Optional[float] = None) -> ComplexShift:
    """Renormalized d=2 shift; pre-limit (Gaussian kept) unless alpha_free."""
    K = ctx.K_scale if K_scale is None else K_scale
    alpha = math.inf if alpha_free else ctx.alpha
    om, p2 = _terms(spec, j)
    low, high = _j2_factories(alpha)
    scale = math.sqrt(alpha) if math.isfinite(alpha) else math.inf
    tot = 0.0 + 0.0j
    eps_used = None
    for w, pw in zip(om, p2):
        if abs(w - K) <= 1e-12 * K:
            raise ResonanceOnBoundary("transition frequency coincides with the momentum split")
        parts = []
        for fac, a, b in ((low, 0.0, K), (high, K, math.inf)):
            R = fac(w)
            if eps_mode == "pole":
                parts.append(resolvent_pv(R, w, a, b, scale))
            else:
                v, _, eps_used = resolvent_extrapolate(R, w, a, b, scale)
                parts.append(v)
        tot += pw * sum(parts)
    E2 = q * q / (4 * math.pi * spec.m**2) * tot
    return ComplexShift(E2, j, 2, None if alpha_free else ctx.alpha, K, eps_mode, eps_used,
                        spec.J_max, spec.sum_rule_deficit(j))


def renorm_shift_d2_closed(spec: AtomSpectrum, K: float, j: int, q: float) -> complex:
    """Alpha-free d=2 shift in closed form: sum |p|^2 [ln(|w|/K) - i pi theta(w)]."""
    om, p2 = _terms(spec, j)
    val = sum(pw * (math.log(abs(w) / K) - (1j * math.pi if w > 0 else 0.0)) for w, pw in zip(om, p2))
    return q * q / (4 * math.pi * spec.m**2) * val


def renorm_shift_d3(spec: AtomSpectrum, alpha: float, j: int, q: float, *,
                    eps_mode: str = "pole") -> ComplexShift:
    """Renormalized d=3 shift at finite alpha (still log-divergent)."""
    om, p2 = _terms(spec, j)
    scale = math.sqrt(alpha)
    tot = 0.0 + 0.0j
    eps_used = None
    for w, pw in zip(om, p2):
        R = lambda k, w=w: w * math.exp(-k * k / (2 * alpha))
        if eps_mode == "pole":
            tot += pw * resolvent_pv(R, w, 0.0, math.inf, scale)
        else:
            v, _, eps_used = resolvent_extrapolate(R, w, 0.0, math.inf, scale)
            tot += pw * v
    E2 = 2 * q * q / (3 * math.pi * spec.m**2) * tot
    slope = d3_log_slope(spec, j, q)
    return ComplexShift(E2, j, 3, alpha, None, eps_mode, eps_used, spec.J_max,
                        spec.sum_rule_deficit(j), dE_dlnalpha=slope)


def d3_log_slope(spec: AtomSpectrum, j: int, q: float) -> float:
    """Large-alpha dE2/dln(alpha): each term behaves as -w ln(sqrt(2 alpha)/|w|)."""
    om, p2 = _terms(spec, j)
    return -2 * q * q / (3 * math.pi * spec.m**2) * 0.5 * float(np.sum(p2 * om))


def d3_large_alpha(spec: AtomSpectrum, alpha: float, j: int, q: float) -> complex:
    """Leading large-alpha form: sum |p|^2 w [-(1/2)ln(2 alpha/w^2) + gamma/2 - i pi theta(w)]."""
    om, p2 = _terms(spec, j)
    val = sum(pw * w * (-0.5 * math.log(2 * alpha / (w * w)) + 0.5 * EULER
                        - (1j * math.pi if w > 0 else 0.0)) for w, pw in zip(om, p2))
    return 2 * q * q / (3 * math.pi * spec.m**2) * val


# ------------------------------------------------------- cancellation table

def cancellation_report(spec: AtomSpectrum, d: int, j: int, alpha_list: Sequence[float], q: float,
                        ctx: Optional[KernelContext] = None,
                        K_scale: Optional[float] = None) -> list[dict]:
    """Per alpha: raw line, subtraction line, counterterm line and their sums."""
    from .renorm import p2_coefficient

    if ctx is None:
        ctx = KernelContext(alpha=1.0, m=spec.m)
    p2 = float(spec.p2[j])
    m = spec.m
    rows = []
    for al in alpha_list:
        c = ctx.with_alpha(float(al))
        K = c.K_scale if K_scale is None else K_scale
        if d == 3:
            raw = renorm_shift_d3(spec, al, j, q).E2
            sub = -(q * q / (4 * math.pi**2 * m**2)) * (8 * math.pi / 3) * math.sqrt(math.pi * al / 2) * p2
        elif d == 2:
            raw = renorm_shift_d2(spec, c, j, q, K_scale=K).E2
            sub = -(q * q / (4 * math.pi * m**2)) * p2 * 0.5 * float(exp1(K**2 / (2 * al)))
        else:
            raise ValueError("dimension must be 2 or 3")
        ct = p2_coefficient(d, m, q, al, c.alpha0) * p2 if q else 0.0
        rows.append({"alpha": float(al), "raw": raw, "subtraction": sub, "counterterm": ct,
                     "divergent_residual": sub + ct, "total": raw + sub + ct})
    return rows


def cancellation_exponent(rows: list[dict]) -> float:
    al = [r["alpha"] for r in rows]
    res = [r["divergent_residual"] for r in rows]
    return loglog_slope(al, res)[0]
