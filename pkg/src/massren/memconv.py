"""Logarithmic-memory convolution I_t = int f(t') ln((t - t')/t_c) dt'.

Two evaluators are provided:

* ``conv_time`` works on uniform samples with product-integration weights
  (f piecewise linear, the logarithm integrated exactly on every panel).
* ``conv_freq`` works on the one-sided spectrum f~(Omega), Omega >= 0, with
  f(t') = int f~(Omega) exp(i Omega (t - t')) dOmega, using the closed-form
  low-frequency panel and the epsilon -> 0 kernel on [Omega_cut, inf).

Signals here are c-number functions of the lag tau = t - t' >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .numerics import gauss_panels, loglog_slope

EULER = np.euler_gamma


class InadmissibleSignal(ValueError):
    """Raised when a spectrum fails one of the admissibility conditions."""

    def __init__(self, condition: str, evidence: str):
        super().__init__(f"{condition} violated: {evidence}")
        self.condition = condition
        self.evidence = evidence


class InsufficientHistory(ValueError):
    pass


# ---------------------------------------------------------------- time domain

def _series_AB(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """A = int_0^1 (1-u) ln(1+ru) du and B = int_0^1 u ln(1+ru) du for r <= 0.1."""
    A = np.zeros_like(r)
    B = np.zeros_like(r)
    p = np.ones_like(r)
    for n in range(1, 22):
        p = p * r
        s = (-1.0) ** (n + 1)
        A += s * p / (n * (n + 1) * (n + 2))
        B += s * p / (n * (n + 2))
    return A, B


@lru_cache(maxsize=8)
def _unit_panel_terms(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets A_k, B_k (k = 1..n-1) for panels [k, k+1] of unit width."""
    k = np.arange(1, n, dtype=float)
    A = np.empty_like(k)
    B = np.empty_like(k)
    big = k >= 10
    if np.any(big):
        A[big], B[big] = _series_AB(1.0 / k[big])
    ks = k[~big]
    if ks.size:
        # exact antiderivatives on [k, k+1] minus the ln(k) baseline
        def Phi(x):
            return x * np.log(x) - x

        def Psi(x):
            return 0.5 * x * x * np.log(x) - 0.25 * x * x

        a, b = ks, ks + 1.0
        dPhi, dPsi = Phi(b) - Phi(a), Psi(b) - Psi(a)
        left = b * dPhi - dPsi          # int (b - s) ln s ds
        right = dPsi - a * dPhi         # int (s - a) ln s ds
        A[~big] = left - 0.5 * np.log(ks)
        B[~big] = right - 0.5 * np.log(ks)
    return A, B


def log_weights(n_panels: int, h: float, t_c: float) -> np.ndarray:
    """Weights w_k with int_0^{n h} f(tau) ln(tau/t_c) dtau ~ sum_k w_k f(k h).

    f is taken piecewise linear between samples; the log is integrated
    exactly, so the tau -> 0 singularity costs nothing extra.
    """
    if n_panels < 1:
        return np.zeros(1)
    L0 = math.log(h / t_c)
    left = np.empty(n_panels)
    right = np.empty(n_panels)
    left[0] = h * (0.5 * L0 - 0.75)
    right[0] = h * (0.5 * L0 - 0.25)
    if n_panels > 1:
        A, B = _unit_panel_terms(n_panels)
        lnk = np.log(np.arange(1, n_panels, dtype=float)) + L0
        left[1:] = h * (0.5 * lnk + A)
        right[1:] = h * (0.5 * lnk + B)
    w = np.zeros(n_panels + 1)
    w[:-1] += left
    w[1:] += right
    return w


def conv_time(f_lag, dt: float, t_c: float, *, tail_tol: Optional[float] = None) -> np.ndarray:
    """I_t from samples f_lag[k] = f(t - k dt), k = 0..n (any trailing shape).

    ``tail_tol`` enables the windowed-tail check: the oldest 5% of the window
    must carry an envelope below tail_tol relative to max|f|.
    """
    f = np.asarray(f_lag)
    n = f.shape[0] - 1
    if n < 1:
        raise InsufficientHistory("need at least two samples")
    if tail_tol is not None:
        check_tail(f, dt, t_c, tail_tol)
    w = log_weights(n, dt, t_c)
    return np.tensordot(w, f, axes=(0, 0))


class LogConvolver:
    """conv_time for a growing history, with the weight table built once."""

    def __init__(self, capacity: int, dt: float, t_c: float):
        self.dt, self.t_c = dt, t_c
        n = capacity + 1
        L0 = math.log(dt / t_c)
        right = np.empty(n)
        right[0] = dt * (0.5 * L0 - 0.25)
        if n > 1:
            _, B = _unit_panel_terms(n)
            right[1:] = dt * (0.5 * (np.log(np.arange(1, n, dtype=float)) + L0) + B)
        self._full = log_weights(n, dt, t_c)
        self._right = right

    def __call__(self, f_lag) -> np.ndarray:
        f = np.asarray(f_lag)
        n = f.shape[0] - 1
        if n < 1:
            raise InsufficientHistory("need at least two samples")
        if n >= self._full.size - 1:
            raise InsufficientHistory("history longer than convolver capacity")
        w = self._full[: n + 1].copy()
        w[n] = self._right[n - 1]
        return np.tensordot(w, f, axes=(0, 0))


def check_tail(f_lag, dt: float, t_c: float, tol: float) -> float:
    """Bound |int_tail f ln| by envelope x log growth; raise if above tol."""
    f = np.abs(np.asarray(f_lag))
    f = f.reshape(f.shape[0], -1).max(axis=1)
    n = f.shape[0]
    m = max(2, n // 20)
    scale = f.max()
    if scale == 0:
        return 0.0
    T = (n - 1) * dt
    env = f[-m:].max()
    bound = env * (m * dt) * (abs(math.log(max(T, t_c) / t_c)) + 1.0) / (scale * max(T, dt))
    if bound > tol:
        raise InsufficientHistory(f"windowed tail bound {bound:.3e} exceeds {tol:.1e}")
    return bound


# ------------------------------------------------------------ frequency domain

@dataclass
class SignalSpectrum:
    """One-sided spectrum f~(Omega), Omega >= 0, of a real signal.

    ``f0`` and ``f0_prime`` are the low-frequency expansion coefficients;
    ``peaks`` lists frequencies where the integrand has sharp structure.
    """

    f_tilde: Callable[[np.ndarray], np.ndarray]
    f0: Optional[complex] = None
    f0_prime: Optional[complex] = None
    peaks: Sequence[float] = ()
    falloff_exponent: Optional[float] = None
    support: float = math.inf

    def __post_init__(self):
        if self.f0 is None:
            self.f0 = complex(self.f_tilde(np.array([0.0]))[0])

    def __call__(self, omega):
        om = np.asarray(omega, dtype=float)
        out = np.asarray(self.f_tilde(om), dtype=complex)
        return np.where(om <= self.support, out, 0.0)


def damped_cosine_spectrum(omega0: float, a: float, amp: float = 1.0) -> SignalSpectrum:
    """Spectrum of f(tau) = amp cos(omega0 tau) exp(-a tau), tau >= 0."""

    def ft(om):
        om = np.asarray(om, dtype=float)
        return amp / (4 * math.pi) * (1.0 / (a + 1j * (om - omega0)) + 1.0 / (a + 1j * (om + omega0)))

    f0 = amp / (2 * math.pi) * a / (a * a + omega0 * omega0)
    # d/dOmega at 0: -(i/4pi) sum 1/(a +- i w0)^2
    fp = -1j * amp / (4 * math.pi) * (1.0 / (a - 1j * omega0) ** 2 + 1.0 / (a + 1j * omega0) ** 2)
    return SignalSpectrum(ft, f0=f0, f0_prime=fp, peaks=(omega0,), falloff_exponent=-1.0)


def damped_cosine_exact(omega0: float, a: float, t_c: float, amp: float = 1.0) -> float:
    """Closed form of int_0^inf amp cos(omega0 tau) e^{-a tau} ln(tau/t_c) dtau."""
    s = complex(a, -omega0)
    return float((amp * (-(EULER + np.log(s * t_c)) / s)).real)


def conv_freq(spec: SignalSpectrum, t_c: float, omega_cut: float, *,
              check: bool = True, epsabs: float = 1e-13, epsrel: float = 1e-12) -> float:
    """I_t from the one-sided spectrum, split at ``omega_cut``."""
    if omega_cut <= 0:
        raise ValueError("omega_cut must be positive")
    if check:
        ref = min(spec.peaks) if len(spec.peaks) else omega_cut
        rep = admissibility_check(spec, omega_ref=ref)
        for name in ("cond1", "cond3", "cond4"):
            if not rep[name]["pass"]:
                raise InadmissibleSignal(name, rep[name]["evidence"])

    def K(om):
        return (np.log(om * t_c) + EULER - 0.5j * math.pi) / (1j * om)

    f0 = complex(spec.f0)
    fp = complex(spec.f0_prime) if spec.f0_prime is not None else 0.0
    Lc = math.log(omega_cut * t_c)
    # closed-form pieces on [0, omega_cut] (the +c.c. is the factor 2 Re)
    # f~(0) is real for a real signal
    const_part = -math.pi * f0.real * (Lc + EULER)
    lin_int = (omega_cut * Lc - omega_cut + (EULER - 0.5j * math.pi) * omega_cut) / 1j
    lin_part = 2.0 * (fp * lin_int).real

    def low_rem(om):
        if om == 0.0:
            return 0.0
        return (spec(np.array([om]))[0] - f0 - fp * om) * K(om)

    pts = [p for p in spec.peaks if 0 < p < omega_cut]
    sup = min(spec.support, math.inf)
    low_hi = min(omega_cut, sup)
    low = _cquad(low_rem, 0.0, low_hi, pts, epsabs, epsrel)
    if sup < omega_cut:
        # f~ vanishes on (sup, omega_cut]: subtract the expansion there
        low += _cquad(lambda om: -(f0 + fp * om) * K(om), sup, omega_cut, [], epsabs, epsrel)

    def high(om):
        return spec(np.array([om]))[0] * K(om)

    hi_val = 0.0
    if sup > omega_cut:
        peaks_hi = sorted(p for p in spec.peaks if p > omega_cut)
        upper = max([omega_cut * 100.0] + [10.0 * p for p in peaks_hi])
        upper = min(upper, sup)
        hi_val = _cquad(high, omega_cut, upper, peaks_hi, epsabs, epsrel)
        if sup > upper:
            hi_val += _cquad(high, upper, sup, [], epsabs, epsrel)
    return float(const_part + lin_part + 2.0 * (low + hi_val).real)


def _cquad(fun, a, b, points, epsabs, epsrel) -> complex:
    """Complex adaptive quadrature; interior points become panel edges."""
    if b <= a:
        return 0.0
    if math.isinf(b):
        re = quad(lambda x: fun(x).real, a, b, epsabs=epsabs, epsrel=epsrel, limit=500)[0]
        im = quad(lambda x: fun(x).imag, a, b, epsabs=epsabs, epsrel=epsrel, limit=500)[0]
        return complex(re, im)
    edges = [a] + sorted(p for p in points if a < p < b) + [b]
    total = 0.0 + 0.0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += quad(fun, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=500, complex_func=True)[0]
    return total


# -------------------------------------------------------- sampled -> spectrum

@dataclass
class SampledSignal:
    """Samples f_lag[k] = f(t - k dt) of a real scalar signal."""

    f_lag: np.ndarray
    dt: float

    def transform(self, omega) -> np.ndarray:
        """f~(Omega) = (1/2pi) int_0^T f(tau) e^{-i Omega tau} dtau (linear Filon)."""
        f = np.asarray(self.f_lag, dtype=float)
        n = f.size - 1
        om = np.atleast_1d(np.asarray(omega, dtype=float))
        th = om * self.dt
        small = np.abs(th) < 1e-3
        ths = np.where(small, 1.0, th)
        E0 = np.where(small, 1 - 1j * th / 2 - th**2 / 6 + 1j * th**3 / 24,
                      (1 - np.exp(-1j * ths)) / (1j * ths))
        E1 = np.where(small, 0.5 - 1j * th / 3 - th**2 / 8 + 1j * th**3 / 30,
                      np.exp(-1j * ths) / (-1j * ths) + E0 / (1j * ths))
        tau = np.arange(n + 1) * self.dt
        ph = np.exp(-1j * np.outer(om, tau))           # (n_om, n+1)
        # panel k contributes h e^{-i om tau_k} [f_k (E0-E1) + f_{k+1} E1]
        a = (E0 - E1)[:, None] * ph[:, :-1]
        b = E1[:, None] * ph[:, :-1]
        val = self.dt * (a @ f[:-1] + b @ f[1:])
        return val / (2 * math.pi)

    def spectrum(self) -> SignalSpectrum:
        return SignalSpectrum(self.transform)


# ------------------------------------------------------------ admissibility

def admissibility_check(obj, *, omega_ref: float = 1.0, tail_tol: float = 1e-6,
                        fit_tol: float = 1e-6, falloff_max: float = -1.0,
                        falloff_slack: float = 0.05) -> dict:
    """Report on Fourier transformability, low-Omega regularity, high-Omega falloff.

    ``omega_ref`` is the frequency scale of the dynamics: the low band is
    [0, 0.02 omega_ref], the high band [10, 100] omega_ref (capped below the
    sampling Nyquist frequency for sampled signals).
    """
    rep: dict = {}
    if isinstance(obj, SampledSignal):
        f = np.abs(np.asarray(obj.f_lag, float))
        m = max(2, f.size // 10)
        scale = f.max()
        ratio = (f[-m:].max() / scale) if scale > 0 else 0.0
        rep["cond1"] = {"pass": bool(ratio < tail_tol),
                        "evidence": f"tail envelope / peak = {ratio:.3e}"}
        ft = obj.transform
        nyq = math.pi / obj.dt
    else:
        ft = obj
        nyq = math.inf
        probe = np.abs(ft(np.geomspace(1e-6, 1e6, 121) * omega_ref))
        ok = bool(np.all(np.isfinite(probe)))
        rep["cond1"] = {"pass": ok, "evidence": f"max |f~| on probe grid = {probe.max():.3e}"}

    # low-Omega power series: quadratic fit must reproduce the samples
    om_lo = np.linspace(0.0, 0.02 * omega_ref, 21)
    vals = np.asarray(ft(om_lo), complex)
    V = np.vander(om_lo, 4, increasing=True)
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    resid = np.max(np.abs(V @ coef - vals)) / max(np.max(np.abs(vals)), 1e-300)
    rep["cond3"] = {"pass": bool(np.all(np.isfinite(vals)) and resid < fit_tol),
                    "evidence": f"cubic-fit relative residual = {resid:.3e}",
                    "f0": complex(coef[0]), "f1": complex(coef[1])}

    hi = min(100.0 * omega_ref, 0.5 * nyq)
    om_hi = np.geomspace(hi / 10.0, hi, 25)
    mag = np.abs(np.asarray(ft(om_hi), complex))
    if np.all(mag == 0):
        slope, res = -math.inf, 0.0
    else:
        slope, res = loglog_slope(om_hi, np.maximum(mag, 1e-300))
    rep["cond4"] = {"pass": bool(slope <= falloff_max + falloff_slack),
                    "evidence": f"fitted exponent {slope:.4f} (residual {res:.2e})",
                    "exponent": slope}
    return rep


# -------------------------------------------------------------- chi moments

@dataclass
class AnalyticHistory:
    """Analytic history: q(t') and the derivatives d^nu x / dt'^nu."""

    q: Callable[[np.ndarray], np.ndarray]
    x_deriv: Callable[[int, np.ndarray], np.ndarray]
    t_start: float
    omega_scale: float = 1.0
    extra: dict = field(default_factory=dict)


def _chi_direct(h: AnalyticHistory, nu: int, omega: float, t: float, n_gl: int = 24) -> np.ndarray:
    span = t - h.t_start
    width = min(0.5, 0.5 / max(abs(omega), h.omega_scale, 1e-12))
    n_pan = max(8, int(math.ceil(span / width)))
    x, w = gauss_panels(np.linspace(h.t_start, t, n_pan + 1), n_gl)
    integrand = h.q(x)[:, None] * np.atleast_2d(np.asarray(h.x_deriv(nu, x)).T).reshape(x.size, -1)
    ph = np.exp(-1j * omega * (t - x))
    return (w * ph) @ integrand / (2 * math.pi)


def chi_moments(history: AnalyticHistory, nu: int, omega: float, t: float,
                tol: float = 1e-8) -> dict:
    """chi_nu(Omega) by direct quadrature, plus the recursion residual.

    chi_nu = (q_t/2pi) x^{(nu-1)}(t) - i Omega chi_{nu-1}; the residual is
    the switching (dq/dt) contribution and must stay below ``tol``.
    """
    if nu < 1:
        raise ValueError("nu must be >= 1")
    chi = _chi_direct(history, nu, omega, t)
    prev = _chi_direct(history, nu - 1, omega, t)
    qt = float(history.q(np.array([t]))[0])
    xb = np.atleast_1d(np.asarray(history.x_deriv(nu - 1, np.array([t])))).ravel()
    rec = qt * xb / (2 * math.pi) - 1j * omega * prev
    resid = float(np.max(np.abs(chi - rec)))
    return {"chi": chi, "recursion": rec, "residual": resid, "ok": resid < tol}
