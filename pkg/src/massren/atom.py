"""Bound-state spectra and momentum matrix elements p_{j'j} = <j'|p|j>."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .kernels import polarization_basis


class UnboundPotential(ValueError):
    pass


class GridTooCoarse(RuntimeError):
    pass


class CompletenessWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PotentialSpec:
    """kind: 'harmonic' (omega0), 'polynomial' (monomial terms) or 'tabulated'.

    ``terms`` holds ((px, py, ...), coeff) pairs; ``table`` is an array of V
    on the solver grid.  Mass and hbar travel with the potential.
    """

    kind: str
    d: int
    omega0: float = 1.0
    terms: tuple = ()
    table: Optional[np.ndarray] = field(default=None, compare=False)
    m: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if self.kind == "harmonic":
            if self.omega0 <= 0:
                raise UnboundPotential("omega0 must be positive")
        elif self.kind == "polynomial":
            _check_polynomial_bound(self.terms, self.d)
        elif self.kind == "tabulated":
            if self.table is None:
                raise ValueError("tabulated potential needs a table")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def harmonic(cls, d: int, omega0: float, m: float = 1.0, hbar: float = 1.0) -> "PotentialSpec":
        return cls("harmonic", d, omega0=omega0, m=m, hbar=hbar)

    @classmethod
    def quartic(cls, d: int = 2, g: float = 1.0, m: float = 1.0) -> "PotentialSpec":
        terms = tuple((tuple(4 if i == k else 0 for i in range(d)), g) for k in range(d))
        return cls("polynomial", d, terms=terms, m=m)

    def __call__(self, *x) -> np.ndarray:
        if self.kind == "harmonic":
            return 0.5 * self.m * self.omega0**2 * sum(xi * xi for xi in x)
        if self.kind == "polynomial":
            out = 0.0
            for powers, c in self.terms:
                term = c
                for xi, p in zip(x, powers):
                    term = term * xi**p
                out = out + term
            return out
        raise ValueError("tabulated potential has no closed form")

    def gradient(self, *x) -> list:
        if self.kind == "harmonic":
            return [self.m * self.omega0**2 * xi for xi in x]
        if self.kind == "polynomial":
            g = [0.0] * self.d
            for powers, c in self.terms:
                for k in range(self.d):
                    if powers[k] == 0:
                        continue
                    term = c * powers[k]
                    for i, (xi, p) in enumerate(zip(x, powers)):
                        term = term * xi ** (p - 1 if i == k else p)
                    g[k] = g[k] + term
            return g
        raise ValueError("tabulated potential has no closed-form gradient")

    def hessian(self, *x) -> list:
        """Nested list H[a][b] of second derivatives."""
        if self.kind == "harmonic":
            k = self.m * self.omega0**2
            return [[(k + 0 * x[0]) if a == b else 0 * x[0] for b in range(self.d)] for a in range(self.d)]
        if self.kind == "polynomial":
            H = [[0.0 * x[0] for _ in range(self.d)] for _ in range(self.d)]
            for powers, c in self.terms:
                for a in range(self.d):
                    for b in range(self.d):
                        p = list(powers)
                        coef = c * p[a]
                        p[a] -= 1
                        coef = coef * p[b]
                        p[b] -= 1
                        if coef == 0:
                            continue
                        term = coef
                        for xi, pi in zip(x, p):
                            term = term * xi**pi
                        H[a][b] = H[a][b] + term
            return H
        raise ValueError("tabulated potential has no closed-form Hessian")


def _check_polynomial_bound(terms, d: int) -> None:
    if not terms:
        raise UnboundPotential("empty polynomial")
    for powers, _ in terms:
        if len(powers) != d or min(powers) < 0:
            raise ValueError("monomial powers must be non-negative, one per axis")
    top = max(sum(p) for p, _ in terms)
    if top % 2 or top == 0:
        raise UnboundPotential("top degree must be even and positive")
    # leading form must be positive on the unit sphere
    rng = np.random.default_rng(0)
    u = rng.normal(size=(2000, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u = np.vstack([np.eye(d), -np.eye(d), u])   # axes, where separable forms can vanish
    lead = np.zeros(len(u))
    for powers, c in terms:
        if sum(powers) == top:
            lead += c * np.prod(u ** np.asarray(powers), axis=1)
    if np.min(lead) <= 1e-6 * np.max(np.abs(lead)):
        raise UnboundPotential("leading form is not positive in every direction")


@dataclass
class AtomSpectrum:
    energies: np.ndarray            # (J+1,)
    p: np.ndarray                   # (J+1, J+1, d) complex, p[j', j] = <j'|p|j>
    p2: np.ndarray                  # <j|p^2|j>
    d: int
    m: float = 1.0
    hbar: float = 1.0
    basis_meta: dict = field(default_factory=dict)
    states: Optional[np.ndarray] = field(default=None, repr=False)  # grid wavefunctions

    @property
    def J_max(self) -> int:
        return self.energies.size - 1

    def omega(self, j: int) -> np.ndarray:
        """omega_{j j'} = (E_j - E_j')/hbar over j'."""
        return (self.energies[j] - self.energies) / self.hbar

    def p_abs2(self, j: int) -> np.ndarray:
        """|p_{j j'}|^2 summed over components, over j'."""
        return np.sum(np.abs(self.p[:, j, :]) ** 2, axis=1)

    def sum_rule_deficit(self, j: int) -> float:
        return float(1.0 - self.p_abs2(j).sum() / self.p2[j])

    def scaled(self, **kw) -> "AtomSpectrum":
        d = dict(self.__dict__)
        d.update(kw)
        return AtomSpectrum(**d)


# -------------------------------------------------------------- analytic path

def _harmonic_states(d: int, count: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    shell = 0
    while len(out) < count:
        level = sorted(n for n in itertools.product(range(shell + 1), repeat=d) if sum(n) == shell)
        out.extend(level)
        shell += 1
    return out[:count]


def _harmonic_spectrum(pot: PotentialSpec, J_max: int) -> AtomSpectrum:
    d, w, m, hb = pot.d, pot.omega0, pot.m, pot.hbar
    states = _harmonic_states(d, J_max + 1)
    index = {s: i for i, s in enumerate(states)}
    E = np.array([hb * w * (sum(s) + 0.5 * d) for s in states])
    P = np.zeros((len(states), len(states), d), dtype=complex)
    amp = math.sqrt(m * hb * w / 2.0)
    for j, s in enumerate(states):
        for a in range(d):
            up = tuple(n + (1 if i == a else 0) for i, n in enumerate(s))
            if up in index:     # <n+1|p|n> = i amp sqrt(n+1)
                P[index[up], j, a] = 1j * amp * math.sqrt(s[a] + 1)
            if s[a] > 0:
                dn = tuple(n - (1 if i == a else 0) for i, n in enumerate(s))
                P[index[dn], j, a] = -1j * amp * math.sqrt(s[a])
    p2 = np.array([m * hb * w * (sum(s) + 0.5 * d) for s in states])
    meta = {"path": "analytic", "quantum_numbers": [list(s) for s in states]}
    return AtomSpectrum(E, P, p2, d, m, hb, meta)


# ------------------------------------------------------------------ grid path

_D2 = {
    2: [1.0, -2.0],
    4: [-1 / 12, 4 / 3, -5 / 2],
    6: [1 / 90, -3 / 20, 3 / 2, -49 / 18],
    8: [-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72],
}
_D1 = {
    2: [-1 / 2],
    4: [1 / 12, -2 / 3],
    6: [-1 / 60, 3 / 20, -3 / 4],
    8: [1 / 280, -4 / 105, 1 / 5, -4 / 5],
}


def _stencil_matrix(n: int, order: int, which: int) -> sp.csr_matrix:
    if which == 2:
        half = _D2[order]
        coeffs = half + half[-2::-1]
    else:
        half = _D1[order]
        coeffs = half + [0.0] + [-c for c in half[::-1]]
    r = len(coeffs) // 2
    offs = list(range(-r, r + 1))
    return sp.diags([np.full(n - abs(o), c) for o, c in zip(offs, coeffs)], offs, format="csr")


def _grid_solve(pot: PotentialSpec, n: int, L: float, count: int, order: int):
    x = np.linspace(-L / 2, L / 2, n + 2)[1:-1]
    h = x[1] - x[0]
    X, Y = np.meshgrid(x, x, indexing="ij")
    V = pot(X, Y) if pot.kind != "tabulated" else np.asarray(pot.table, float)
    if V.shape != (n, n):
        raise ValueError("tabulated potential must match the grid shape")
    I = sp.identity(n, format="csr")
    D2 = _stencil_matrix(n, order, 2) / h**2
    lap = sp.kron(D2, I) + sp.kron(I, D2)
    H = (-(pot.hbar**2) / (2 * pot.m)) * lap + sp.diags(V.ravel())
    sigma = float(V.min()) - 1e-3 * (abs(float(V.min())) + 1.0)
    vals, vecs = eigsh(H.tocsc(), k=count, sigma=sigma, which="LM", tol=1e-14)
    order_idx = np.argsort(vals)
    return x, h, X, Y, V, lap, vals[order_idx], vecs[:, order_idx]


def _fix_degenerate(vals, vecs, X, tol):
    """Rotate near-degenerate clusters to diagonalize x^2; order by <x^2>."""
    x2 = (X * X).ravel()
    i = 0
    n = vals.size
    while i < n:
        j = i + 1
        while j < n and abs(vals[j] - vals[i]) < tol * max(1.0, abs(vals[i])):
            j += 1
        if j - i > 1:
            blk = vecs[:, i:j]
            M = blk.T @ (x2[:, None] * blk)
            _, U = np.linalg.eigh(M)
            vecs[:, i:j] = blk @ U
        i = j
    for k in range(n):
        if vecs[np.argmax(np.abs(vecs[:, k])), k] < 0:
            vecs[:, k] *= -1
    return vals, vecs


def _grid_spectrum(pot: PotentialSpec, J_max: int, n: int, L: float, order: int,
                   conv_tol: float, edge_tol: float) -> AtomSpectrum:
    if pot.d != 2:
        raise ValueError("grid path supports d=2 only")
    count = J_max + 1
    x, h, X, Y, V, lap, vals, vecs = _grid_solve(pot, n, L, count, order)
    vals, vecs = _fix_degenerate(vals, vecs, X, 1e-6)
    if conv_tol is not None:
        n_c = n // 2 if n // 2 >= 16 else n
        if pot.kind != "tabulated" and n_c != n:
            vals_c = _grid_solve(pot, n_c, L, count, order)[6]
            gap = float(np.max(np.abs(vals_c - vals) / np.maximum(1.0, np.abs(vals))))
            if gap > conv_tol:
                raise GridTooCoarse(f"eigenvalues move by {gap:.2e} between n={n_c} and n={n}")
    psi = vecs.reshape(n, n, count)
    edge = max(np.abs(psi[[0, -1], :, :]).max(), np.abs(psi[:, [0, -1], :]).max())
    if edge / np.abs(psi).max() > edge_tol:
        raise GridTooCoarse(f"boundary amplitude {edge:.1e} above {edge_tol:.0e}: enlarge the domain")
    I = sp.identity(n, format="csr")
    D1 = _stencil_matrix(n, order, 1) / h
    grads = [sp.kron(D1, I), sp.kron(I, D1)]
    P = np.zeros((count, count, 2), dtype=complex)
    for a, G in enumerate(grads):
        P[:, :, a] = -1j * pot.hbar * (vecs.T @ (G @ vecs))
    p2 = -(pot.hbar**2) * np.einsum("ij,ij->j", vecs, lap @ vecs)
    meta = {"path": "grid", "n": n, "L": L, "fd_order": order, "h": h}
    return AtomSpectrum(vals.copy(), P, p2, 2, pot.m, pot.hbar, meta,
                        states=psi / h)


def solve_spectrum(pot: PotentialSpec, J_max: int, *, method: str = "auto",
                   grid_n: int = 96, grid_L: float = 14.0, fd_order: int = 6,
                   conv_tol: Optional[float] = 1e-6, edge_tol: float = 1e-8) -> AtomSpectrum:
    """Lowest J_max+1 levels and their momentum matrix elements."""
    if J_max < 2:
        raise ValueError("J_max must be >= 2")
    if method == "auto":
        method = "analytic" if pot.kind == "harmonic" else "grid"
    if method == "analytic":
        if pot.kind != "harmonic":
            raise ValueError("analytic path needs a harmonic potential")
        return _harmonic_spectrum(pot, J_max)
    if fd_order not in _D2:
        raise ValueError("fd_order must be 2, 4, 6 or 8")
    return _grid_spectrum(pot, J_max, grid_n, grid_L, fd_order, conv_tol, edge_tol)


# --------------------------------------------------------------- couplings

_ANGULAR = {2: math.pi, 3: 8.0 * math.pi / 3.0}


def momentum_coupling_sum(spec: AtomSpectrum, j: int, k_hat=None, basis=None,
                          deficit_warn: float = 0.05) -> np.ndarray:
    """Coupling weights over j'.

    With ``k_hat``: sum over polarizations of |eps . p_{j'j}|^2 at that
    direction.  Without: the angle-integrated weight (pi or 8pi/3) |p_{jj'}|^2.
    """
    deficit = spec.sum_rule_deficit(j)
    if deficit > deficit_warn:
        warnings.warn(f"level {j}: p^2 sum rule deficit {deficit:.1%} exceeds "
                      f"{deficit_warn:.0%}", CompletenessWarning, stacklevel=2)
    if k_hat is None:
        if spec.d not in _ANGULAR:
            raise ValueError("angle integration defined for d = 2, 3")
        return _ANGULAR[spec.d] * spec.p_abs2(j)
    k = np.asarray(k_hat, float)
    eps = polarization_basis(k) if basis is None else np.atleast_2d(np.asarray(basis, float))
    proj = np.einsum("pa,ka->kp", eps, spec.p[:, j, :])
    return np.sum(np.abs(proj) ** 2, axis=1)


def angular_average_check(spec: AtomSpectrum, j: int, n_angles: int = 64) -> np.ndarray:
    """Numerical angle integral of the polarization sum (for cross-checks)."""
    if spec.d == 2:
        phi = 2 * math.pi * np.arange(n_angles) / n_angles
        acc = sum(momentum_coupling_sum(spec, j, [math.cos(f), math.sin(f)], deficit_warn=math.inf)
                  for f in phi)
        return acc * (2 * math.pi / n_angles)
    # Gauss-Legendre in cos(theta) times uniform phi
    ct, wt = np.polynomial.legendre.leggauss(n_angles // 2)
    phi = 2 * math.pi * np.arange(n_angles) / n_angles
    acc = 0.0
    for c, w in zip(ct, wt):
        s = math.sqrt(1 - c * c)
        for f in phi:
            acc = acc + w * (2 * math.pi / n_angles) * momentum_coupling_sum(
                spec, j, [s * math.cos(f), s * math.sin(f), c], deficit_warn=math.inf)
    return acc
