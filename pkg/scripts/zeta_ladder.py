"""Extrapolated d=2 kernel constant on two regulator ladders, against the closed form."""

import math

import numpy as np

from massren.kernels import ZETA_LADDER, ZETA_LADDER_ALT, zeta_extrapolate

if __name__ == "__main__":
    closed = -(math.log(2) + np.euler_gamma) / 2
    for name, ladder in (("primary", ZETA_LADDER), ("alternate", ZETA_LADDER_ALT)):
        val, err = zeta_extrapolate(1.0, ladder=ladder)
        print(f"{name:9s} ladder: zeta = {val:.15f}  (estimate {err:.1e}, closed form diff {val - closed:+.1e})")
    for eta in (0.5, 2.0):
        v, _ = zeta_extrapolate(1.0, eta=eta)
        print(f"eta = {eta}: zeta(eta) - zeta(1) + ln(eta) = {v - closed + math.log(eta):+.2e}")
