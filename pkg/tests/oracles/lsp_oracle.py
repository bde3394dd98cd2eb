"""Adaptive QUADPACK evaluation of the cone integral of a second difference (N = 2).

Independent of the package's Gauss rules: polar coordinates around the
gradient direction, the apex singularity r^{1-2s} handled by the algebraic
weight of quad, breakpoints at the probe's cutoff radii.
"""

import math

import numpy as np
from scipy import integrate


def lsp_polar_oracle(u, x, axis_angle, alpha, s, C, r_break, r_support, ux=None):
    """C * int_{-alpha}^{alpha} int_0^inf L_u(x, r theta) r^{-1-2s} dr dphi.

    u vanishes outside radius r_support around x, so beyond it the second
    difference equals -2 u(x) and that tail is added in closed form.
    """
    x = np.asarray(x, dtype=float)
    ux = float(u(x[None, :])[0]) if ux is None else ux

    def L(r, phi):
        th = np.array([math.cos(phi), math.sin(phi)])
        z = r * th
        pts = np.stack([x + z, x - z])
        v = u(pts)
        return float(v[0] + v[1] - 2.0 * ux)

    def g(r, phi):
        # second difference over r^2; the endpoint r = 0 is extrapolated
        if r < 1e-3:
            h = 1e-3
            return 2.0 * L(h, phi) / h ** 2 - L(2 * h, phi) / (4 * h * h)
        return L(r, phi) / r ** 2

    def inner(phi):
        ang = axis_angle + phi
        a = integrate.quad(lambda r: g(r, ang), 0.0, r_break, weight="alg",
                           wvar=(1.0 - 2.0 * s, 0.0), epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        b = integrate.quad(lambda r: L(r, ang) * r ** (-1.0 - 2.0 * s), r_break, r_support,
                           epsabs=1e-13, epsrel=1e-12, limit=400)[0]
        tail = -2.0 * ux * r_support ** (-2.0 * s) / (2.0 * s)
        return a + b + tail

    val = integrate.quad(inner, -alpha, alpha, epsabs=1e-12, epsrel=1e-11, limit=200)[0]
    return C * val
