"""Cone geometry: aperture calibration, cap quadrature and plane rotations.

The cone around a unit axis ``y`` of half-angle ``alpha`` is

    T^{a,b}(y) = { z : angle(y, z) < alpha, a < |z| < b }

and its trace on the unit sphere is the cap A(alpha).  The aperture alpha_p
is fixed by requiring that the second moments of the cap satisfy

    Q(alpha) = int_A <z,e1>^2 / int_A <z,e2>^2 = p - 1.

Everything is reduced to the polar angle theta = angle(e1, z): the surface
element is |S^{N-2}| sin^{N-2}(theta) dtheta and the average of <z,e2>^2 over
the (N-2)-sphere of fixed theta is sin^2(theta)/(N-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np

__all__ = [
    "CalibrationError",
    "ConeSpec",
    "make_cone",
    "sphere_area",
    "cap_moment_ratio",
    "cap_measure",
    "aperture_for_exponent",
    "cap_second_moment",
    "cap_rule",
    "cap_mean_axial",
    "rotation_between",
    "rotate_from_e1",
    "in_cone",
    "sphere_grid",
]


class CalibrationError(RuntimeError):
    """Bisection for the aperture did not reach the tolerance."""

    def __init__(self, msg, bracket):
        super().__init__(f"{msg}; final bracket [{bracket[0]!r}, {bracket[1]!r}]")
        self.bracket = bracket


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_interval(n: int, a: float, b: float):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def sphere_area(k: int) -> float:
    """Surface measure of the unit k-sphere S^k in R^{k+1} (|S^0| = 2)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


def _polar_moments(N: int, alpha: float, order: int):
    th, w = gauss_interval(order, 0.0, alpha)
    s = np.sin(th)
    c = np.cos(th)
    sn2 = s ** (N - 2)
    top = float(np.sum(w * c * c * sn2))
    bot = float(np.sum(w * s * s * sn2)) / (N - 1)
    return top, bot


def cap_moment_ratio(N: int, alpha: float, order: int = 64) -> float:
    """Q(alpha): ratio of the axial to the transverse second moment of the cap."""
    if not (0.0 < alpha < math.pi):
        raise ValueError(f"alpha must lie in (0, pi), got {alpha!r}")
    if N < 2:
        raise ValueError("N must be at least 2")
    top, bot = _polar_moments(N, alpha, order)
    return top / bot


def cap_measure(N: int, alpha: float, order: int = 64) -> float:
    """Surface measure of the cap {|z| = 1, angle(e1, z) < alpha}."""
    if not (0.0 < alpha <= math.pi / 2 + 1e-15):
        raise ValueError(f"alpha must lie in (0, pi/2], got {alpha!r}")
    if N == 2:
        return 2.0 * alpha
    if N == 3:
        return 2.0 * math.pi * (1.0 - math.cos(alpha))
    th, w = gauss_interval(order, 0.0, alpha)
    return sphere_area(N - 2) * float(np.sum(w * np.sin(th) ** (N - 2)))


def aperture_for_exponent(N: int, p: float, tol: float = 1e-12, max_iter: int = 200,
                          order: int = 64) -> float:
    """Solve Q(alpha) = p - 1 by bisection on [1e-6, pi/2].

    Q decreases from +inf to 1 on the bracket, so the root is unique.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    if p < 2:
        raise ValueError(f"exponent p must be >= 2, got {p!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    target = p - 1.0
    lo, hi = 1e-6, math.pi / 2
    if abs(cap_moment_ratio(N, hi, order) - target) <= tol:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        g = cap_moment_ratio(N, mid, order) - target
        if abs(g) <= tol:
            return mid
        if g > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    raise CalibrationError(f"aperture bisection for N={N}, p={p} missed tol={tol}", (lo, hi))


@dataclass(frozen=True)
class ConeSpec:
    dim: int
    exponent: float
    aperture: float
    cap_measure: float
    calibration_tol: float = 1e-12

    def to_dict(self):
        return asdict(self)


def make_cone(N: int, p: float, tol: float = 1e-12) -> ConeSpec:
    alpha = aperture_for_exponent(N, p, tol)
    return ConeSpec(int(N), float(p), alpha, cap_measure(N, alpha), tol)


def cap_mean_axial(spec: ConeSpec, order: int = 64) -> float:
    """Average of <theta, e1> over the cap (the c-bar of the affine formula)."""
    N, alpha = spec.dim, spec.aperture
    th, w = gauss_interval(order, 0.0, alpha)
    sn2 = np.sin(th) ** (N - 2)
    return float(np.sum(w * np.cos(th) * sn2) / np.sum(w * sn2))


def cap_rule(spec: ConeSpec, polar_order: int = 32, azimuthal_order: int = 32):
    """Angular product rule on the cap A_p around e1.

    Returns unit vectors (K, N) and positive weights summing to |A_p|.
    N = 2 uses Gauss nodes on each of the two arc halves (-alpha, 0), (0, alpha).
    N = 3 uses polar Gauss nodes weighted by sin(theta) and an equispaced azimuth.
    """
    N, alpha = spec.dim, spec.aperture
    if N == 2:
        th, w = gauss_interval(polar_order, 0.0, alpha)
        ang = np.concatenate([-th[::-1], th])
        wt = np.concatenate([w[::-1], w])
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return dirs, wt
    if N == 3:
        th, w = gauss_interval(polar_order, 0.0, alpha)
        phi = 2.0 * math.pi * (np.arange(azimuthal_order) + 0.5) / azimuthal_order
        T, P = np.meshgrid(th, phi, indexing="ij")
        W = (w * np.sin(th))[:, None] * np.full(azimuthal_order, 2.0 * math.pi / azimuthal_order)[None, :]
        dirs = np.stack([np.cos(T), np.sin(T) * np.cos(P), np.sin(T) * np.sin(P)], axis=-1)
        return dirs.reshape(-1, 3), W.reshape(-1)
    raise NotImplementedError("cap quadrature is provided for N = 2 and N = 3")


def cap_second_moment(spec: ConeSpec, polar_order: int = 32, azimuthal_order: int = 32) -> float:
    """Quadrature value of int_{A_p} <z, e2>^2 dsigma."""
    dirs, w = cap_rule(spec, polar_order, azimuthal_order)
    return float(np.sum(w * dirs[:, 1] ** 2))


def _check_unit(v, name):
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > 1e-10:
        raise ValueError(f"{name} must be a unit vector (norm {n!r})")


def rotation_between(y, ytilde) -> np.ndarray:
    """The rotation R with R y = ytilde acting in span{y, ytilde}.

    For ytilde = -y the plane is fixed by the coordinate axis least aligned
    with y (lowest index among ties).
    """
    y = np.asarray(y, dtype=float)
    yt = np.asarray(ytilde, dtype=float)
    _check_unit(y, "y")
    _check_unit(yt, "ytilde")
    N = y.size
    c = float(np.dot(y, yt))
    w = yt - c * y
    s = float(np.linalg.norm(w))
    if s < 1e-15:
        if c > 0:
            return np.eye(N)
        k = int(np.argmin(np.abs(y)))
        e = np.zeros(N)
        e[k] = 1.0
        w = e - np.dot(e, y) * y
        v = w / np.linalg.norm(w)
        c, s = -1.0, 0.0
    else:
        # second Gram-Schmidt pass: w loses orthogonality to y when c ~ -1
        w = w - np.dot(w, y) * y
        v = w / np.linalg.norm(w)
        c, s = float(np.dot(yt, y)), float(np.dot(yt, v))
    u = y
    R = np.eye(N) + (c - 1.0) * (np.outer(u, u) + np.outer(v, v)) + s * (np.outer(v, u) - np.outer(u, v))
    return R


def rotate_from_e1(Y, Z) -> np.ndarray:
    """Apply R_{y,e1} to every node for every axis.

    Y is (M, N) unit axes, Z is (K, N) nodes around e1; returns (M, K, N).
    Antipodal axes y = -e1 fall back on rotation_between.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    M, N = Y.shape
    if N == 2:
        c, s = Y[:, 0], Y[:, 1]
        x = c[:, None] * Z[None, :, 0] - s[:, None] * Z[None, :, 1]
        yv = s[:, None] * Z[None, :, 0] + c[:, None] * Z[None, :, 1]
        return np.stack([x, yv], axis=-1)
    c = Y[:, 0]
    W = Y.copy()
    W[:, 0] = 0.0
    s = np.linalg.norm(W, axis=1)
    out = np.empty((M, Z.shape[0], N))
    good = s > 1e-15
    if np.any(good):
        V = W[good] / s[good, None]
        cg, sg = c[good], s[good]
        z1 = Z[None, :, 0]
        vz = np.einsum("mn,kn->mk", V, Z)
        R = Z[None, :, :] + ((cg - 1.0)[:, None] * z1)[..., None] * np.eye(N)[0] \
            + ((cg - 1.0)[:, None] * vz)[..., None] * V[:, None, :] \
            + (sg[:, None] * z1)[..., None] * V[:, None, :] \
            - (sg[:, None] * vz)[..., None] * np.eye(N)[0]
        out[good] = R
    for m in np.flatnonzero(~good):
        out[m] = Z @ rotation_between(np.eye(N)[0], Y[m]).T
    return out


def in_cone(z, y, spec: ConeSpec, a: float = 0.0, b: float = math.inf) -> bool:
    """True iff angle(y, z) < alpha_p and a < |z| < b."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    r = float(np.linalg.norm(z))
    if not (a < r < b):
        return False
    cosang = float(np.dot(z, y)) / (r * float(np.linalg.norm(y)))
    return math.acos(max(-1.0, min(1.0, cosang))) < spec.aperture


def sphere_grid(N: int, M: int | None = None) -> np.ndarray:
    """Deterministic unit-sphere discretization.

    N = 2: M equispaced angles starting at e1 (default 256).
    N = 3: Fibonacci lattice with M points (default 512).
    """
    if N == 2:
        M = 256 if M is None else int(M)
        ang = 2.0 * math.pi * np.arange(M) / M
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if N == 3:
        M = 512 if M is None else int(M)
        i = np.arange(M)
        zc = 1.0 - (2.0 * i + 1.0) / M
        rho = np.sqrt(np.maximum(0.0, 1.0 - zc * zc))
        phi = i * math.pi * (3.0 - math.sqrt(5.0))
        return np.stack([zc, rho * np.cos(phi), rho * np.sin(phi)], axis=1)
    raise NotImplementedError("sphere grids are provided for N = 2 and N = 3")
