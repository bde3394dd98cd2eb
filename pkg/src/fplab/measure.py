"""The singular measure mu = C(N,s) |z|^{-N-2s} dz restricted to cones.

Radial integrals use the substitution t = r^{-2s}, under which the radial
density r^{-1-2s} dr becomes dt/(2s).  A Gauss-Legendre rule in t therefore
integrates the unbounded shell (a, inf) with finitely many nodes and its
weights reproduce the mass exactly.  The radial range is cut into geometric
panels so that the nodes stay spread over every scale between a and the
far field; each panel carries its own Gauss rule in t.

For shells starting at the origin the density is not integrable; there a
Gauss-Jacobi rule with weight r^{1-2s} is used and the node weights are
divided by r^2, which is exact for integrands of the form |z|^2 * smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .cone import ConeSpec, cap_rule, gauss_interval

__all__ = [
    "FractionalKernel",
    "make_kernel",
    "normalizing_constant",
    "truncated_cone_mass",
    "radial_rule",
    "ConeQuadrature",
    "cone_quadrature",
    "increments_from_uniforms",
    "uniforms_per_increment",
    "sample_increment",
]


def normalizing_constant(N: int, s: float) -> float:
    """C(N,s) = 4^s s Gamma(N/2 + s) / (pi^{N/2} Gamma(1 - s))."""
    if N < 1:
        raise ValueError("N must be positive")
    if not (0.5 < s < 1.0):
        raise ValueError(f"order s must lie in (1/2, 1), got {s!r}")
    return 4.0 ** s * s * math.gamma(N / 2.0 + s) / (math.pi ** (N / 2.0) * math.gamma(1.0 - s))


@dataclass(frozen=True)
class FractionalKernel:
    dim: int
    order: float
    norm_const: float

    def to_dict(self):
        return asdict(self)


def make_kernel(N: int, s: float) -> FractionalKernel:
    return FractionalKernel(int(N), float(s), normalizing_constant(N, s))


def truncated_cone_mass(spec: ConeSpec, kernel: FractionalKernel, a: float, b: float = math.inf) -> float:
    """mu(T^{a,b}) = C |A_p| (a^{-2s} - b^{-2s}) / (2s)."""
    if a < 0 or b < a:
        raise ValueError(f"need 0 <= a <= b, got a={a!r}, b={b!r}")
    s = kernel.order
    if a == 0:
        if b == 0:
            return 0.0
        raise ValueError("the cone has infinite mass near the apex (a = 0)")
    tb = 0.0 if math.isinf(b) else b ** (-2 * s)
    return kernel.norm_const * spec.cap_measure * (a ** (-2 * s) - tb) / (2 * s)


@lru_cache(maxsize=64)
def _jacobi(n: int, beta: float):
    x, w = roots_jacobi(n, 0.0, beta)
    return x, w


def _panel_edges(a, b, ratio, far):
    edges = [a]
    r = a
    while r * ratio < min(b, far) * (1 - 1e-12):
        r *= ratio
        edges.append(r)
    if math.isinf(b):
        if edges[-1] < far:
            edges.append(far)
        edges.append(math.inf)
    else:
        edges.append(b)
    return edges


def radial_rule(s: float, a: float, b: float = math.inf, order: int = 8,
                panel_ratio: float = 4.0, far: float | None = None, near_order: int = 16):
    """Nodes r_i and weights w_i with sum w_i g(r_i) ~ int_a^b g(r) r^{-1-2s} dr.

    a = 0 is allowed for finite b; the rule is then exact for g = r^2 * poly(r)
    of moderate degree and is meant for second differences.
    """
    if not (0 <= a < b):
        raise ValueError(f"need 0 <= a < b, got a={a!r}, b={b!r}")
    rs, ws = [], []
    if a == 0:
        if math.isinf(b):
            raise ValueError("a = 0 requires a finite outer radius")
        x, w = _jacobi(int(near_order), 1.0 - 2.0 * s)
        r = 0.5 * b * (1.0 + x)
        rs.append(r)
        ws.append((0.5 * b) ** (2.0 - 2.0 * s) * w / r ** 2)
        return np.concatenate(rs), np.concatenate(ws)
    if far is None:
        far = 64.0 * max(1.0, a)
    edges = _panel_edges(a, b, panel_ratio, far)
    for lo, hi in zip(edges[:-1], edges[1:]):
        t_hi = lo ** (-2 * s)
        t_lo = 0.0 if math.isinf(hi) else hi ** (-2 * s)
        t, w = gauss_interval(order, t_lo, t_hi)
        rs.append(t ** (-1.0 / (2 * s)))
        ws.append(w / (2 * s))
    return np.concatenate(rs), np.concatenate(ws)


@dataclass(frozen=True)
class ConeQuadrature:
    """Product rule over T^{a,b}(e1); weights include C(N,s)."""

    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float
    meta: dict = field(default_factory=dict)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def normalized_weights(self) -> np.ndarray:
        return self.weights / np.sum(self.weights)

    def integrate(self, g) -> float:
        """Integrate a vectorized g: (K, N) -> (K,) against mu over the truncated cone."""
        return float(np.dot(self.weights, g(self.nodes)))


def cone_quadrature(spec: ConeSpec, kernel: FractionalKernel, a: float, b: float = math.inf,
                    radial_order: int = 8, angular_orders=(32, 32), panel_ratio: float = 4.0,
                    far: float | None = None, near_order: int = 16) -> ConeQuadrature:
    """Product quadrature for mu over T^{a,b}(e1).

    radial_order is the number of Gauss nodes in t per geometric panel.
    """
    if spec.dim != kernel.dim:
        raise ValueError("cone and kernel dimensions differ")
    r, wr = radial_rule(kernel.order, a, b, radial_order, panel_ratio, far, near_order)
    dirs, wa = cap_rule(spec, *angular_orders)
    nodes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, spec.dim)
    weights = kernel.norm_const * (wr[:, None] * wa[None, :]).reshape(-1)
    meta = {
        "radial_nodes": int(r.size),
        "angular_nodes": int(wa.size),
        "radial_order": int(radial_order),
        "angular_orders": list(angular_orders),
        "panel_ratio": float(panel_ratio),
        "apex": bool(a == 0),
    }
    return ConeQuadrature(nodes, weights, float(a), float(b), meta)


def uniforms_per_increment(N: int) -> int:
    """Uniform variates consumed by one increment (radius plus angles)."""
    if N == 2:
        return 2
    if N == 3:
        return 3
    raise NotImplementedError("sampling is provided for N = 2 and N = 3")


def increments_from_uniforms(U, spec: ConeSpec, s: float) -> np.ndarray:
    """Map uniforms U of shape (n, k) in [0,1) to increments in T^{1,inf}(e1).

    Columns: radius, then the polar angle, then the azimuth (N = 3).
    The radius r = (1-U)^{-1/(2s)} has tail P(r > R) = R^{-2s}.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    N, alpha = spec.dim, spec.aperture
    r = (1.0 - U[:, 0]) ** (-1.0 / (2.0 * s))
    if N == 2:
        th = (2.0 * U[:, 1] - 1.0) * alpha
        return r[:, None] * np.stack([np.cos(th), np.sin(th)], axis=1)
    if N == 3:
        ct = 1.0 - U[:, 1] * (1.0 - math.cos(alpha))
        st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
        ph = 2.0 * math.pi * U[:, 2]
        return r[:, None] * np.stack([ct, st * np.cos(ph), st * np.sin(ph)], axis=1)
    raise NotImplementedError("sampling is provided for N = 2 and N = 3")


def sample_increment(rng: np.random.Generator, spec: ConeSpec, kernel: FractionalKernel, size=None):
    """Draw from mu restricted to T^{1,inf}(e1), normalized."""
    n = 1 if size is None else int(size)
    U = rng.random((n, uniforms_per_increment(spec.dim)))
    z = increments_from_uniforms(U, spec, kernel.order)
    return z[0] if size is None else z
