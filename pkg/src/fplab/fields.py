"""Evaluable fields, exterior data and smooth probes.

A field is any object callable on an (..., N) array of points returning the
values; ``sup_norm`` is a declared bound (``inf`` for unbounded test
functions such as affine probes).  ``LatticeField`` glues grid values inside
a domain to analytic exterior data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "AnalyticField",
    "Lattice",
    "LatticeField",
    "constant",
    "affine",
    "smooth_cutoff",
    "cutoff_quadratic",
    "radial_power",
    "SmoothProbe",
    "probe_affine",
    "probe_quadratic",
    "probe_cutoff_quadratic",
    "probe_radial_power",
    "datum_from_config",
]


class AnalyticField:
    """Field given by a vectorized callable."""

    def __init__(self, fn, dim: int, sup_norm: float = math.inf, name: str = "field",
                 params: dict | None = None, lip: float = math.inf, bounds=None, code=None):
        self.fn = fn
        self.dim = int(dim)
        self.sup_norm = float(sup_norm)
        self.name = name
        self.params = dict(params or {})
        self.lip = float(lip)
        # (inf, sup) over R^N; defaults to the symmetric sup-norm bound
        self.bounds = (-self.sup_norm, self.sup_norm) if bounds is None else tuple(map(float, bounds))
        # (kind, params) understood by the compiled kernels, or None
        self.code = code

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        return self.fn(pts)

    def describe(self):
        return {"name": self.name, **self.params}

    def __add__(self, c: float):
        fn = self.fn
        code = None
        if self.code is not None:
            kind, prm = self.code
            prm = np.array(prm, dtype=float)
            prm[0] += c
            code = (kind, prm)
        return AnalyticField(lambda q: fn(q) + c, self.dim, self.sup_norm + abs(c),
                             f"{self.name}+{c}", {**self.params, "shift": c}, self.lip,
                             (self.bounds[0] + c, self.bounds[1] + c), code)


# datum codes for the compiled kernels; params[0] is always an additive shift
F_CONST, F_AFFINE, F_RADIAL = 0, 1, 2


def constant(c: float, dim: int) -> AnalyticField:
    c = float(c)
    return AnalyticField(lambda q: np.full(q.shape[:-1], c), dim, abs(c), "constant",
                         {"value": c}, 0.0, (c, c), (F_CONST, np.array([c])))


def affine(b, c: float = 0.0, clip: float | None = None) -> AnalyticField:
    """<b, x> + c, optionally clipped to [-clip, clip] so that it is bounded."""
    b = np.asarray(b, dtype=float)
    c = float(c)
    if clip is None:
        return AnalyticField(lambda q: q @ b + c, b.size, math.inf, "affine",
                             {"b": b.tolist(), "c": c}, float(np.linalg.norm(b)),
                             (-math.inf, math.inf), (F_AFFINE, np.r_[0.0, c, math.inf, b]))
    L = float(clip)
    lo, hi = (-L, L) if np.any(b) else (min(max(c, -L), L),) * 2
    return AnalyticField(lambda q: np.clip(q @ b + c, -L, L), b.size, L, "affine",
                         {"b": b.tolist(), "c": c, "clip": L}, float(np.linalg.norm(b)),
                         (lo, hi), (F_AFFINE, np.r_[0.0, c, L, b]))


# --- smooth cutoff -----------------------------------------------------------

def _f(t):
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-1.0 / t[m])
    return out


def _f1(t):
    out = np.zeros_like(t)
    m = t > 0
    tm = t[m]
    out[m] = np.exp(-1.0 / tm) / tm ** 2
    return out


def _f2(t):
    out = np.zeros_like(t)
    m = t > 0
    tm = t[m]
    out[m] = np.exp(-1.0 / tm) * (1.0 / tm ** 4 - 2.0 / tm ** 3)
    return out


def smooth_cutoff(rho, r1: float, r2: float, deriv: int = 0):
    """C-infinity radial cutoff: 1 on [0, r1], 0 on [r2, inf).

    Returns the value (deriv=0) or its first/second derivative in rho.
    """
    rho = np.asarray(rho, dtype=float)
    w = r2 - r1
    t = np.clip((rho - r1) / w, 0.0, 1.0)
    a, b = _f(t), _f(1.0 - t)
    D = a + b
    g = a / D
    if deriv == 0:
        return 1.0 - g
    a1, b1 = _f1(t), -_f1(1.0 - t)
    D1 = a1 + b1
    g1 = (a1 * D - a * D1) / D ** 2
    if deriv == 1:
        return -g1 / w
    a2, b2 = _f2(t), _f2(1.0 - t)
    D2 = a2 + b2
    g2 = ((a2 * D - a * D2) * D - 2.0 * D1 * (a1 * D - a * D1)) / D ** 3
    return -g2 / w ** 2


_CUTOFF_SLOPE_CACHE: dict = {}


def _cutoff_max_slope(r1, r2):
    key = (r1, r2)
    if key not in _CUTOFF_SLOPE_CACHE:
        rho = np.linspace(r1, r2, 200001)
        _CUTOFF_SLOPE_CACHE[key] = float(np.max(np.abs(smooth_cutoff(rho, r1, r2, 1))))
    return _CUTOFF_SLOPE_CACHE[key]


def cutoff_quadratic(b, B, center=None, r1: float = 0.5, r2: float = 1.5):
    """chi(|z-c|) * (<b, z-c> + 1/2 <B(z-c), z-c>) and its derivatives.

    Returns (value, gradient, hessian, sup_bound, lipschitz_bound).
    """
    b = np.asarray(b, dtype=float)
    B = np.asarray(B, dtype=float)
    N = b.size
    c = np.zeros(N) if center is None else np.asarray(center, dtype=float)

    def value(q):
        d = np.asarray(q, dtype=float) - c
        rho = np.linalg.norm(d, axis=-1)
        quad = d @ b + 0.5 * np.einsum("...i,ij,...j->...", d, B, d)
        return smooth_cutoff(rho, r1, r2) * quad

    def gradient(q):
        d = np.asarray(q, dtype=float) - c
        rho = np.linalg.norm(d, axis=-1)
        quad = d @ b + 0.5 * np.einsum("...i,ij,...j->...", d, B, d)
        gq = b + d @ B.T
        chi = smooth_cutoff(rho, r1, r2)
        chi1 = smooth_cutoff(rho, r1, r2, 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            rhat = np.where(rho[..., None] > 0, d / rho[..., None], 0.0)
        return chi[..., None] * gq + (quad * chi1)[..., None] * rhat

    def hessian(q):
        q = np.asarray(q, dtype=float)
        d = q - c
        rho = float(np.linalg.norm(d))
        quad = float(d @ b + 0.5 * d @ B @ d)
        gq = b + B @ d
        chi = float(smooth_cutoff(rho, r1, r2))
        if rho <= r1:
            return np.array(B, dtype=float)
        chi1 = float(smooth_cutoff(rho, r1, r2, 1))
        chi2 = float(smooth_cutoff(rho, r1, r2, 2))
        rh = d / rho
        P = np.outer(rh, rh)
        gchi = chi1 * rh
        hchi = chi2 * P + chi1 / rho * (np.eye(N) - P)
        return chi * B + np.outer(gq, gchi) + np.outer(gchi, gq) + quad * hchi

    Bop = float(np.linalg.norm(B, 2))
    sup_q = float(np.linalg.norm(b)) * r2 + 0.5 * Bop * r2 ** 2
    lip = float(np.linalg.norm(b)) + Bop * r2 + _cutoff_max_slope(r1, r2) * sup_q
    return value, gradient, hessian, sup_q, lip


def radial_power(t: float, dim: int) -> AnalyticField:
    """The barrier min{2^t, |x|^{-t}}."""
    t = float(t)
    cap = 2.0 ** t

    def fn(q):
        r = np.linalg.norm(q, axis=-1)
        with np.errstate(divide="ignore"):
            return np.minimum(cap, np.where(r > 0, r, 0.0) ** (-t))
    return AnalyticField(fn, dim, cap, "radial_power", {"t": t}, t * 2.0 ** (t + 1),
                         (0.0, cap), (F_RADIAL, np.array([0.0, t])))


# --- lattice fields ------------------------------------------------------------

@dataclass
class Lattice:
    """Uniform lattice lo + h * k, k in prod(range(shape))."""

    lo: np.ndarray
    h: float
    shape: tuple

    @property
    def dim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def strides(self):
        st = np.ones(self.dim, dtype=np.int64)
        for i in range(self.dim - 2, -1, -1):
            st[i] = st[i + 1] * self.shape[i + 1]
        return st

    def coords(self) -> np.ndarray:
        axes = [self.lo[i] + self.h * np.arange(self.shape[i]) for i in range(self.dim)]
        G = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in G], axis=1)

    @classmethod
    def covering(cls, lo, hi, h, margin: int = 2):
        """Lattice aligned with h * Z^N covering [lo, hi] plus margin cells."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        klo = np.floor(lo / h - 1e-9).astype(np.int64) - margin
        khi = np.ceil(hi / h + 1e-9).astype(np.int64) + margin
        return cls(klo * h, float(h), tuple(int(v) for v in (khi - klo + 1)))

    def to_dict(self):
        return {"lo": self.lo.tolist(), "h": self.h, "shape": list(self.shape)}


def multilinear(lattice: Lattice, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of flat lattice values at pts (n, N)."""
    pts = np.atleast_2d(pts)
    N = lattice.dim
    rel = (pts - lattice.lo) / lattice.h
    shape = np.asarray(lattice.shape)
    i0 = np.clip(np.floor(rel).astype(np.int64), 0, shape - 2)
    fr = np.clip(rel - i0, 0.0, 1.0)
    st = lattice.strides
    out = np.zeros(pts.shape[0])
    for corner in range(1 << N):
        bits = np.array([(corner >> (N - 1 - k)) & 1 for k in range(N)])
        w = np.prod(np.where(bits, fr, 1.0 - fr), axis=1)
        idx = (i0 + bits) @ st
        out += w * values[idx]
    return out


class LatticeField:
    """Grid values inside a domain, analytic exterior data elsewhere."""

    def __init__(self, lattice: Lattice, values: np.ndarray, domain, exterior):
        self.lattice = lattice
        self.values = np.asarray(values, dtype=float)
        self.domain = domain
        self.exterior = exterior
        self.dim = lattice.dim
        self.sup_norm = max(float(np.max(np.abs(self.values))), getattr(exterior, "sup_norm", math.inf))

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        shp = pts.shape[:-1]
        flat = pts.reshape(-1, self.dim)
        inside = self.domain.contains(flat)
        out = np.empty(flat.shape[0])
        if np.any(inside):
            out[inside] = multilinear(self.lattice, self.values, flat[inside])
        if np.any(~inside):
            out[~inside] = self.exterior(flat[~inside])
        return out.reshape(shp)


# --- smooth probes ----------------------------------------------------------------

@dataclass
class SmoothProbe:
    """A function together with its local C^{1,1} data at a base point x.

    C_x bounds half the Hessian (Frobenius norm) on B_{r_x}(x); omega is a
    modulus of continuity on the complement of that ball.
    """

    value: Callable
    gradient: Callable
    hessian: Callable
    x: np.ndarray
    r_x: float
    C_x: float
    omega: Callable
    sup_norm: float = math.inf
    name: str = "probe"
    params: dict = field(default_factory=dict)
    lip: float = math.inf

    @property
    def dim(self):
        return int(np.asarray(self.x).size)

    def __call__(self, pts):
        return self.value(np.asarray(pts, dtype=float))

    def grad_x(self):
        return np.asarray(self.gradient(np.asarray(self.x, dtype=float)), dtype=float)

    def hess_x(self):
        return np.asarray(self.hessian(np.asarray(self.x, dtype=float)), dtype=float)

    def at(self, x, r_x=None, C_x=None):
        """Same function, base point moved to x."""
        return SmoothProbe(self.value, self.gradient, self.hessian, np.asarray(x, dtype=float),
                           self.r_x if r_x is None else r_x, self.C_x if C_x is None else C_x,
                           self.omega, self.sup_norm, self.name, self.params, self.lip)

    def describe(self):
        return {"name": self.name, "x": np.asarray(self.x).tolist(), "r_x": self.r_x,
                "C_x": self.C_x, **self.params}


def _lipschitz_modulus(lip, osc):
    def omega(m):
        return np.minimum(lip * np.asarray(m, dtype=float), osc)
    return omega


def probe_affine(b, x=None, r_x: float = 0.5) -> SmoothProbe:
    b = np.asarray(b, dtype=float)
    N = b.size
    x = np.zeros(N) if x is None else np.asarray(x, dtype=float)
    lip = float(np.linalg.norm(b))
    return SmoothProbe(
        value=lambda q: np.asarray(q) @ b,
        gradient=lambda q: np.broadcast_to(b, np.shape(q)).copy(),
        hessian=lambda q: np.zeros((N, N)),
        x=x, r_x=r_x, C_x=0.0, omega=lambda m: lip * np.asarray(m, dtype=float),
        name="affine", params={"b": b.tolist()}, lip=lip)


def probe_quadratic(b, B, x=None, r_x: float = 1.0) -> SmoothProbe:
    """<b, z-x> + 1/2 <B(z-x), z-x> (unbounded; used for local ball checks)."""
    b = np.asarray(b, dtype=float)
    B = np.asarray(B, dtype=float)
    N = b.size
    x = np.zeros(N) if x is None else np.asarray(x, dtype=float)

    def value(q):
        d = np.asarray(q) - x
        return d @ b + 0.5 * np.einsum("...i,ij,...j->...", d, B, d)

    return SmoothProbe(
        value=value,
        gradient=lambda q: b + (np.asarray(q) - x) @ B.T,
        hessian=lambda q: B.copy(),
        x=x, r_x=r_x, C_x=0.5 * float(np.linalg.norm(B)),
        omega=lambda m: np.full_like(np.asarray(m, dtype=float), math.inf),
        name="quadratic", params={"b": b.tolist(), "B": B.tolist()})


def probe_cutoff_quadratic(b, B, x=None, r1: float = 0.5, r2: float = 1.5) -> SmoothProbe:
    """Tilted bump: cutoff times a quadratic centred at x; exactly quadratic on B_{r1}(x)."""
    b = np.asarray(b, dtype=float)
    B = np.asarray(B, dtype=float)
    N = b.size
    x = np.zeros(N) if x is None else np.asarray(x, dtype=float)
    value, grad, hess, sup_q, lip = cutoff_quadratic(b, B, x, r1, r2)
    return SmoothProbe(value, grad, hess, x, r1, 0.5 * float(np.linalg.norm(B)),
                       _lipschitz_modulus(lip, 2.0 * sup_q), sup_q, "cutoff_quadratic",
                       {"b": b.tolist(), "B": B.tolist(), "r1": r1, "r2": r2}, lip)


def probe_radial_power(t: float, x) -> SmoothProbe:
    """f_t at a point |x| > 1/2, with the regularity ball kept off the kink."""
    x = np.asarray(x, dtype=float)
    N = x.size
    t = float(t)
    F = radial_power(t, N)
    rad = float(np.linalg.norm(x))
    if rad <= 0.5:
        raise ValueError("the base point must lie outside the plateau |x| <= 1/2")

    def gradient(q):
        q = np.asarray(q, dtype=float)
        r = np.linalg.norm(q, axis=-1)[..., None]
        return np.where(r > 0.5, -t * r ** (-t - 2.0) * q, 0.0)

    def hessian(q):
        q = np.asarray(q, dtype=float)
        r = float(np.linalg.norm(q))
        if r <= 0.5:
            return np.zeros((N, N))
        qh = q / r
        return -t * r ** (-t - 2.0) * (np.eye(N) - (t + 2.0) * np.outer(qh, qh))

    r_x = 0.5 * (rad - 0.5)
    rmin = rad - r_x
    hnorm = t * rmin ** (-t - 2.0) * math.sqrt((t + 1.0) ** 2 + (N - 1))
    return SmoothProbe(F.fn, gradient, hessian, x, r_x, 0.5 * hnorm,
                       _lipschitz_modulus(F.lip, 2.0 ** t), 2.0 ** t, "radial_power",
                       {"t": t}, F.lip)


def datum_from_config(cfg: dict, dim: int):
    """Exterior datum from a {'name': ..., params} mapping."""
    name = cfg.get("name")
    if name == "constant":
        return constant(float(cfg.get("value", 0.0)), dim)
    if name == "affine":
        b = cfg.get("b", [1.0] + [0.0] * (dim - 1))
        return affine(b, float(cfg.get("c", 0.0)), cfg.get("clip", 2.0))
    if name == "cutoff_quadratic":
        b = cfg.get("b", [0.0] * dim)
        B = cfg.get("B", np.eye(dim).tolist())
        val, _, _, sup_q, lip = cutoff_quadratic(b, B, cfg.get("center"), cfg.get("r1", 1.5),
                                                 cfg.get("r2", 3.0))
        return AnalyticField(val, dim, sup_q, "cutoff_quadratic", dict(cfg), lip, (-sup_q, sup_q))
    if name == "radial_power":
        return radial_power(float(cfg["t"]), dim)
    raise ValueError(f"unknown datum {name!r}")
