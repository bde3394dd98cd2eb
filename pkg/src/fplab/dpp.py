"""Monotone fixed-point solver for the dynamic programming principle

    u = 1_D * A_eps u + 1_{R^N \\ D} * F.

The interior is represented on a uniform lattice aligned with h Z^N.  A cone
integral is assembled from ray integrals: for each of M sphere-grid rays the
radial t-substituted rule on (eps, inf) is applied and the ray integrals are
combined into cone averages by a fixed nonnegative window (for N = 2 the
exact integral of the piecewise-linear interpolant in angle).

The integrand jumps where a ray leaves D, since u and F differ across the
boundary.  For a ball or a box each ray leaves D once, at a radius computed in
closed form, and the radial rule is cut there: panels wholly inside D read
the lattice by multilinear interpolation, the cut panel gets fresh Gauss
nodes on each side of the exit radius and everything beyond reads F exactly.
Other domains classify each radial node by the domain test.

All weights are nonnegative, so the discrete operator is order preserving and
commutes with constants; iterating it from inf F gives a nondecreasing
sequence exactly as in the continuous argument.  Since lattice translation
leaves the fractional interpolation weights unchanged, corner offsets and
weights of the fixed radial nodes are precomputed once per (ray, node).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .cone import sphere_grid
from .fields import Lattice, LatticeField
from .measure import _panel_edges, radial_rule

__all__ = [
    "DirichletProblem",
    "DppOperator",
    "DppSolution",
    "build_operator",
    "apply_S",
    "solve_dpp",
    "iteration_bound",
    "contraction_factor",
    "monotonicity_check",
    "convergence_study",
]


@dataclass
class DirichletProblem:
    domain: object
    datum: object
    eps: float
    spec: object
    kernel: object

    @property
    def N(self):
        return self.spec.dim

    @property
    def s(self):
        return self.kernel.order

    def bounds(self):
        lo, hi = getattr(self.datum, "bounds", (-math.inf, math.inf))
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("the exterior datum must be bounded (declare finite bounds)")
        return float(lo), float(hi)

    def with_datum(self, datum):
        return DirichletProblem(self.domain, datum, self.eps, self.spec, self.kernel)

    def with_eps(self, eps):
        return DirichletProblem(self.domain, self.datum, float(eps), self.spec, self.kernel)

    def to_dict(self):
        return {"domain": self.domain.to_dict(), "datum": self.datum.describe(), "eps": self.eps,
                "N": self.N, "p": self.spec.exponent, "s": self.s,
                "aperture": self.spec.aperture}


def contraction_factor(problem: DirichletProblem) -> float:
    """q = 1 - (eps / diam D)^{2s}."""
    return 1.0 - (problem.eps / problem.domain.diameter) ** (2 * problem.s)


def iteration_bound(tol: float, osc: float, q: float) -> int:
    """ceil(log(tol / osc) / log q) + 1."""
    if osc <= 0 or tol >= osc:
        return 1
    return int(math.ceil(math.log(tol / osc) / math.log(q))) + 1


# --- compiled pieces -------------------------------------------------------------

@njit(cache=True, inline="always")
def _contains(kind, prm, N, y0, y1, y2):
    """Domain indicator on scalar coordinates (y2 ignored when N = 2)."""
    if kind == 2:
        if y0 <= prm[0] or y0 >= prm[N] or y1 <= prm[1] or y1 >= prm[N + 1]:
            return False
        return N == 2 or (prm[2] < y2 < prm[N + 2])
    d0 = y0 - prm[0]
    d1 = y1 - prm[1]
    d2 = y2 - prm[2] if N == 3 else 0.0
    rr = d0 * d0 + d1 * d1 + d2 * d2
    if kind == 1:
        return rr > prm[N] * prm[N] and rr < prm[N + 1] * prm[N + 1]
    if rr >= prm[N] * prm[N]:
        return False
    if kind == 0:
        return True
    # notch with apex c + (R - depth) axis and half-angle prm[2N+2]
    L = prm[N] - prm[2 * N + 1]
    w0 = d0 - L * prm[N + 1]
    w1 = d1 - L * prm[N + 2]
    dot = w0 * prm[N + 1] + w1 * prm[N + 2]
    nw = w0 * w0 + w1 * w1
    if N == 3:
        w2 = d2 - L * prm[N + 3]
        dot += w2 * prm[N + 3]
        nw += w2 * w2
    return dot < math.cos(prm[2 * N + 2]) * math.sqrt(nw)


@njit(cache=True, inline="always")
def _datum(kind, prm, N, y0, y1, y2):
    if kind == 0:
        return prm[0]
    if kind == 1:
        v = prm[1] + prm[3] * y0 + prm[4] * y1
        if N == 3:
            v += prm[5] * y2
        L = prm[2]
        if v > L:
            v = L
        elif v < -L:
            v = -L
        return v + prm[0]
    r = math.sqrt(y0 * y0 + y1 * y1 + y2 * y2)
    cap = 2.0 ** prm[1]
    if r <= 0.0:
        return cap + prm[0]
    return min(cap, r ** (-prm[1])) + prm[0]


@njit(cache=True)
def _exterior_sums(X, rz, rw, dkind, dprm, fkind, fprm):
    """ext[a, m] = sum over radial nodes outside D of w_k F(x_a + z_mk)."""
    n, N = X.shape
    M, K = rz.shape[0], rz.shape[1]
    ext = np.zeros((n, M))
    for a in range(n):
        x0 = X[a, 0]
        x1 = X[a, 1]
        x2 = X[a, 2] if N == 3 else 0.0
        for m in range(M):
            acc = 0.0
            for k in range(K):
                y0 = x0 + rz[m, k, 0]
                y1 = x1 + rz[m, k, 1]
                y2 = x2 + rz[m, k, 2] if N == 3 else 0.0
                if not _contains(dkind, dprm, N, y0, y1, y2):
                    acc += rw[k] * _datum(fkind, fprm, N, y0, y1, y2)
            ext[a, m] = acc
    return ext


@njit(cache=True, inline="always")
def _window_extremes(R, win_idx, win_w, win_norm):
    M = R.size
    J = win_idx.shape[1]
    mx = -np.inf
    mn = np.inf
    im = 0
    jm = 0
    for m in range(M):
        c = 0.0
        for j in range(J):
            c += win_w[m, j] * R[win_idx[m, j]]
        c *= win_norm[m]
        if c > mx:
            mx = c
            im = m
        if c < mn:
            mn = c
            jm = m
    return mx, mn, im, jm


@njit(cache=True, inline="always")
def _exit_radius(kind, prm, N, x0, x1, x2, d0, d1, d2):
    """Distance from x in D along the unit direction d to the boundary (ball or box)."""
    if kind == 0:
        c0 = x0 - prm[0]
        c1 = x1 - prm[1]
        c2 = x2 - prm[2] if N == 3 else 0.0
        b = c0 * d0 + c1 * d1 + c2 * d2
        cc = c0 * c0 + c1 * c1 + c2 * c2 - prm[N] * prm[N]
        return -b + math.sqrt(max(b * b - cc, 0.0))
    r = math.inf
    for k in range(N):
        xk = x0 if k == 0 else (x1 if k == 1 else x2)
        dk = d0 if k == 0 else (d1 if k == 1 else d2)
        if dk > 0:
            r = min(r, (prm[N + k] - xk) / dk)
        elif dk < 0:
            r = min(r, (prm[k] - xk) / dk)
    return r


@njit(cache=True, inline="always")
def _cut(rstar, tedge, s):
    """Panel j with t(r*) in [tedge[j+1], tedge[j]) and t(r*) itself.

    Panel j spans t in [tedge[j+1], tedge[j]] with t = r^{-2s}; an exit before
    eps is clamped to the first node of the rule.
    """
    t = rstar ** (-2.0 * s)
    if t >= tedge[0]:
        return 0, tedge[0]
    j = 0
    while tedge[j + 1] > t:
        j += 1
    return j, t


@njit(cache=True, inline="always")
def _interp(v, lo, h, shape, strides, N, y0, y1, y2):
    t0 = (y0 - lo[0]) / h
    t1 = (y1 - lo[1]) / h
    q0 = min(max(int(math.floor(t0)), 0), shape[0] - 2)
    q1 = min(max(int(math.floor(t1)), 0), shape[1] - 2)
    f0 = min(1.0, max(0.0, t0 - q0))
    f1 = min(1.0, max(0.0, t1 - q1))
    if N == 2:
        b = q0 * strides[0] + q1
        return ((1 - f0) * ((1 - f1) * v[b] + f1 * v[b + 1])
                + f0 * ((1 - f1) * v[b + strides[0]] + f1 * v[b + strides[0] + 1]))
    t2 = (y2 - lo[2]) / h
    q2 = min(max(int(math.floor(t2)), 0), shape[2] - 2)
    f2 = min(1.0, max(0.0, t2 - q2))
    b = q0 * strides[0] + q1 * strides[1] + q2
    s = 0.0
    for c in range(8):
        e0 = (c >> 2) & 1
        e1 = (c >> 1) & 1
        e2 = c & 1
        w = (f0 if e0 else 1 - f0) * (f1 if e1 else 1 - f1) * (f2 if e2 else 1 - f2)
        s += w * v[b + e0 * strides[0] + e1 * strides[1] + e2]
    return s


@njit(cache=True)
def _split_tables(X, dirs, tedge, s, dkind, dprm):
    """Cut panel index and t-coordinate of the exit radius for every (node, ray)."""
    n, N = X.shape
    M = dirs.shape[0]
    jcut = np.zeros((n, M), dtype=np.int32)
    tstar = np.zeros((n, M))
    for a in range(n):
        x0 = X[a, 0]
        x1 = X[a, 1]
        x2 = X[a, 2] if N == 3 else 0.0
        for m in range(M):
            d2 = dirs[m, 2] if N == 3 else 0.0
            r = _exit_radius(dkind, dprm, N, x0, x1, x2, dirs[m, 0], dirs[m, 1], d2)
            j, t = _cut(r, tedge, s)
            jcut[a, m] = j
            tstar[a, m] = t
    return jcut, tstar


@njit(cache=True)
def _exterior_split(X, dirs, jcut, tstar, tedge, gx, gw, s, rw, rz, fkind, fprm):
    """Exact-cut exterior ray integrals: the tail of the cut panel plus all later panels."""
    n, N = X.shape
    M, K = rz.shape[0], rz.shape[1]
    q = gx.size
    inv = -1.0 / (2.0 * s)
    ext = np.zeros((n, M))
    for a in range(n):
        x0 = X[a, 0]
        x1 = X[a, 1]
        x2 = X[a, 2] if N == 3 else 0.0
        for m in range(M):
            j = jcut[a, m]
            ta = tedge[j + 1]
            tb = tstar[a, m]
            mid = 0.5 * (ta + tb)
            half = 0.5 * (tb - ta)
            acc = 0.0
            for k in range(q):
                rho = (mid + half * gx[k]) ** inv
                y2 = x2 + rho * dirs[m, 2] if N == 3 else 0.0
                acc += half * gw[k] / (2.0 * s) * _datum(fkind, fprm, N, x0 + rho * dirs[m, 0],
                                                          x1 + rho * dirs[m, 1], y2)
            for k in range((j + 1) * q, K):
                y2 = x2 + rz[m, k, 2] if N == 3 else 0.0
                acc += rw[k] * _datum(fkind, fprm, N, x0 + rz[m, k, 0], x1 + rz[m, k, 1], y2)
            ext[a, m] = acc
    return ext


@njit(cache=True)
def _sweep_split(v, out, idx, X, dirs, ext, rw, cbase, cw, cofs, jcut, tstar, tedge, gx, gw, s,
                 lo, h, shape, strides, win_idx, win_w, win_norm, amax, amin, delta):
    """Sweep for convex D: stencil nodes on whole in-D panels, fresh Gauss nodes on the cut one."""
    n, M = ext.shape
    N = X.shape[1]
    q = gx.size
    nc = cofs.size
    inv = -1.0 / (2.0 * s)
    R = np.empty(M)
    o1 = cofs[1]
    o2 = cofs[2]
    o3 = cofs[3] if nc > 3 else 0
    for a in range(n):
        i = idx[a]
        x0 = X[a, 0]
        x1 = X[a, 1]
        x2 = X[a, 2] if N == 3 else 0.0
        for m in range(M):
            acc = ext[a, m]
            j = jcut[a, m]
            for k in range(j * q):
                b = i + cbase[m, k]
                if nc == 4:
                    sv = (cw[m, k, 0] * v[b] + cw[m, k, 1] * v[b + o1]
                          + cw[m, k, 2] * v[b + o2] + cw[m, k, 3] * v[b + o3])
                else:
                    sv = 0.0
                    for c in range(nc):
                        sv += cw[m, k, c] * v[b + cofs[c]]
                acc += rw[k] * sv
            ta = tstar[a, m]
            tb = tedge[j]
            if tb > ta:
                mid = 0.5 * (ta + tb)
                half = 0.5 * (tb - ta)
                for k in range(q):
                    rho = (mid + half * gx[k]) ** inv
                    y2 = x2 + rho * dirs[m, 2] if N == 3 else 0.0
                    acc += half * gw[k] / (2.0 * s) * _interp(v, lo, h, shape, strides, N,
                                                               x0 + rho * dirs[m, 0],
                                                               x1 + rho * dirs[m, 1], y2)
            R[m] = acc
        mx, mn, im, jm = _window_extremes(R, win_idx, win_w, win_norm)
        val = 0.5 * (mx + mn)
        out[i] = val
        delta[a] = val - v[i]
        amax[a] = im
        amin[a] = jm


@njit(cache=True, parallel=False)
def _sweep(v, out, idx, X, ext, rw, rz, cbase, cw, cofs, win_idx, win_w, win_norm,
           dkind, dprm, amax, amin, delta):
    n, N = X.shape
    M = ext.shape[1]
    K = rw.size
    nc = cofs.size
    for a in prange(n):
        i = idx[a]
        R = np.empty(M)
        x0 = X[a, 0]
        x1 = X[a, 1]
        x2 = X[a, 2] if N == 3 else 0.0
        for m in range(M):
            acc = ext[a, m]
            for k in range(K):
                y0 = x0 + rz[m, k, 0]
                y1 = x1 + rz[m, k, 1]
                y2 = x2 + rz[m, k, 2] if N == 3 else 0.0
                if _contains(dkind, dprm, N, y0, y1, y2):
                    b = i + cbase[m, k]
                    if nc == 4:
                        s = (cw[m, k, 0] * v[b] + cw[m, k, 1] * v[b + cofs[1]]
                             + cw[m, k, 2] * v[b + cofs[2]] + cw[m, k, 3] * v[b + cofs[3]])
                    else:
                        s = 0.0
                        for c in range(nc):
                            s += cw[m, k, c] * v[b + cofs[c]]
                    acc += rw[k] * s
            R[m] = acc
        mx, mn, im, jm = _window_extremes(R, win_idx, win_w, win_norm)
        val = 0.5 * (mx + mn)
        out[i] = val
        delta[a] = val - v[i]
        amax[a] = im
        amin[a] = jm


@njit(cache=True)
def _ray_sums_at(x, v, lo, h, shape, strides, rw, rz, dirs, dkind, dprm, fkind, fprm,
                 tedge, gx, gw, s, R):
    """Radial sums along every grid ray at an arbitrary point x of D.

    rw, rz are the full radial rule.  With a nonempty tedge (convex D) the ray
    is cut exactly at its exit radius as in the lattice sweep; otherwise each
    node is classified by the domain test.
    """
    N = x.size
    M, K = rz.shape[0], rz.shape[1]
    x0 = x[0]
    x1 = x[1]
    x2 = x[2] if N == 3 else 0.0
    split = tedge.size > 0
    q = gx.size
    inv = -1.0 / (2.0 * s)
    for m in range(M):
        acc = 0.0
        if split:
            d2 = dirs[m, 2] if N == 3 else 0.0
            r = _exit_radius(dkind, dprm, N, x0, x1, x2, dirs[m, 0], dirs[m, 1], d2)
            j, t = _cut(r, tedge, s)
            for k in range(j * q):
                y2 = x2 + rz[m, k, 2] if N == 3 else 0.0
                acc += rw[k] * _interp(v, lo, h, shape, strides, N, x0 + rz[m, k, 0],
                                       x1 + rz[m, k, 1], y2)
            for part in range(2):
                ta = t if part == 0 else tedge[j + 1]
                tb = tedge[j] if part == 0 else t
                if tb <= ta:
                    continue
                mid = 0.5 * (ta + tb)
                half = 0.5 * (tb - ta)
                for k in range(q):
                    rho = (mid + half * gx[k]) ** inv
                    y0 = x0 + rho * dirs[m, 0]
                    y1 = x1 + rho * dirs[m, 1]
                    y2 = x2 + rho * d2
                    if part == 0:
                        g = _interp(v, lo, h, shape, strides, N, y0, y1, y2)
                    else:
                        g = _datum(fkind, fprm, N, y0, y1, y2)
                    acc += half * gw[k] / (2.0 * s) * g
            for k in range((j + 1) * q, K):
                y2 = x2 + rz[m, k, 2] if N == 3 else 0.0
                acc += rw[k] * _datum(fkind, fprm, N, x0 + rz[m, k, 0], x1 + rz[m, k, 1], y2)
            R[m] = acc
            continue
        for k in range(K):
            y0 = x0 + rz[m, k, 0]
            y1 = x1 + rz[m, k, 1]
            y2 = x2 + rz[m, k, 2] if N == 3 else 0.0
            if _contains(dkind, dprm, N, y0, y1, y2):
                acc += rw[k] * _interp(v, lo, h, shape, strides, N, y0, y1, y2)
            else:
                acc += rw[k] * _datum(fkind, fprm, N, y0, y1, y2)
        R[m] = acc


@njit(cache=True)
def _cone_averages_at(x, v, lo, h, shape, strides, rw, rz, dirs, win_idx, win_w, win_norm,
                      dkind, dprm, fkind, fprm, tedge, gx, gw, s, out):
    """Window cone averages at an arbitrary point x."""
    M = rz.shape[0]
    R = np.empty(M)
    _ray_sums_at(x, v, lo, h, shape, strides, rw, rz, dirs, dkind, dprm, fkind, fprm,
                 tedge, gx, gw, s, R)
    J = win_idx.shape[1]
    for m in range(M):
        c = 0.0
        for j in range(J):
            c += win_w[m, j] * R[win_idx[m, j]]
        out[m] = c * win_norm[m]


# --- operator assembly ---------------------------------------------------------

def _window_2d(M, alpha):
    dth = 2 * math.pi / M
    x = alpha / dth
    J = int(math.floor(x))
    f = x - J
    offs = np.arange(-(J + 1), J + 2)
    w = np.full(offs.size, dth)
    k = np.abs(offs)
    w[k == J] = dth * (0.5 + f - 0.5 * f * f)
    w[k == J + 1] = dth * 0.5 * f * f
    if J == 0:
        # the central hat is cut on both sides
        w[k == 0] = dth * (2 * f - f * f)
    idx = (np.arange(M)[:, None] + offs[None, :]) % M
    return idx.astype(np.int64), np.tile(w, (M, 1))


def _window_sphere(dirs, alpha):
    """Nonnegative cap weights on a near-uniform point set: area share times a linear ramp."""
    M = dirs.shape[0]
    share = 4 * math.pi / M
    ramp = math.sqrt(share)
    cosang = np.clip(dirs @ dirs.T, -1.0, 1.0)
    ang = np.arccos(cosang)
    W = share * np.clip((alpha - ang) / ramp + 0.5, 0.0, 1.0)
    nnz = int((W > 0).sum(axis=1).max())
    idx = np.zeros((M, nnz), dtype=np.int64)
    w = np.zeros((M, nnz))
    for m in range(M):
        j = np.nonzero(W[m] > 0)[0]
        idx[m, :j.size] = j
        w[m, :j.size] = W[m, j]
    return idx, w


@dataclass
class DppOperator:
    problem: DirichletProblem
    lattice: Lattice
    interior: np.ndarray          # flat indices of lattice points in D
    X: np.ndarray                 # their coordinates
    dirs: np.ndarray              # sphere grid (M, N)
    rw: np.ndarray                # radial weights of nodes that may fall in D
    rz: np.ndarray                # (M, K, N) node offsets
    cbase: np.ndarray
    cw: np.ndarray
    cofs: np.ndarray
    win_idx: np.ndarray
    win_w: np.ndarray
    win_norm: np.ndarray
    ext: np.ndarray               # (n, M) exterior ray sums
    rw_all: np.ndarray            # full radial rule (for off-lattice evaluation)
    rz_all: np.ndarray
    exterior_values: np.ndarray   # F at lattice points outside D
    tedge: np.ndarray = field(default_factory=lambda: np.zeros(0))  # panel edges in t (convex D)
    gx: np.ndarray = field(default_factory=lambda: np.zeros(0))     # Gauss rule on [-1, 1]
    gw: np.ndarray = field(default_factory=lambda: np.zeros(0))
    jcut: np.ndarray | None = None    # (n, M) panel holding the exit radius
    tstar: np.ndarray | None = None   # (n, M) exit radius in t
    meta: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.dirs.shape[0]

    def initial(self, level: float) -> np.ndarray:
        v = self.exterior_values.copy()
        v[self.interior] = level
        return v

    def field(self, values) -> LatticeField:
        return LatticeField(self.lattice, values, self.problem.domain, self.problem.datum)

    def sweep(self, v, out=None):
        n = self.interior.size
        out = v.copy() if out is None else out
        amax = np.empty(n, dtype=np.int64)
        amin = np.empty(n, dtype=np.int64)
        delta = np.empty(n)
        dom = self.problem.domain
        if self.jcut is not None:
            lat = self.lattice
            _sweep_split(v, out, self.interior, self.X, self.dirs, self.ext, self.rw, self.cbase,
                         self.cw, self.cofs, self.jcut, self.tstar, self.tedge, self.gx, self.gw,
                         self.problem.s, lat.lo, lat.h, np.asarray(lat.shape, dtype=np.int64),
                         lat.strides, self.win_idx, self.win_w, self.win_norm, amax, amin, delta)
            return out, delta, amax, amin
        _sweep(v, out, self.interior, self.X, self.ext, self.rw, self.rz, self.cbase, self.cw,
               self.cofs, self.win_idx, self.win_w, self.win_norm, dom.kind,
               np.asarray(dom.codes(), dtype=float), amax, amin, delta)
        return out, delta, amax, amin

    def cone_averages(self, values, x) -> np.ndarray:
        """Discrete cone averages over all grid directions at an arbitrary point."""
        F = self.problem.datum
        if getattr(F, "code", None) is None:
            raise NotImplementedError("off-lattice evaluation needs a compiled datum")
        lat = self.lattice
        out = np.empty(self.M)
        dom = self.problem.domain
        _cone_averages_at(np.asarray(x, dtype=float), values, lat.lo, lat.h,
                          np.asarray(lat.shape, dtype=np.int64), lat.strides, self.rw_all,
                          self.rz_all, self.dirs, self.win_idx, self.win_w, self.win_norm, dom.kind,
                          np.asarray(dom.codes(), dtype=float), F.code[0],
                          np.asarray(F.code[1], dtype=float), self.tedge, self.gx, self.gw,
                          self.problem.s, out)
        return out


def build_operator(problem: DirichletProblem, h: float | None = None, M: int | None = None,
                   radial_order: int = 4, panel_ratio: float = 2.0, far: float | None = None,
                   chunk: int = 256) -> DppOperator:
    """Discretize S_eps on a lattice of spacing h (default eps/8) with M sphere-grid rays."""
    t0 = time.perf_counter()
    eps, N, s = problem.eps, problem.N, problem.s
    h = eps / 8.0 if h is None else float(h)
    if h > eps / 4.0 * (1 + 1e-12):
        raise ValueError(f"lattice spacing h = {h!r} must satisfy h <= eps/4 = {eps / 4!r}")
    if M is None:
        M = 64 if N == 2 else 256
    dom = problem.domain
    lat = Lattice.covering(*dom.bbox, h, margin=2)
    P = lat.coords()
    inside = dom.contains(P)
    interior = np.nonzero(inside)[0].astype(np.int64)
    X = P[interior]
    F = problem.datum
    ext_vals = np.zeros(lat.size)
    ext_vals[~inside] = F(P[~inside])

    diam = dom.diameter
    far = far if far is not None else max(64.0 * eps, 4.0 * diam)
    r, w = radial_rule(s, eps, math.inf, radial_order, panel_ratio, far)
    edges = np.asarray(_panel_edges(eps, math.inf, panel_ratio, far))
    q = int(radial_order)
    dirs = sphere_grid(N, M)
    rz_all = np.ascontiguousarray(r[None, :, None] * dirs[:, None, :])
    # nodes of every panel that starts inside the diameter may land in D
    K_in = q * int(np.sum(edges[:-1] < diam))
    rz = np.ascontiguousarray(rz_all[:, :K_in, :])
    rw = w[:K_in].copy()

    # translation-invariant multilinear stencil for the inner nodes
    st = lat.strides
    qf = np.floor(rz / h)
    fr = rz / h - qf
    cbase = (qf.astype(np.int64) * st).sum(axis=-1)
    nc = 1 << N
    bits = np.array([[(c >> (N - 1 - d)) & 1 for d in range(N)] for c in range(nc)])
    cofs = (bits * st).sum(axis=1).astype(np.int64)
    cw = np.ones(rz.shape[:2] + (nc,))
    for c in range(nc):
        for d in range(N):
            cw[..., c] *= fr[..., d] if bits[c, d] else 1.0 - fr[..., d]

    alpha = problem.spec.aperture
    if N == 2:
        win_idx, win_w = _window_2d(M, alpha)
    else:
        win_idx, win_w = _window_sphere(dirs, alpha)
    win_norm = 1.0 / (win_w.sum(axis=1) * w.sum())

    dprm = np.asarray(dom.codes(), dtype=float)
    code = getattr(F, "code", None)
    convex = dom.kind in (0, 2)
    tedge = gx = gw = np.zeros(0)
    jcut = tstar = None
    if convex:
        # rays leave a convex D once: cut the radial rule exactly at the exit radius
        with np.errstate(divide="ignore"):
            tedge = np.where(np.isinf(edges), 0.0, edges ** (-2.0 * s))
        gx, gw = np.polynomial.legendre.leggauss(q)
        jcut, tstar = _split_tables(X, dirs, tedge, s, dom.kind, dprm)
    if code is not None:
        fk, fp = int(code[0]), np.asarray(code[1], dtype=float)
        if convex:
            ext = _exterior_split(X, dirs, jcut, tstar, tedge, gx, gw, s, w, rz_all, fk, fp)
        else:
            ext = _exterior_sums(X, rz_all, w, dom.kind, dprm, fk, fp)
    else:
        ext = np.zeros((X.shape[0], M))
        for a in range(0, X.shape[0], chunk):
            Xc = X[a:a + chunk]
            Y = Xc[:, None, None, :] + rz_all[None]
            if convex:
                jc = jcut[a:a + chunk]
                out = np.arange(r.size)[None, None, :] >= (q * (jc + 1))[..., None]
                ta, tb = tedge[jc + 1], tstar[a:a + chunk]
                T = 0.5 * (ta + tb)[..., None] + 0.5 * (tb - ta)[..., None] * gx
                rho = T ** (-1.0 / (2.0 * s))
                Yc = Xc[:, None, None, :] + rho[..., None] * dirs[None, :, None, :]
                ext[a:a + chunk] = (0.5 * (tb - ta) / (2.0 * s)) * (F(Yc) @ gw)
            else:
                out = ~dom.contains(Y)
            vals = np.zeros(out.shape)
            vals[out] = F(Y[out])
            ext[a:a + chunk] += vals @ w
    meta = {"h": h, "M": int(M), "radial_order": int(radial_order), "panel_ratio": float(panel_ratio),
            "radial_nodes": int(r.size), "inner_nodes": int(rw.size), "lattice": lat.to_dict(),
            "interior_points": int(interior.size), "build_seconds": time.perf_counter() - t0,
            "compiled_datum": code is not None}
    return DppOperator(problem, lat, interior, X, dirs, rw, rz, cbase, cw, cofs, win_idx, win_w,
                       win_norm, ext, w, rz_all, ext_vals, tedge, gx, gw, jcut, tstar, meta)


@dataclass
class DppSolution:
    operator: DppOperator
    values: np.ndarray
    residual: float
    iterations: int
    contraction_estimate: float
    q: float
    tol: float
    converged: bool
    monotone: bool
    changes: list
    argmax: np.ndarray
    argmin: np.ndarray
    start: str
    seconds: float = 0.0

    @property
    def lattice(self):
        return self.operator.lattice

    @property
    def interior_values(self):
        return self.values[self.operator.interior]

    def field(self) -> LatticeField:
        return self.operator.field(self.values)

    def __call__(self, pts):
        return self.field()(pts)

    def summary(self) -> dict:
        lo, hi = self.operator.problem.bounds()
        return {"residual": self.residual, "iterations": self.iterations,
                "iteration_bound": iteration_bound(self.tol, hi - lo, self.q),
                "contraction_estimate": self.contraction_estimate, "q": self.q, "tol": self.tol,
                "converged": self.converged, "monotone": self.monotone, "start": self.start,
                "min": float(self.interior_values.min()), "max": float(self.interior_values.max()),
                "seconds": self.seconds, **self.operator.meta}


def apply_S(op: DppOperator, field) -> np.ndarray:
    """One application of S_eps; field is a lattice vector or a callable sampled on the lattice."""
    if callable(field) and not isinstance(field, np.ndarray):
        v = op.exterior_values.copy()
        v[op.interior] = field(op.X)
    else:
        v = np.asarray(field, dtype=float)
    out, _, _, _ = op.sweep(v)
    return out


def solve_dpp(problem: DirichletProblem | DppOperator, h: float | None = None, tol: float | None = None,
              max_iter: int = 100000, start="inf", method: str = "picard", depth: int = 8,
              **build_kw) -> DppSolution:
    """Iterate v_{n+1} = S_eps v_n until the sup change is <= tol (1-q)/q.

    start: "inf" (default, nondecreasing iterates), "sup", or a lattice vector.
    method: "picard" is the plain monotone iteration; "anderson" mixes the last
    ``depth`` iterates (faster, not monotone) under the same stopping rule on
    the residual |v - S_eps v|.
    """
    if method == "anderson":
        return _solve_anderson(problem, h, tol, max_iter, start, depth, **build_kw)
    if method != "picard":
        raise ValueError(f"unknown method {method!r}")
    t0 = time.perf_counter()
    op = problem if isinstance(problem, DppOperator) else build_operator(problem, h, **build_kw)
    prob = op.problem
    lo, hi = prob.bounds()
    osc = hi - lo
    if tol is None:
        tol = 1e-6 * osc if osc > 0 else 1e-12 * max(1.0, abs(hi))
    q = contraction_factor(prob)
    thresh = tol * (1 - q) / q
    if isinstance(start, str):
        v = op.initial(lo if start == "inf" else hi)
        sign = 1.0 if start == "inf" else -1.0
        label = start
    else:
        v = np.asarray(start, dtype=float).copy()
        sign, label = 0.0, "given"
        # a subsolution start (S v >= v) keeps the iterates nondecreasing
        if float(np.min(apply_S(op, v)[op.interior] - v[op.interior])) >= -1e-14 * max(1.0, osc):
            sign = 1.0
    changes, monotone = [], True
    buf = v.copy()
    converged = False
    it = 0
    amax = amin = None
    while it < max_iter:
        buf, delta, amax, amin = op.sweep(v, buf)
        it += 1
        ch = float(np.max(np.abs(delta))) if delta.size else 0.0
        changes.append(ch)
        if sign != 0.0 and delta.size and float(np.min(sign * delta)) < -1e-14 * max(1.0, osc):
            monotone = False
        v, buf = buf, v
        if ch <= thresh:
            converged = True
            break
    # true residual of the returned iterate
    _, delta, amax, amin = op.sweep(v, buf.copy())
    residual = float(np.max(np.abs(delta))) if delta.size else 0.0
    ratios = [b / a for a, b in zip(changes[:-1], changes[1:]) if a > 0]
    rho = float(np.median(ratios[-10:])) if ratios else 0.0
    return DppSolution(op, v, residual, it, rho, q, float(tol), converged, monotone, changes,
                       amax, amin, label, time.perf_counter() - t0)


def _prepare(problem, h, tol, start, build_kw):
    op = problem if isinstance(problem, DppOperator) else build_operator(problem, h, **build_kw)
    lo, hi = op.problem.bounds()
    osc = hi - lo
    if tol is None:
        tol = 1e-6 * osc if osc > 0 else 1e-12 * max(1.0, abs(hi))
    if isinstance(start, str):
        v = op.initial(lo if start == "inf" else hi)
    else:
        v = np.asarray(start, dtype=float).copy()
    return op, float(tol), v


def _solve_anderson(problem, h, tol, max_iter, start, depth, **build_kw):
    t0 = time.perf_counter()
    op, tol, v = _prepare(problem, h, tol, start, build_kw)
    q = contraction_factor(op.problem)
    thresh = tol * (1 - q) / q
    I = op.interior
    x = v[I].copy()
    buf = v.copy()
    Xs, Gs, changes = [], [], []
    converged = False
    best = math.inf
    it = 0
    while it < max_iter:
        v[I] = x
        buf, delta, _, _ = op.sweep(v, buf)
        it += 1
        gx = buf[I].copy()
        f = gx - x
        ch = float(np.max(np.abs(f))) if f.size else 0.0
        changes.append(ch)
        if ch <= thresh:
            converged = True
            break
        if ch > 10 * best:
            # mixing went astray: restart the history from the plain update
            Xs, Gs = [], []
        best = min(best, ch)
        Xs.append(x)
        Gs.append(gx)
        if len(Xs) > depth + 1:
            Xs.pop(0)
            Gs.pop(0)
        if len(Xs) >= 2:
            Fm = np.array(Gs) - np.array(Xs)
            dF = (Fm[1:] - Fm[:-1]).T
            dG = (np.array(Gs[1:]) - np.array(Gs[:-1])).T
            gam = np.linalg.lstsq(dF, f, rcond=None)[0]
            x = gx - dG @ gam
        else:
            x = gx
    v[I] = x
    _, delta, amax, amin = op.sweep(v, buf.copy())
    residual = float(np.max(np.abs(delta))) if delta.size else 0.0
    ratios = [b / a for a, b in zip(changes[:-1], changes[1:]) if a > 0]
    rho = float(np.median(ratios[-10:])) if ratios else 0.0
    label = start if isinstance(start, str) else "given"
    return DppSolution(op, v, residual, it, rho, q, tol, converged, False, changes, amax, amin,
                       f"{label}/anderson", time.perf_counter() - t0)


def monotonicity_check(problem: DirichletProblem, datum_hi, h: float | None = None, tol=None,
                       sol_lo: DppSolution | None = None, warm_start: bool = True, **build_kw):
    """Solve with F and with datum_hi >= F; True iff u^F <= u^{F_hi} + tol on the lattice.

    With warm_start the second solve starts from u^F (with F_hi outside D),
    which is a subsolution for F_hi, so its iterates are still nondecreasing.
    """
    lo = sol_lo if sol_lo is not None else solve_dpp(problem, h, tol, **build_kw)
    meta = lo.operator.meta
    op_hi = build_operator(problem.with_datum(datum_hi), meta["h"], M=meta["M"],
                           radial_order=meta["radial_order"], panel_ratio=meta["panel_ratio"])
    start = "inf"
    if warm_start:
        start = op_hi.exterior_values.copy()
        start[op_hi.interior] = lo.interior_values
    hi = solve_dpp(op_hi, tol=tol, start=start)
    diff = lo.interior_values - hi.interior_values
    ok = bool(np.max(diff) <= max(lo.tol, hi.tol))
    return ok, {"max_excess": float(np.max(diff)), "min_gap": float(np.min(-diff)),
                "max_gap": float(np.max(-diff)), "solution_hi": hi, "solution_lo": lo}


def convergence_study(problem: DirichletProblem, eps_list, h_ratio: float = 0.25, tol=None,
                      M: int | None = None, radial_order: int = 4, warm_start: bool = True,
                      method: str = "anderson", compare_step: float | None = None, log=None):
    """Solve for each eps and report sup-distances between consecutive solutions.

    Each eps uses h = h_ratio * eps (h_ratio <= 1/4).  Consecutive solutions
    are compared on the common lattice of spacing compare_step (default: the
    coarsest h) restricted to D.
    """
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    sols, rows = [], []
    prev = None
    for e in eps_list:
        pe = problem.with_eps(e)
        he = min(h_ratio, 0.25) * e
        op = build_operator(pe, he, M=M, radial_order=radial_order)
        start = "inf"
        if warm_start and prev is not None:
            start = op.exterior_values.copy()
            lo_, hi_ = pe.bounds()
            start[op.interior] = np.clip(prev.field()(op.X), lo_, hi_)
        sol = solve_dpp(op, tol=tol, start=start, method=method)
        sols.append(sol)
        if log:
            log(f"eps={e:.6g} h={he:.6g} iterations={sol.iterations} residual={sol.residual:.3e} "
                f"seconds={sol.seconds:.1f}")
        prev = sol
    hc = compare_step if compare_step is not None else sols[0].operator.meta["h"]
    lat = Lattice.covering(*problem.domain.bbox, hc, margin=0)
    P = lat.coords()
    P = P[problem.domain.contains(P)]
    for a, b in zip(sols[:-1], sols[1:]):
        d = float(np.max(np.abs(a.field()(P) - b.field()(P))))
        rows.append({"eps_coarse": a.operator.problem.eps, "eps_fine": b.operator.problem.eps,
                     "sup_difference": d})
    diffs = [r["sup_difference"] for r in rows]
    lo, hi = problem.bounds()
    verdict = {"decreasing": all(y < x for x, y in zip(diffs[:-1], diffs[1:])),
               "within_envelope": all(d <= 2 * max(abs(lo), abs(hi)) for d in diffs)}
    return rows, sols, verdict
