"""Cone averages and the nonlocal operators built from them.

All operators take a ``Setting`` bundling the cone, the kernel and the
quadrature orders.  Fields are plain callables on (..., N) arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import roots_jacobi
from scipy.stats import qmc

from .cone import ConeSpec, make_cone, rotate_from_e1, sphere_grid, gauss_interval
from .measure import FractionalKernel, make_kernel, cone_quadrature, truncated_cone_mass

__all__ = [
    "Setting",
    "make_setting",
    "cone_average",
    "cone_averages",
    "AverageResult",
    "a_epsilon",
    "l_epsilon",
    "ball_rule",
    "ball_average",
    "ball_extremes",
    "abar_weights",
    "abar_epsilon",
    "l_sp",
    "TildeResult",
    "l_tilde",
    "delta_ps",
]

_CHUNK = 262144


@dataclass(frozen=True)
class Setting:
    spec: ConeSpec
    kernel: FractionalKernel
    radial_order: int = 16
    angular_orders: tuple = (32, 32)
    panel_ratio: float = 2.0
    near_order: int = 16
    sphere_size: int | None = None

    @property
    def N(self):
        return self.spec.dim

    @property
    def p(self):
        return self.spec.exponent

    @property
    def s(self):
        return self.kernel.order

    def quad(self, a, b=math.inf):
        return _quad(self, float(a), float(b))

    def grid(self, M=None):
        return sphere_grid(self.N, self.sphere_size if M is None else M)

    def mass(self, a, b=math.inf):
        return truncated_cone_mass(self.spec, self.kernel, a, b)

    def to_dict(self):
        return {"N": self.N, "p": self.p, "s": self.s, "aperture": self.spec.aperture,
                "cap_measure": self.spec.cap_measure, "C": self.kernel.norm_const,
                "radial_order": self.radial_order, "angular_orders": list(self.angular_orders),
                "panel_ratio": self.panel_ratio, "near_order": self.near_order,
                "sphere_size": self.sphere_size}


@lru_cache(maxsize=256)
def _quad(setting: Setting, a: float, b: float):
    return cone_quadrature(setting.spec, setting.kernel, a, b, setting.radial_order,
                           setting.angular_orders, setting.panel_ratio, None, setting.near_order)


def make_setting(N: int, p: float, s: float, **kw) -> Setting:
    return Setting(make_cone(N, p), make_kernel(N, s), **kw)


def _eval(u, P):
    shp = P.shape[:-1]
    return np.asarray(u(P.reshape(-1, P.shape[-1])), dtype=float).reshape(shp)


def cone_averages(u, x, Y, quad) -> np.ndarray:
    """Normalized averages of u(x + R_{y,e1} z) over the quadrature, one per axis in Y."""
    x = np.asarray(x, dtype=float)
    Y = np.atleast_2d(Y)
    Z = quad.nodes
    w = quad.normalized_weights()
    K = Z.shape[0]
    per = max(1, _CHUNK // K)
    out = np.empty(Y.shape[0])
    for i in range(0, Y.shape[0], per):
        P = x + rotate_from_e1(Y[i:i + per], Z)
        out[i:i + per] = _eval(u, P) @ w
    return out


def cone_average(u, x, y, eps, quad) -> float:
    """Average of u over x + T^{eps,inf}(y); quad must be built for (eps, inf)."""
    if abs(quad.a - eps) > 1e-14 * max(1.0, eps):
        raise ValueError("quadrature was built for a different inner radius")
    return float(cone_averages(u, x, np.asarray(y, dtype=float)[None, :], quad)[0])


@dataclass
class AverageResult:
    value: float
    sup: float
    inf: float
    argmax: np.ndarray
    argmin: np.ndarray
    grid_sup: float
    grid_inf: float
    index_max: int
    index_min: int
    averages: np.ndarray = field(repr=False, default=None)


def _refine_direction(f, y0, M, N, sign):
    """Locally improve sign*f around the grid node y0; returns (value, direction)."""
    base = sign * f(y0)
    if N == 2:
        phi0 = math.atan2(y0[1], y0[0])
        d = 2.0 * math.pi / M

        def g(phi):
            return -sign * f(np.array([math.cos(phi), math.sin(phi)]))
        res = minimize_scalar(g, bounds=(phi0 - d, phi0 + d), method="bounded",
                              options={"xatol": 1e-11, "maxiter": 200})
        y = np.array([math.cos(res.x), math.sin(res.x)])
        val = -res.fun
    else:
        A = np.linalg.svd(y0[None, :])[2][1:]
        step = math.sqrt(4.0 * math.pi / M)

        def g(w):
            v = y0 + A.T @ w
            return -sign * f(v / np.linalg.norm(v))
        simplex = np.array([[0.0, 0.0], [step, 0.0], [0.0, step]])
        res = minimize(g, np.zeros(2), method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-15,
                                "maxiter": 400})
        v = y0 + A.T @ res.x
        y = v / np.linalg.norm(v)
        val = -res.fun
    if val > base:
        return sign * val, y
    return sign * base, y0


def a_epsilon(u, x, eps: float, setting: Setting, grid=None, refine: bool = True) -> AverageResult:
    """A_eps u(x) = (sup_y + inf_y)/2 of the cone average over T^{eps,inf}(y)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    Y = setting.grid() if grid is None else np.atleast_2d(grid)
    quad = setting.quad(eps)
    avg = cone_averages(u, x, Y, quad)
    imax, imin = int(np.argmax(avg)), int(np.argmin(avg))
    gsup, ginf = float(avg[imax]), float(avg[imin])
    sup, ymax, inf, ymin = gsup, Y[imax], ginf, Y[imin]
    if refine and gsup > ginf:
        def f(y):
            return float(cone_averages(u, x, y[None, :], quad)[0])
        sup, ymax = _refine_direction(f, Y[imax], Y.shape[0], setting.N, +1.0)
        inf, ymin = _refine_direction(f, Y[imin], Y.shape[0], setting.N, -1.0)
    return AverageResult(0.5 * (sup + inf), sup, inf, ymax, ymin, gsup, ginf, imax, imin, avg)


def l_epsilon(u, x, eps: float, setting: Setting, grid=None, refine: bool = True) -> float:
    """sup_y + inf_y of int_{T^{eps,inf}(y)} (u(x+z) - u(x)) dmu."""
    res = a_epsilon(u, x, eps, setting, grid, refine)
    ux = float(_eval(u, np.asarray(x, dtype=float)[None, :])[0])
    m = setting.mass(eps)
    return m * (res.sup - ux) + m * (res.inf - ux)


# --- balls -----------------------------------------------------------------

@lru_cache(maxsize=16)
def ball_rule(N: int, radial_order: int = 12, angular_order: int = 64):
    """Product rule on the unit ball; weights normalized to 1."""
    x, w = roots_jacobi(radial_order, 0.0, N - 1.0)
    r = 0.5 * (1.0 + x)
    wr = w / np.sum(w)
    if N == 2:
        ang = 2.0 * math.pi * np.arange(angular_order) / angular_order
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        wa = np.full(angular_order, 1.0 / angular_order)
    elif N == 3:
        ct, wc = np.polynomial.legendre.leggauss(angular_order // 2)
        ph = 2.0 * math.pi * np.arange(angular_order) / angular_order
        C, P = np.meshgrid(ct, ph, indexing="ij")
        S = np.sqrt(1.0 - C * C)
        dirs = np.stack([C, S * np.cos(P), S * np.sin(P)], axis=-1).reshape(-1, 3)
        wa = (wc[:, None] / 2.0 * np.full(angular_order, 1.0 / angular_order)[None, :]).reshape(-1)
    else:
        raise NotImplementedError("ball rules are provided for N = 2 and N = 3")
    nodes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, N)
    weights = (wr[:, None] * wa[None, :]).reshape(-1)
    return nodes, weights


def ball_average(u, x, eps: float, radial_order: int = 12, angular_order: int = 64) -> float:
    x = np.asarray(x, dtype=float)
    nodes, w = ball_rule(x.size, radial_order, angular_order)
    return float(_eval(u, x + eps * nodes) @ w)


@lru_cache(maxsize=8)
def _ball_points(N: int, n: int):
    U = qmc.Sobol(d=N, scramble=False).random_base2(int(math.log2(n)))
    U = U[1:]
    if N == 2:
        r = np.sqrt(U[:, 0])
        ph = 2.0 * math.pi * U[:, 1]
        pts = np.stack([r * np.cos(ph), r * np.sin(ph)], axis=1)
        m = 512
        a = 2.0 * math.pi * np.arange(m) / m
        bd = np.stack([np.cos(a), np.sin(a)], axis=1)
    else:
        r = U[:, 0] ** (1.0 / N)
        g = np.stack([np.cos(2 * math.pi * U[:, 1]), np.sin(2 * math.pi * U[:, 1])], axis=1)
        ct = 2.0 * U[:, 2] - 1.0
        st = np.sqrt(1.0 - ct * ct)
        pts = r[:, None] * np.stack([ct, st * g[:, 0], st * g[:, 1]], axis=1)
        bd = sphere_grid(3, 512)
    return np.vstack([np.zeros((1, N)), pts, bd])


def ball_extremes(u, x, eps: float, n_points: int = 4096):
    """(sup, inf, argsup, arginf) of u over the closed ball B_eps(x)."""
    x = np.asarray(x, dtype=float)
    N = x.size
    P = _ball_points(N, n_points)
    vals = _eval(u, x + eps * P)
    out = []
    for sign in (+1.0, -1.0):
        i = int(np.argmax(sign * vals))
        best_v, best_p = sign * vals[i], P[i]

        def g(w):
            nw = np.linalg.norm(w)
            q = w / nw if nw > 1.0 else w
            return -sign * float(_eval(u, (x + eps * q)[None, :])[0])
        res = minimize(g, P[i], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 2000,
                                "initial_simplex": P[i] + 0.05 * np.vstack([np.zeros(N), np.eye(N)])})
        if -res.fun > best_v:
            nw = np.linalg.norm(res.x)
            best_v, best_p = -res.fun, (res.x / nw if nw > 1 else res.x)
        # boundary polish
        nb = np.linalg.norm(best_p)
        if nb > 0.5:
            y0 = best_p / nb

            def f(y):
                return float(_eval(u, (x + eps * y)[None, :])[0])
            v, y = _refine_direction(f, y0, 512, N, sign)
            if sign * v > best_v:
                best_v, best_p = sign * v, y
        out.append((sign * best_v, x + eps * best_p))
    return out[0][0], out[1][0], out[0][1], out[1][1]


def abar_weights(N: int, p: float, s: float):
    """Weights of A_eps, the ball midrange and the ball mean."""
    D = N + p - 2.0 + 2.0 * s
    return (1.0 - s) * (N + p - 2.0) / D, s * (p - 2.0) / D, s * (N + 2.0) / D


def abar_epsilon(u, x, eps: float, setting: Setting, grid=None, refine: bool = True):
    """Convex combination of A_eps u, the midrange and the mean of u on B_eps(x).

    Returns (value, parts) where parts holds the three ingredients.
    """
    wa, wm, wb = abar_weights(setting.N, setting.p, setting.s)
    A = a_epsilon(u, x, eps, setting, grid, refine)
    bsup, binf, _, _ = ball_extremes(u, x, eps)
    bavg = ball_average(u, x, eps)
    val = wa * A.value + wm * 0.5 * (bsup + binf) + wb * bavg
    return val, {"A_eps": A.value, "ball_sup": bsup, "ball_inf": binf, "ball_mean": bavg,
                 "weights": (wa, wm, wb)}


# --- limit operators ----------------------------------------------------------------

def _split_quads(setting: Setting, r_x: float):
    return setting.quad(0.0, r_x), setting.quad(r_x)


def l_sp(probe, setting: Setting, u_far=None, x=None) -> float:
    """int over T^{0,inf}(p/|p|) of the second difference L_u(x,z,z) dmu.

    The near part uses the apex rule on (0, r_x), the far part the
    t-substituted rule on (r_x, inf) evaluated with u_far.
    """
    x = np.asarray(probe.x if x is None else x, dtype=float)
    p = np.asarray(probe.gradient(x), dtype=float)
    npx = float(np.linalg.norm(p))
    if npx == 0.0:
        raise ValueError("gradient vanishes at x; use l_tilde instead")
    y = p / npx
    u_far = probe if u_far is None else u_far
    qn, qf = _split_quads(setting, probe.r_x)
    ux = float(_eval(probe, x[None, :])[0])
    Zn = rotate_from_e1(y[None, :], qn.nodes)[0]
    Zf = rotate_from_e1(y[None, :], qf.nodes)[0]
    near = qn.weights @ (_eval(probe, x + Zn) + _eval(probe, x - Zn) - 2.0 * ux)
    far = qf.weights @ (_eval(u_far, x + Zf) + _eval(u_far, x - Zf) - 2.0 * ux)
    return float(near + far)


@dataclass
class TildeResult:
    value: float
    y: np.ndarray
    ytilde: np.ndarray
    grid_value: float
    grid_y: np.ndarray
    grid_ytilde: np.ndarray


def _half_integrals(probe, setting, u_far, x, p, Y, sign):
    """I(y) = int_{T(y)} [u(x + sign z) - u(x) - sign <p,z> 1_{|z|<r_x}] dmu for each y."""
    qn, qf = _split_quads(setting, probe.r_x)
    ux = float(_eval(probe, x[None, :])[0])
    Zn = rotate_from_e1(Y, qn.nodes)
    Zf = rotate_from_e1(Y, qf.nodes)
    near = (_eval(probe, x + sign * Zn) - ux - sign * (Zn @ p)) @ qn.weights
    far = (_eval(u_far, x + sign * Zf) - ux) @ qf.weights
    return near + far


def l_tilde(probe, setting: Setting, u_far=None, x=None, grid=None, refine: bool = True) -> TildeResult:
    """sup_y inf_ytilde int_{T(y)} L_u(x, z, R_{ytilde,y} z) dmu.

    The integrand splits as [u(x+z) - u(x) - <p,z>] + [u(x-R z) - u(x) + <p,Rz>]
    plus <p, z - Rz>; the last term integrates to a multiple of <p, y - ytilde>
    times a divergent radial integral, so it contributes +inf, -inf or 0
    according to the sign of <p, y - ytilde>.  The rest is finite and is
    evaluated separately in y and ytilde (rotation invariance of mu).
    """
    x = np.asarray(probe.x if x is None else x, dtype=float)
    u_far = probe if u_far is None else u_far
    p = np.asarray(probe.gradient(x), dtype=float)
    Y = setting.grid() if grid is None else np.atleast_2d(grid)
    Ip = _half_integrals(probe, setting, u_far, x, p, Y, +1.0)
    Im = _half_integrals(probe, setting, u_far, x, p, Y, -1.0)
    lin = Y @ p
    tol = 1e-12 * max(1.0, float(np.linalg.norm(p)))
    diff = lin[:, None] - lin[None, :]
    V = Ip[:, None] + Im[None, :]
    V = np.where(diff > tol, math.inf, np.where(diff < -tol, -math.inf, V))
    row_inf = V.min(axis=1)
    jrow = V.argmin(axis=1)
    i = int(np.argmax(row_inf))
    gval = float(row_inf[i])
    gy, gyt = Y[i], Y[int(jrow[i])]
    val, y, yt = gval, gy, gyt
    if refine:
        npx = float(np.linalg.norm(p))
        if npx > 0:
            # only y = ytilde = p/|p| neutralizes the divergent part
            ph = (p / npx)[None, :]
            val = float(_half_integrals(probe, setting, u_far, x, p, ph, +1.0)[0]
                        + _half_integrals(probe, setting, u_far, x, p, ph, -1.0)[0])
            y = yt = ph[0]
        else:
            def fp(v):
                return float(_half_integrals(probe, setting, u_far, x, p, v[None, :], +1.0)[0])

            def fm(v):
                return float(_half_integrals(probe, setting, u_far, x, p, v[None, :], -1.0)[0])
            vp, y = _refine_direction(fp, Y[int(np.argmax(Ip))], Y.shape[0], setting.N, +1.0)
            vm, yt = _refine_direction(fm, Y[int(np.argmin(Im))], Y.shape[0], setting.N, -1.0)
            val = vp + vm
    return TildeResult(val, y, yt, gval, gy, gyt)


def delta_ps(probe, setting: Setting, u_far=None, x=None) -> float:
    """Scaled operator (2-2s)/C * (N+p-2)/|A_p| * L_{s,p}."""
    N, p, s = setting.N, setting.p, setting.s
    return (2.0 - 2.0 * s) / setting.kernel.norm_const * (N + p - 2.0) / setting.spec.cap_measure \
        * l_sp(probe, setting, u_far, x)
