"""Error budgets and verification tables for the small-eps expansions.

Expansion with A_eps:
    A_eps u(x) - u(x) ~ s / (C |A_p|) * eps^{2s} * L_{s,p}[u](x)
Expansion with the combined average Abar_eps:
    Abar_eps u(x) - u(x) ~ (1-s) s / (C |A_p|) * (N+p-2)/(N+p-2+2s) * eps^{2s} * L_{s,p}[u](x)

Both come with explicit error bounds built from the local data of a
SmoothProbe (C_x, r_x, |p_x|) and its far-field modulus omega.  Norms of
Hessians are Frobenius norms throughout, which dominate the operator norm
and therefore keep every bound valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .operators import (Setting, a_epsilon, abar_epsilon, ball_average, ball_extremes, l_sp,
                        _ball_points, _eval)

__all__ = [
    "ErrorBudget",
    "kappa_eps",
    "first_m_term",
    "error_budget",
    "raz_coefficient",
    "dwa_coefficient",
    "ExpansionTable",
    "verify_raz",
    "verify_dwa",
    "verify_otto",
    "fit_order",
]


def _kappa_G(N, p, s, r, eps, npx):
    return (N + p - 2.0) / (p - 1.0) * 8.0 / npx * \
        ((2 * s - 1) / (2 * s) * r ** (-2 * s) + r ** (1 - 2 * s)) / (eps ** (1 - 2 * s) - r ** (1 - 2 * s))


def kappa_eps(probe, setting: Setting, eps: float, npx: float | None = None) -> float:
    """sup{ m in [0,2] : m^2 <= G * omega(m) }.

    Scan m = 2, 1, 1/2, ... down to 2^-20 for the first feasible value, then
    bisect between it and the previous (infeasible) grid point.
    """
    N, p, s = setting.N, setting.p, setting.s
    r = probe.r_x
    if not (0 < eps < r):
        raise ValueError(f"need 0 < eps < r_x = {r!r}")
    if npx is None:
        npx = float(np.linalg.norm(probe.grad_x()))
    G = _kappa_G(N, p, s, r, eps, npx)

    def feasible(m):
        return m * m <= G * float(probe.omega(m))

    if feasible(2.0):
        return 2.0
    hi = 2.0
    lo = 0.0
    m = 2.0
    for _ in range(21):
        m *= 0.5
        if feasible(m):
            lo = m
            break
        hi = m
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


def first_m_term(C_x, r, eps, npx, N, p, s) -> float:
    return 16.0 * (N + p - 2.0) / (p - 1.0) * C_x / npx * (2 * s - 1) / (1 - s) * \
        (r ** (2 - 2 * s) - eps ** (2 - 2 * s)) / (eps ** (1 - 2 * s) - r ** (1 - 2 * s))


def _hessian_oscillation(probe, eps):
    x = np.asarray(probe.x, dtype=float)
    H0 = probe.hess_x()
    P = _ball_points(x.size, 1024)
    return max(float(np.linalg.norm(probe.hessian(x + eps * q) - H0)) for q in P)


@dataclass
class ErrorBudget:
    m_eps: float
    kappa_eps: float
    bound_raz: float
    bound_dwa: float
    raz_terms: tuple
    dwa_terms: tuple
    inputs: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def error_budget(probe, setting: Setting, eps: float) -> ErrorBudget:
    N, p, s = setting.N, setting.p, setting.s
    r, Cx = probe.r_x, probe.C_x
    g = probe.grad_x()
    npx = float(np.linalg.norm(g))
    if npx == 0:
        raise ValueError("the budgets need a nonvanishing gradient")
    kap = kappa_eps(probe, setting, eps, npx)
    m = max(first_m_term(Cx, r, eps, npx, N, p, s), kap)
    om = float(probe.omega(m))
    e2s = eps ** (2 * s)
    shell = r ** (2 - 2 * s) - eps ** (2 - 2 * s)
    far = r ** (-2 * s) + 2 * s / (2 * s - 1) * r ** (1 - 2 * s)
    raz = (s / (1 - s) * Cx * eps ** 2,
           e2s * 4 * s * Cx * shell / (1 - s) * m,
           e2s * far * om)
    D = N + p - 2 + 2 * s
    H = probe.hess_x()
    dwa = (4 * s * (N + p - 2) / D * Cx * shell * e2s * m,
           (1 - s) * (N + p - 2) / D * far * e2s * om,
           s * (N + p - 2) / D * eps ** 2 * _hessian_oscillation(probe, eps),
           2 * s * (p - 2) / D * eps ** 3 * float(np.linalg.norm(H)) ** 2 / npx)
    inputs = {"C_x": Cx, "r_x": r, "abs_p_x": npx, "s": s, "N": N, "p": p, "eps": eps}
    return ErrorBudget(m, kap, float(sum(raz)), float(sum(dwa)), raz, dwa, inputs)


def raz_coefficient(setting: Setting) -> float:
    return setting.s / (setting.kernel.norm_const * setting.spec.cap_measure)


def dwa_coefficient(setting: Setting) -> float:
    N, p, s = setting.N, setting.p, setting.s
    return (1 - s) * s / (setting.kernel.norm_const * setting.spec.cap_measure) * (N + p - 2) / (N + p - 2 + 2 * s)


def fit_order(eps, err, s=None):
    """Least-squares slope of log(err / eps^{2s}) (or log err if s is None) against log eps."""
    eps = np.asarray(eps, dtype=float)
    err = np.asarray(err, dtype=float)
    m = err > 0
    if m.sum() < 2:
        return float("nan")
    y = np.log(err[m]) - (0.0 if s is None else 2 * s * np.log(eps[m]))
    return float(np.polyfit(np.log(eps[m]), y, 1)[0])


@dataclass
class ExpansionTable:
    rows: list
    l_value: float
    order_estimate: float
    raw_order: float
    slack: float
    extra: dict = field(default_factory=dict)

    @property
    def all_within_budget(self):
        return all(r["within"] for r in self.rows if not r.get("skipped"))

    def columns(self):
        return ["eps", "lhs_error", "budget", "ratio", "order_estimate"]

    def csv_rows(self):
        return [[r["eps"], r["lhs_error"], r["budget"], r["ratio"], self.order_estimate]
                for r in self.rows if not r.get("skipped")]


def _ux(probe):
    x = np.asarray(probe.x, dtype=float)
    return float(_eval(probe, x[None, :])[0])


def verify_raz(probe, setting: Setting, eps_list, u_far=None, l_ref: float | None = None,
               grid=None, slack: float = 1e-5) -> ExpansionTable:
    """Error of the A_eps expansion against the explicit budget, per eps."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be decreasing")
    u = probe if u_far is None else u_far
    L = l_sp(probe, setting, u_far) if l_ref is None else float(l_ref)
    c = raz_coefficient(setting)
    ux = _ux(probe)
    rows = []
    for e in eps_list:
        A = a_epsilon(u, probe.x, e, setting, grid)
        err = abs(A.value - ux - c * e ** (2 * setting.s) * L)
        bud = error_budget(probe, setting, e)
        rows.append({"eps": e, "value": A.value, "lhs_error": err, "budget": bud.bound_raz,
                     "ratio": err / bud.bound_raz if bud.bound_raz > 0 else math.inf,
                     "within": err <= bud.bound_raz + slack, "m_eps": bud.m_eps,
                     "kappa_eps": bud.kappa_eps,
                     "angle_to_gradient": _angle(A.argmax, probe.grad_x())})
    es = [r["eps"] for r in rows]
    er = [r["lhs_error"] for r in rows]
    return ExpansionTable(rows, L, fit_order(es, er, setting.s), fit_order(es, er), slack)


def _angle(y, g):
    g = np.asarray(g, dtype=float)
    c = float(np.dot(y, g) / (np.linalg.norm(y) * np.linalg.norm(g)))
    return math.acos(max(-1.0, min(1.0, c)))


def verify_dwa(probe, setting: Setting, eps_list, u_far=None, l_ref: float | None = None,
               grid=None, slack: float = 1e-5) -> ExpansionTable:
    """Error of the Abar_eps expansion against its budget; rows violating eps|H| <= |p| are skipped."""
    eps_list = [float(e) for e in eps_list]
    u = probe if u_far is None else u_far
    L = l_sp(probe, setting, u_far) if l_ref is None else float(l_ref)
    c = dwa_coefficient(setting)
    ux = _ux(probe)
    npx = float(np.linalg.norm(probe.grad_x()))
    Hn = float(np.linalg.norm(probe.hess_x()))
    rows = []
    incr, base = [], []
    for e in eps_list:
        if e * Hn > npx or e >= probe.r_x:
            rows.append({"eps": e, "skipped": True,
                         "reason": f"eps*|H| = {e * Hn:.3g} exceeds |p_x| = {npx:.3g} or eps >= r_x"})
            continue
        val, parts = abar_epsilon(u, probe.x, e, setting, grid)
        err = abs(val - ux - c * e ** (2 * setting.s) * L)
        bud = error_budget(probe, setting, e)
        incr.append(val - ux)
        base.append(e ** (2 * setting.s) * L)
        rows.append({"eps": e, "value": val, "lhs_error": err, "budget": bud.bound_dwa,
                     "ratio": err / bud.bound_dwa if bud.bound_dwa > 0 else math.inf,
                     "within": err <= bud.bound_dwa + slack, "m_eps": bud.m_eps,
                     "kappa_eps": bud.kappa_eps, **{k: v for k, v in parts.items() if k != "weights"}})
    ok = [r for r in rows if not r.get("skipped")]
    es = [r["eps"] for r in ok]
    er = [r["lhs_error"] for r in ok]
    incr, base = np.asarray(incr), np.asarray(base)
    slope = float(incr @ base / (base @ base)) if base.size else float("nan")
    extra = {"fitted_coefficient": slope, "theory_coefficient": c,
             "coefficient_rel_diff": abs(slope - c) / c if base.size else float("nan")}
    return ExpansionTable(rows, L, fit_order(es, er, setting.s), fit_order(es, er), slack, extra)


def verify_otto(probe, p: float, eps_list) -> ExpansionTable:
    """Ball mean-value identity for a quadratic probe.

    Residual of (p-2)(sup + inf) + 2(N+2) mean - 2(N+p) u(x) - eps^2 (tr B + (p-2) <B bh, bh>)
    over B_eps(x) with bh = b/|b|, compared against 4 eps^3 (p-2) |B|^2 / |b|.
    """
    x = np.asarray(probe.x, dtype=float)
    N = x.size
    b = probe.grad_x()
    B = probe.hess_x()
    nb = float(np.linalg.norm(b))
    if nb == 0:
        raise ValueError("the identity needs |b| > 0")
    bh = b / nb
    lap_p = float(np.trace(B) + (p - 2.0) * bh @ B @ bh)
    Bn = float(np.linalg.norm(B))
    ux = _ux(probe)
    rows = []
    for e in eps_list:
        e = float(e)
        if e * Bn > nb:
            rows.append({"eps": e, "skipped": True, "reason": "eps|B| > |b|"})
            continue
        sup, inf, _, _ = ball_extremes(probe, x, e)
        mean = ball_average(probe, x, e)
        res = abs((p - 2.0) * (sup + inf) + 2.0 * (N + 2.0) * mean - 2.0 * (N + p) * ux - e * e * lap_p)
        bound = 4.0 * e ** 3 * (p - 2.0) * Bn ** 2 / nb
        rows.append({"eps": e, "lhs_error": res, "budget": bound,
                     "ratio": res / bound if bound > 0 else (0.0 if res == 0 else math.inf),
                     "within": res <= bound + 1e-13, "sup": sup, "inf": inf, "mean": mean})
    ok = [r for r in rows if not r.get("skipped")]
    return ExpansionTable(rows, lap_p, fit_order([r["eps"] for r in ok], [r["lhs_error"] for r in ok]),
                          float("nan"), 1e-13)
