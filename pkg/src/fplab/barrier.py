"""The radial barrier f_t(x) = min{2^t, |x|^{-t}} and its supersolution properties.

compute_t0 searches t on a 0.5-step grid for the smallest value at which the
two compatibility conditions

    (t + 2)/2 * (p - 1)/(N + p - 2) >= 2,
    16 (2-2s)(N+p-2) / (s (p-1) t (t+2)) <= r^2 <= (2-s) / ((2-2s)(t+4)),  r < 1/2,

admit a common window radius r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .fields import probe_radial_power, radial_power
from .operators import Setting, a_epsilon, l_sp

__all__ = [
    "f_t",
    "BarrierParams",
    "t0_conditions",
    "compute_t0",
    "barrier_positivity",
    "barrier_discrete_supersolution",
]


def f_t(x, t: float):
    """min{2^t, |x|^{-t}} for points x of shape (..., N)."""
    if t <= 0:
        raise ValueError("t must be positive")
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    with np.errstate(divide="ignore"):
        return np.minimum(2.0 ** t, np.where(r > 0, r, 0.0) ** (-t))


@dataclass(frozen=True)
class BarrierParams:
    t: float
    t0: float
    r_window: float
    lower_r2: float
    upper_r2: float
    first_condition: float

    def to_dict(self):
        return asdict(self)


def t0_conditions(t: float, N: int, p: float, s: float):
    """(first-condition margin, lower bound on r^2, upper bound on r^2)."""
    first = (t + 2.0) / 2.0 * (p - 1.0) / (N + p - 2.0) - 2.0
    lower = 16.0 * (2 - 2 * s) * (N + p - 2.0) / (s * (p - 1.0) * t * (t + 2.0))
    upper = min((2 - s) / ((2 - 2 * s) * (t + 4.0)), 0.25)
    return first, lower, upper


def compute_t0(spec, kernel, step: float = 0.5, t_max: float = 1e4) -> BarrierParams:
    """Smallest grid value of t satisfying both conditions, with a feasible r.

    r^2 is taken at the geometric mean of the admissible interval, which keeps a
    positive margin to both ends; r < 1/2 is kept strict by requiring lower < 1/4.
    """
    N, p, s = spec.dim, spec.exponent, kernel.order
    t = step
    while t <= t_max:
        first, lo, hi = t0_conditions(t, N, p, s)
        if first >= 0 and lo <= hi and lo < 0.25:
            r2 = math.sqrt(lo * hi)
            if r2 >= 0.25:
                r2 = 0.5 * (lo + 0.25)
            return BarrierParams(t, t, math.sqrt(r2), lo, hi, first)
        t += step
    raise RuntimeError(f"no feasible t <= {t_max} (N={N}, p={p}, s={s})")


def barrier_positivity(t: float, radii, setting: Setting, rel_variation: str = "max"):
    """Scaled values |x|^{2s+t} L_{s,p}[f_t](|x| e1) on the given radii.

    Returns (min scaled value, dict with the per-radius values and their
    relative spread (max - min)/max).
    """
    N, s = setting.N, setting.s
    vals = []
    for r in radii:
        r = float(r)
        if r < 1:
            raise ValueError("radii must be >= 1")
        x = np.zeros(N)
        x[0] = r
        pr = probe_radial_power(t, x)
        vals.append(r ** (2 * s + t) * l_sp(pr, setting))
    vals = np.asarray(vals)
    spread = float((vals.max() - vals.min()) / abs(vals.max())) if vals.max() != 0 else math.inf
    return float(vals.min()), {"radii": [float(r) for r in radii], "scaled": vals.tolist(),
                               "spread": spread}


def barrier_discrete_supersolution(t: float, R: float, eps_list, setting: Setting, radii=None,
                                   grid=None):
    """Check A_eps f_t(x) >= f_t(x) + c eps^{2s} R^{-2s-t} on |x| in [1, R].

    For each eps the fitted constant c = min over radii of
    (A_eps f_t - f_t)/(eps^{2s} R^{-2s-t}) is reported; the verdict is c > 0.
    """
    N, s = setting.N, setting.s
    if R <= 1:
        raise ValueError("R must exceed 1")
    if radii is None:
        radii = np.linspace(1.0, R, 7)
    radii = [float(r) for r in radii]
    if min(radii) < 1:
        raise ValueError("the check range starts at |x| = 1")
    F = radial_power(t, N)
    rows = []
    for e in eps_list:
        e = float(e)
        scale = e ** (2 * s) * R ** (-2 * s - t)
        gaps = []
        for r in radii:
            x = np.zeros(N)
            x[0] = r
            A = a_epsilon(F, x, e, setting, grid)
            gaps.append((A.value - float(F(x[None])[0])) / scale)
        c = float(min(gaps))
        rows.append({"eps": e, "fitted_c": c, "holds": c > 0, "normalized_gaps": gaps,
                     "radii": radii})
    return rows
