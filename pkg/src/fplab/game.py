"""Non-local tug-of-war with noise.

At each step a fair coin selects the player whose direction y orients the
cone; the position then jumps by eps * R_{y,e1} z with z drawn from mu
restricted to T^{1,inf}(e1) and normalized.  Play stops at the first exit
from D and the payoff is F at the stopping position.

Random numbers: every episode owns the stream
Generator(Philox(key=(master_seed, episode_index))), consumed in blocks of
1 + k uniforms per step (coin, radius, then k-1 angles).  The scalar reference
path and the compiled batch path share the compiled advance routine, so a
given seed reproduces the same trajectory bit for bit in both.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dpp import _contains, _cone_averages_at
from .measure import uniforms_per_increment

__all__ = [
    "Strategy",
    "ConstantStrategy",
    "RadialStrategy",
    "RuleStrategy",
    "HistoryStrategy",
    "GreedyStrategy",
    "CompositeStrategy",
    "Trajectory",
    "ValueEstimate",
    "episode_rng",
    "step",
    "run_episode",
    "estimate_value",
    "greedy_strategy",
    "pull_strategy",
    "push_strategy",
    "theta_bound",
    "a_k",
    "exit_experiment",
]

# strategy codes for the compiled kernel
S_CONST, S_RADIAL, S_GREEDY_MAX, S_GREEDY_MIN = 0, 1, 2, 3
_NO_DIRS = np.zeros((1, 1))
_NO_CAV = np.zeros(1)


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0:
        raise ValueError("direction must be nonzero")
    return v / n


# --- strategies -----------------------------------------------------------------

class Strategy:
    """Maps a finite history to a unit direction.

    history is a dict with keys "states" ((n+1, N) array-like of positions
    x_0..x_n), "increments" and "coins".  Markovian strategies only look at
    the last state.
    """

    name = "strategy"
    markov = True

    def __call__(self, history) -> np.ndarray:
        return self.direction(np.asarray(history["states"][-1], dtype=float), len(history["states"]) - 1)

    def direction(self, x, n):
        raise NotImplementedError

    def code(self):
        """(kind, params) for the compiled path, or None."""
        return None

    def reset(self):
        pass

    def describe(self):
        return {"name": self.name}


class ConstantStrategy(Strategy):
    def __init__(self, y, name=None):
        self.y = _unit(y)
        self.name = name or "constant"

    def direction(self, x, n):
        return self.y

    def code(self):
        return S_CONST, self.y.copy()

    def describe(self):
        return {"name": self.name, "y": self.y.tolist()}


class RadialStrategy(Strategy):
    """sign * (x - c)/|x - c|: sign -1 pulls toward c, +1 pushes away; e1 at x = c."""

    def __init__(self, center, sign: float, name=None):
        self.center = np.asarray(center, dtype=float)
        self.sign = 1.0 if sign > 0 else -1.0
        self.name = name or ("pull" if self.sign < 0 else "push")

    def direction(self, x, n):
        # the compiled kernel may fuse multiply-adds, so share it for bitwise replay
        x = np.asarray(x, dtype=float)
        out = np.empty(x.size)
        _direction(S_RADIAL, np.r_[self.sign, self.center], x, _NO_DIRS, _NO_CAV, False, out)
        return out

    def code(self):
        return S_RADIAL, np.r_[self.sign, self.center]

    def describe(self):
        return {"name": self.name, "center": self.center.tolist(), "sign": self.sign}


class RuleStrategy(Strategy):
    """Markovian strategy from a rule x -> direction (normalized on output)."""

    def __init__(self, rule, name="rule"):
        self.rule = rule
        self.name = name

    def direction(self, x, n):
        return _unit(self.rule(x))


class HistoryStrategy(Strategy):
    markov = False

    def __init__(self, fn, name="history"):
        self.fn = fn
        self.name = name

    def __call__(self, history):
        return _unit(self.fn(history))


class GreedyStrategy(Strategy):
    """Grid direction extremizing the discrete cone average of a lattice field.

    The exact grid extremum is returned, so the choice is within any
    delta/2^{n+1} of it; ties go to the first grid node.
    """

    def __init__(self, operator, values, maximize: bool = True, delta: float = 1e-3):
        self.op = operator
        self.values = np.asarray(values, dtype=float)
        self.maximize = bool(maximize)
        self.delta = float(delta)
        self.name = "greedy-max" if maximize else "greedy-min"

    def averages(self, x):
        return self.op.cone_averages(self.values, x)

    def direction(self, x, n):
        c = self.averages(x)
        j = int(np.argmax(c)) if self.maximize else int(np.argmin(c))
        return self.op.dirs[j]

    def code(self):
        return (S_GREEDY_MAX if self.maximize else S_GREEDY_MIN), np.zeros(1)

    def describe(self):
        return {"name": self.name, "delta": self.delta, "M": self.op.M}


class CompositeStrategy(Strategy):
    """Concatenation of strategies switched at stopping times.

    switch(history, segment_index, segment_start) -> bool decides whether to
    move on to the next strategy at the current step; each segment sees the
    history restarted at its switching time.  Switches are logged.
    """

    markov = False

    def __init__(self, strategies, switch, name="composite"):
        self.strategies = list(strategies)
        self.switch = switch
        self.name = name
        self.reset()

    def reset(self):
        self.segment = 0
        self.start = 0
        self.log = []

    def __call__(self, history):
        n = len(history["states"]) - 1
        while self.segment < len(self.strategies) - 1 and self.switch(history, self.segment, self.start):
            self.segment += 1
            self.start = n
            self.log.append((n, self.segment))
        sub = {k: v[self.start:] for k, v in history.items()}
        return _unit(self.strategies[self.segment](sub))

    def describe(self):
        return {"name": self.name, "segments": [s.describe() for s in self.strategies]}


def greedy_strategy(operator, values, maximize: bool = True, delta: float = 1e-3) -> GreedyStrategy:
    return GreedyStrategy(operator, values, maximize, delta)


def pull_strategy(rule=None, center=None, name=None) -> Strategy:
    """Strategy from a target-direction rule; default rule pulls toward center (origin)."""
    if rule is None:
        c = np.zeros(2) if center is None else center
        return RadialStrategy(c, -1.0, name or "pull")
    return RuleStrategy(rule, name or "pull-rule")


def push_strategy(center, name=None) -> Strategy:
    return RadialStrategy(center, 1.0, name or "push")


# --- compiled step ---------------------------------------------------------------

@njit(cache=True)
def _advance(x, y, u, eps, s, alpha, out):
    """out = x + eps * R_{y,e1} z(u); u = (radius, angle[, azimuth]) uniforms."""
    N = x.size
    r = (1.0 - u[0]) ** (-1.0 / (2.0 * s))
    if N == 2:
        th = (2.0 * u[1] - 1.0) * alpha
        z0 = r * math.cos(th)
        z1 = r * math.sin(th)
        # rotation taking e1 to y
        out[0] = x[0] + eps * (y[0] * z0 - y[1] * z1)
        out[1] = x[1] + eps * (y[1] * z0 + y[0] * z1)
        return
    ct = 1.0 - u[1] * (1.0 - math.cos(alpha))
    st = math.sqrt(max(0.0, 1.0 - ct * ct))
    ph = 2.0 * math.pi * u[2]
    z0 = r * ct
    z1 = r * st * math.cos(ph)
    z2 = r * st * math.sin(ph)
    c = y[0]
    w1 = y[1]
    w2 = y[2]
    sn = math.sqrt(w1 * w1 + w2 * w2)
    if sn < 1e-15:
        if c > 0:
            out[0] = x[0] + eps * z0
            out[1] = x[1] + eps * z1
            out[2] = x[2] + eps * z2
        else:
            # half-turn in the (e1, e2) plane
            out[0] = x[0] - eps * z0
            out[1] = x[1] - eps * z1
            out[2] = x[2] + eps * z2
        return
    v1 = w1 / sn
    v2 = w2 / sn
    # R = I + (c-1)(u u^T + v v^T) + sn (v u^T - u v^T), u = e1, v = (0, v1, v2)
    vz = v1 * z1 + v2 * z2
    out[0] = x[0] + eps * (z0 + (c - 1.0) * z0 - sn * vz)
    out[1] = x[1] + eps * (z1 + (c - 1.0) * vz * v1 + sn * z0 * v1)
    out[2] = x[2] + eps * (z2 + (c - 1.0) * vz * v2 + sn * z0 * v2)


@njit(cache=True)
def _direction(kind, prm, x, dirs, cav, have_cav, out):
    N = x.size
    if kind == 0:
        for d in range(N):
            out[d] = prm[d]
        return
    if kind == 1:
        r = 0.0
        for d in range(N):
            r += (x[d] - prm[1 + d]) ** 2
        r = math.sqrt(r)
        if r == 0.0:
            for d in range(N):
                out[d] = 0.0
            out[0] = 1.0
            return
        for d in range(N):
            out[d] = prm[0] * (x[d] - prm[1 + d]) / r
        return
    j = 0
    if kind == 2:
        best = -np.inf
        for m in range(cav.size):
            if cav[m] > best:
                best = cav[m]
                j = m
    else:
        best = np.inf
        for m in range(cav.size):
            if cav[m] < best:
                best = cav[m]
                j = m
    for d in range(N):
        out[d] = dirs[j, d]


@njit(cache=True)
def _play_block(x, U, eps, s, alpha, dkind, dprm, stop_c, stop_r,
                k1, p1, k2, p2, v, lo, h, shape, strides, rw, rz, win_idx, win_w, win_norm,
                fkind, fprm, dirs, tedge, gx, gw):
    """Advance x in place through the steps in U; returns (steps used, stopped flag)."""
    N = x.size
    y = np.empty(N)
    nxt = np.empty(N)
    M = dirs.shape[0]
    cav = np.empty(M)
    greedy = k1 >= 2 or k2 >= 2
    for n in range(U.shape[0]):
        have = False
        if greedy:
            _cone_averages_at(x, v, lo, h, shape, strides, rw, rz, dirs, win_idx, win_w, win_norm,
                              dkind, dprm, fkind, fprm, tedge, gx, gw, s, cav)
            have = True
        if U[n, 0] < 0.5:
            _direction(k1, p1, x, dirs, cav, have, y)
        else:
            _direction(k2, p2, x, dirs, cav, have, y)
        _advance(x, y, U[n, 1:], eps, s, alpha, nxt)
        for d in range(N):
            x[d] = nxt[d]
        if not _contains(dkind, dprm, N, x[0], x[1], x[2] if N == 3 else 0.0):
            return n + 1, True
        if stop_r < np.inf:
            r2 = 0.0
            for d in range(N):
                r2 += (x[d] - stop_c[d]) ** 2
            if r2 >= stop_r * stop_r:
                return n + 1, True
    return U.shape[0], False


# --- records ---------------------------------------------------------------------

@dataclass
class Trajectory:
    states: np.ndarray
    increments: np.ndarray
    coins: np.ndarray
    directions: np.ndarray
    stopped: bool
    steps: int
    payoff: float
    truncated: bool = False

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.stopped == other.stopped and self.steps == other.steps
                and np.array_equal(self.states, other.states)
                and np.array_equal(self.coins, other.coins)
                and np.array_equal(self.directions, other.directions)
                and (self.payoff == other.payoff or (math.isnan(self.payoff) and math.isnan(other.payoff))))


@dataclass
class ValueEstimate:
    mean: float
    stderr: float
    episodes: int
    truncation_rate: float
    mean_steps: float = float("nan")
    payoffs: np.ndarray | None = field(default=None, repr=False)
    final_states: np.ndarray | None = field(default=None, repr=False)
    seconds: float = 0.0

    def to_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "episodes": self.episodes,
                "truncation_rate": self.truncation_rate, "mean_steps": self.mean_steps,
                "seconds": self.seconds}


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, episode], dtype=np.uint64)))


def _greedy_args(op, values, N):
    if op is None:
        z = np.zeros(1)
        return (z, np.zeros(N), 1.0, np.ones(N, dtype=np.int64), np.ones(N, dtype=np.int64),
                z, np.zeros((1, 1, N)), np.zeros((1, 1), dtype=np.int64), np.zeros((1, 1)), z,
                0, np.zeros(1), np.zeros((1, N)), z[:0], z[:0], z[:0])
    code = getattr(op.problem.datum, "code", None)
    if code is None:
        raise NotImplementedError("compiled greedy play needs a compiled datum")
    lat = op.lattice
    return (np.asarray(values, dtype=float), lat.lo, lat.h, np.asarray(lat.shape, dtype=np.int64),
            lat.strides, op.rw_all, op.rz_all, op.win_idx, op.win_w, op.win_norm, int(code[0]),
            np.asarray(code[1], dtype=float), op.dirs, op.tedge, op.gx, op.gw)


def step(x, sigma_I, sigma_II, rng, eps, spec, kernel, history=None):
    """One move of the process; returns (next state, log entry)."""
    x = np.asarray(x, dtype=float)
    k = uniforms_per_increment(spec.dim)
    u = rng.random(k + 1)
    hist = history if history is not None else {"states": [x], "increments": [], "coins": []}
    coin = 1 if u[0] < 0.5 else 2
    y = np.asarray((sigma_I if coin == 1 else sigma_II)(hist), dtype=float)
    nxt = np.empty_like(x)
    _advance(x, y, u[1:], float(eps), float(kernel.order), float(spec.aperture), nxt)
    z = (nxt - x) / eps
    return nxt, {"coin": coin, "direction": y, "increment": z, "uniforms": u}


def run_episode(x0, eps, sigma_I, sigma_II, domain, F, rng, spec, kernel, max_steps: int = 10 ** 6,
                stop_ball=None) -> Trajectory:
    """Play until exit from D (or from stop_ball = (center, radius)); payoff F(X_tau).

    Exterior starts return F(x0) without moving.
    """
    x = np.asarray(x0, dtype=float).copy()
    if not bool(domain.contains(x[None])[0]):
        return Trajectory(x[None].copy(), np.zeros((0, x.size)), np.zeros(0, dtype=np.int64),
                          np.zeros((0, x.size)), True, 0, float(F(x[None])[0]))
    for s_ in (sigma_I, sigma_II):
        s_.reset()
    hist = {"states": [x.copy()], "increments": [], "coins": []}
    dirs = []
    stopped = False
    sc, sr = (None, math.inf) if stop_ball is None else (np.asarray(stop_ball[0], float), float(stop_ball[1]))
    n = 0
    while n < max_steps:
        x, log = step(x, sigma_I, sigma_II, rng, eps, spec, kernel, hist)
        n += 1
        hist["states"].append(x.copy())
        hist["increments"].append(log["increment"])
        hist["coins"].append(log["coin"])
        dirs.append(log["direction"])
        if not bool(domain.contains(x[None])[0]) or (sr < math.inf and np.sum((x - sc) ** 2) >= sr * sr):
            stopped = True
            break
    states = np.array(hist["states"])
    return Trajectory(states, np.array(hist["increments"]).reshape(-1, x.size),
                      np.array(hist["coins"], dtype=np.int64), np.array(dirs).reshape(-1, x.size),
                      stopped, n, float(F(x[None])[0]), not stopped)


def _compiled(sig):
    return sig.code() is not None and sig.markov


def _simulate(x0, eps, sigma_I, sigma_II, domain, spec, kernel, seed, e0, e1, max_steps,
              stop_ball, block, use_c):
    """Final states, step counts and truncation flags for episodes e0..e1-1."""
    N = x0.size
    n = e1 - e0
    finals = np.empty((n, N))
    steps = np.zeros(n, dtype=np.int64)
    trunc = np.zeros(n, dtype=bool)
    if use_c:
        op = None
        vals = None
        for sg in (sigma_I, sigma_II):
            if isinstance(sg, GreedyStrategy):
                if op is not None and (sg.op is not op or sg.values is not vals):
                    raise NotImplementedError("compiled greedy play needs both players on one field")
                op, vals = sg.op, sg.values
        gargs = _greedy_args(op, vals, N)
        k1, p1 = sigma_I.code()
        k2, p2 = sigma_II.code()
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        dprm = np.asarray(domain.codes(), dtype=float)
        sc = np.zeros(N) if stop_ball is None else np.asarray(stop_ball[0], dtype=float)
        sr = math.inf if stop_ball is None else float(stop_ball[1])
        k = uniforms_per_increment(N) + 1
        s, alpha = float(kernel.order), float(spec.aperture)
        for i in range(n):
            rng = episode_rng(seed, e0 + i)
            x = x0.copy()
            used = 0
            B = block
            done = False
            while used < max_steps:
                nb = min(B, max_steps - used)
                U = rng.random((nb, k))
                m, done = _play_block(x, U, float(eps), s, alpha, domain.kind, dprm, sc, sr,
                                      k1, p1, k2, p2, *gargs)
                used += m
                if done:
                    break
                B = min(4 * B, 1 << 16)
            finals[i] = x
            steps[i] = used
            trunc[i] = not done
    else:
        for i in range(n):
            tr = run_episode(x0, eps, sigma_I, sigma_II, domain, lambda q: np.zeros(len(q)),
                             episode_rng(seed, e0 + i), spec, kernel, max_steps, stop_ball)
            finals[i] = tr.states[-1]
            steps[i] = tr.steps
            trunc[i] = tr.truncated
    return finals, steps, trunc


def estimate_value(x0, eps, sigma_I, sigma_II, domain, F, spec, kernel, episodes: int,
                   seed: int = 0, max_steps: int = 10 ** 6, engine: str = "auto",
                   stop_ball=None, keep: bool = False, block: int = 64,
                   workers: int = 1) -> ValueEstimate:
    """Monte-Carlo mean payoff over independent episodes with per-episode Philox streams.

    With workers > 1 contiguous episode ranges run in separate processes and
    are reassembled in episode order, so results do not depend on workers.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    t0 = time.perf_counter()
    x0 = np.asarray(x0, dtype=float)
    if not bool(domain.contains(x0[None])[0]):
        val = float(F(x0[None])[0])
        return ValueEstimate(val, 0.0, episodes, 0.0, 0.0, np.full(episodes, val) if keep else None,
                             np.tile(x0, (episodes, 1)) if keep else None, time.perf_counter() - t0)
    use_c = engine == "compiled" or (engine == "auto" and _compiled(sigma_I) and _compiled(sigma_II))
    args = (x0, eps, sigma_I, sigma_II, domain, spec, kernel, seed)
    tail = (max_steps, stop_ball, block, use_c)
    if workers > 1 and episodes >= 2 * workers:
        from concurrent.futures import ProcessPoolExecutor
        cuts = np.linspace(0, episodes, workers + 1).astype(int)
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_simulate_range, [(args, int(a), int(b), tail)
                                                  for a, b in zip(cuts[:-1], cuts[1:])]))
        finals = np.concatenate([p[0] for p in parts])
        steps = np.concatenate([p[1] for p in parts])
        trunc = np.concatenate([p[2] for p in parts])
    else:
        finals, steps, trunc = _simulate(*args, 0, episodes, *tail)
    pay = np.asarray(F(finals), dtype=float)
    mean = float(np.mean(pay))
    se = float(np.std(pay, ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return ValueEstimate(mean, se, episodes, float(np.mean(trunc)), float(np.mean(steps)),
                         pay if keep else None, finals if keep else None, time.perf_counter() - t0)


def _simulate_range(job):
    args, a, b, tail = job
    return _simulate(*args, a, b, *tail)


# --- exit-probability experiments ------------------------------------------------------

def theta_bound(t: float, R_tilde: float, R: float) -> float:
    """theta_{R~,R} = (2^t - (R~^{-t} + R^{-t})/2) / (2^t - R^{-t})."""
    return (2.0 ** t - 0.5 * (R_tilde ** (-t) + R ** (-t))) / (2.0 ** t - R ** (-t))


def a_k(k: float, s: float) -> float:
    return (2.0 / (k - 1.0)) ** (2 * s)


def _verdict(bound, p, episodes, trunc, min_episodes):
    sigma = math.sqrt(max(p * (1 - p), 1.0 / episodes) / episodes)
    status = "pass" if p <= bound + 3 * sigma else "fail"
    if episodes < min_episodes or trunc >= 1e-4:
        status = "inconclusive"
    return {"bound": bound, "empirical": p, "sigma": sigma, "pass": status == "pass", "status": status}


def _adversaries(N, center):
    out = []
    for d in range(N):
        for sg in (1.0, -1.0):
            e = np.zeros(N)
            e[d] = sg
            out.append(ConstantStrategy(e, f"const{'+' if sg > 0 else '-'}e{d + 1}"))
    out.append(RadialStrategy(center, 1.0, "push-out"))
    out.append(RadialStrategy(center, -1.0, "pull-in"))
    return out


def exit_experiment(kind: str, spec, kernel, episodes: int = 10 ** 5, seed: int = 0,
                    min_episodes: int = 10 ** 4, max_steps: int = 10 ** 6, workers: int = 1, **kw):
    """Empirical exit probabilities against the barrier bounds.

    kind "annulus": start points with |x| in [1, R_tilde] of the annulus 1 < |x| < R,
        pull-inward first player against each adversary; event |X_tau| >= R; bound
        theta_{R_tilde,R} with t = kw["t"].
    kind "small_ball": start |x| < delta/k, stop at the first |X| >= delta/k; event
        |X| >= delta; bound a_k; every strategy pair from the adversary grid.
    kind "notch": notched ball with apex x; start in B_{r d}(x) within D, first player
        pulls toward the exterior ball centre xbar = x + r d axis; event: leaving
        B_delta(x) before exiting D; bound theta_R = theta_{R,R^2}, R = 2d - 1.
    """
    from .domains import Annulus, Ball, NotchedBall

    N, s = spec.dim, kernel.order
    rows = []
    if kind == "annulus":
        R = float(kw.get("R", 4.0))
        Rt = float(kw.get("R_tilde", 2.0))
        t = float(kw["t"])
        eps = float(kw.get("eps", 2 ** -5))
        scale = float(kw.get("scale", 1.0))
        dom = Annulus(np.zeros(N), scale, scale * R)
        bound = theta_bound(t, Rt, R)
        radii = kw.get("radii", [1.0 + 0.25 * (Rt - 1.0), 0.5 * (1.0 + Rt), Rt])
        sigma_I = RadialStrategy(np.zeros(N), -1.0, "pull-in")
        for r in radii:
            x0 = np.zeros(N)
            x0[0] = scale * float(r)
            for adv in _adversaries(N, np.zeros(N)):
                est = estimate_value(x0, scale * eps, sigma_I, adv, dom,
                                     lambda q: (np.linalg.norm(q, axis=-1) >= scale * R).astype(float),
                                     spec, kernel, episodes, seed, max_steps, workers=workers)
                rows.append({"start_radius": float(r), "sigma_I": sigma_I.name, "sigma_II": adv.name,
                             **_verdict(bound, est.mean, episodes, est.truncation_rate, min_episodes),
                             "truncation_rate": est.truncation_rate, "mean_steps": est.mean_steps})
    elif kind == "small_ball":
        k = float(kw.get("k", 9))
        delta = float(kw.get("delta", 1.0))
        eps = float(kw.get("eps", delta / k / 8.0))
        if not eps < delta / k:
            raise ValueError("need eps < delta/k")
        dom = Ball(np.zeros(N), delta / k)
        bound = a_k(k, s)
        starts = kw.get("starts", [0.0, 0.5, 0.9])
        advs = _adversaries(N, np.zeros(N))
        pairs = kw.get("pairs")
        if pairs is None:
            pairs = [(advs[-1], advs[-2]), (advs[-2], advs[-2]), (advs[0], advs[1]), (advs[0], advs[0]),
                     (advs[-1], advs[-1])]
        for f in starts:
            x0 = np.zeros(N)
            x0[0] = float(f) * delta / k
            for a, b in pairs:
                est = estimate_value(x0, eps, a, b, dom,
                                     lambda q: (np.linalg.norm(q, axis=-1) >= delta).astype(float),
                                     spec, kernel, episodes, seed, max_steps, workers=workers)
                rows.append({"start_fraction": float(f), "sigma_I": a.name, "sigma_II": b.name,
                             **_verdict(bound, est.mean, episodes, est.truncation_rate, min_episodes),
                             "truncation_rate": est.truncation_rate, "mean_steps": est.mean_steps})
    elif kind == "notch":
        t = float(kw["t"])
        beta = float(kw.get("half_angle", math.pi / 6))
        axis = np.zeros(N)
        axis[0] = 1.0
        dom = NotchedBall(np.zeros(N), 1.0, axis, float(kw.get("depth", 0.5)), beta)
        d = dom.cone_ratio
        R = 2 * d - 1
        r = float(kw.get("r", 0.02))
        delta = r * (R * R + 0.5 * (R + 1))
        xbar = dom.apex + r * d * axis
        eps = float(kw.get("eps", r / 8.0))
        bound = theta_bound(t, R, R * R)
        sigma_I = RadialStrategy(xbar, -1.0, "pull-to-notch")
        starts = kw.get("starts", [0.5, 0.9])
        for f in starts:
            x0 = dom.apex - float(f) * r * d * axis
            for adv in _adversaries(N, dom.apex):
                est = estimate_value(x0, eps, sigma_I, adv, dom,
                                     lambda q: (dom.contains(q) & (np.linalg.norm(q - dom.apex, axis=-1) >= delta)).astype(float),
                                     spec, kernel, episodes, seed, max_steps, stop_ball=(dom.apex, delta), workers=workers)
                rows.append({"start_fraction": float(f), "sigma_I": sigma_I.name, "sigma_II": adv.name,
                             **_verdict(bound, est.mean, episodes, est.truncation_rate, min_episodes),
                             "truncation_rate": est.truncation_rate, "mean_steps": est.mean_steps})
    else:
        raise ValueError(f"unknown experiment {kind!r}")
    status = "pass"
    if any(r["status"] == "fail" for r in rows):
        status = "fail"
    elif any(r["status"] == "inconclusive" for r in rows):
        status = "inconclusive"
    return rows, status
