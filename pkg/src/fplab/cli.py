"""Command-line front end.

    fplab <subcommand> [--config PATH] [--seed U64] [--out DIR] [--workers K]
                       [--eps-list CSV] [--label NAME] [per-subcommand flags]

Outputs go to <out>/<subcommand>/<label>/{manifest.json, results.csv,
verdicts.json}.  Exit status: 0 when every verdict passes, 2 when some
verdict is inconclusive (and none fails), 1 on a failed verdict or an error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__

SUBCOMMANDS = ["calibrate-cone", "dump-quadrature", "verify-measure", "verify-expansion",
               "solve-dpp", "play-game", "verify-barrier", "exit-bounds", "convergence-study"]


class ConfigError(Exception):
    pass


# --- schemas -----------------------------------------------------------------------

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 2, "maxItems": 3}
_mat = {"type": "array", "items": _vec}
_setting = {
    "dim": {"type": "integer", "enum": [2, 3]},
    "p": {"type": "number", "minimum": 2},
    "s": {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1},
    "M": {"type": "integer", "minimum": 4},
}
_domain = {
    "type": "object",
    "properties": {"name": {"enum": ["ball", "annulus", "box", "notched_ball"]},
                   "center": _vec, "radius": {"type": "number", "exclusiveMinimum": 0},
                   "r_in": _num, "r_out": _num, "lo": _vec, "hi": _vec, "axis": _vec,
                   "depth": _num, "half_angle": _num},
    "required": ["name"],
}
_datum = {
    "type": "object",
    "properties": {"name": {"enum": ["constant", "affine", "cutoff_quadratic", "radial_power"]},
                   "value": _num, "b": _vec, "c": _num, "clip": _num, "B": _mat, "t": _num,
                   "r1": _num, "r2": _num, "center": _vec},
    "required": ["name"],
}
_probe = {
    "type": "object",
    "properties": {"name": {"enum": ["affine", "quadratic", "cutoff_quadratic", "radial_power"]},
                   "b": _vec, "B": _mat, "x": _vec, "t": _num, "r1": _num, "r2": _num,
                   "l_ref": _num},
    "required": ["name"],
}
_eps_list = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}

SCHEMAS = {
    "calibrate-cone": {"type": "object", "properties": {
        "cases": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
        "tol": {"type": "number", "exclusiveMinimum": 0}, **_setting}},
    "dump-quadrature": {"type": "object", "properties": {
        "a": {"type": "number", "minimum": 0}, "b": _num, "radial_order": {"type": "integer", "minimum": 1},
        "angular_orders": {"type": "array", "items": {"type": "integer", "minimum": 1}}, **_setting}},
    "verify-measure": {"type": "object", "properties": {
        "samples": {"type": "integer", "minimum": 100},
        "tail_radii": {"type": "array", "items": _num}, **_setting}},
    "verify-expansion": {"type": "object", "properties": {
        "probe": _probe, "eps_list": _eps_list, "suites": {"type": "array", "items": {"enum": ["raz", "dwa", "otto"]}},
        "otto_p": _num, "otto_probe": _probe, "otto_eps_list": _eps_list, **_setting}},
    "solve-dpp": {"type": "object", "properties": {
        "domain": _domain, "datum": _datum, "eps": {"type": "number", "exclusiveMinimum": 0},
        "h": {"type": "number", "exclusiveMinimum": 0}, "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1}, "restart": {"type": "boolean"},
        "radial_order": {"type": "integer", "minimum": 1}, **_setting}, "required": ["domain", "datum"]},
    "play-game": {"type": "object", "properties": {
        "domain": _domain, "datum": _datum, "eps": {"type": "number", "exclusiveMinimum": 0},
        "starts": {"type": "array", "items": _vec}, "episodes": {"type": "integer", "minimum": 1},
        "strategies": {"type": "array", "items": {"type": "object", "properties": {
            "name": {"enum": ["constant", "pull", "push", "greedy"]}, "y": _vec, "center": _vec},
            "required": ["name"]}, "minItems": 2, "maxItems": 2},
        "h": _num, "max_steps": {"type": "integer", "minimum": 1}, **_setting},
        "required": ["domain", "datum"]},
    "verify-barrier": {"type": "object", "properties": {
        "radii": {"type": "array", "items": {"type": "number", "minimum": 1}},
        "R": {"type": "number", "exclusiveMinimum": 1}, "eps_list": _eps_list,
        "t_offset": _num, **_setting}},
    "exit-bounds": {"type": "object", "properties": {
        "experiments": {"type": "array", "items": {"enum": ["small_ball", "annulus", "notch"]}},
        "episodes": {"type": "integer", "minimum": 1}, "k": _num, "delta": _num, "R": _num,
        "R_tilde": _num, "eps": _num, "half_angle": _num, "r": _num, **_setting}},
    "convergence-study": {"type": "object", "properties": {
        "domain": _domain, "datum": _datum, "eps_list": _eps_list, "h_ratio": _num,
        "tol": _num, **_setting}},
}


def validate(sub: str, cfg: dict) -> None:
    v = jsonschema.Draft7Validator(SCHEMAS[sub])
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field '{path}': {e.message}")


# --- output helpers ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else repr(f)
    return o


_TIMING_KEYS = ("seconds", "elapsed", "wall")


def write_outputs(outdir: Path, manifest: dict, header, rows, verdicts: list):
    outdir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    (outdir / "results.csv").write_text(buf.getvalue(), encoding="utf-8")
    # wall-clock numbers stay out of verdicts so those bytes are reproducible
    timings = {}
    clean = []
    for v in verdicts:
        v = dict(v)
        for k in _TIMING_KEYS:
            if k in v:
                timings.setdefault(v["name"], {})[k] = v.pop(k)
        clean.append(v)
    verdicts = clean
    if timings:
        manifest = {**manifest, "verdict_timings": timings}
    (outdir / "verdicts.json").write_text(json.dumps(_jsonable(verdicts), indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")
    (outdir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")


def verdict(name, passed, status=None, **info):
    st = status or ("pass" if passed else "fail")
    return {"name": name, "pass": bool(passed) and st == "pass", "status": st, **info}


# --- shared builders ---------------------------------------------------------------------

def _setting_from(cfg, args):
    from .operators import make_setting
    N = int(cfg.get("dim", 2))
    p = float(cfg.get("p", 3.0))
    s = float(cfg.get("s", 0.75))
    return make_setting(N, p, s)


def _probe_from(cfg, N):
    from . import fields
    name = cfg["name"]
    x = cfg.get("x", [0.0] * N)
    if name == "affine":
        return fields.probe_affine(cfg.get("b", [1.0] + [0.0] * (N - 1)), x)
    if name == "quadratic":
        return fields.probe_quadratic(cfg["b"], cfg["B"], x)
    if name == "cutoff_quadratic":
        return fields.probe_cutoff_quadratic(cfg["b"], cfg["B"], x, cfg.get("r1", 0.5), cfg.get("r2", 1.5))
    if name == "radial_power":
        return fields.probe_radial_power(cfg["t"], x)
    raise ConfigError(f"config field 'probe/name': unknown probe {name!r}")


def _problem_from(cfg, setting, eps):
    from .domains import domain_from_config
    from .fields import datum_from_config
    from .dpp import DirichletProblem
    N = setting.N
    return DirichletProblem(domain_from_config(cfg["domain"], N), datum_from_config(cfg["datum"], N),
                            float(eps), setting.spec, setting.kernel)


def _eps_list(args, cfg, default):
    if args.eps_list:
        try:
            return [float(v) for v in args.eps_list.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"flag '--eps-list': {exc}") from exc
    return [float(v) for v in cfg.get("eps_list", default)]


# --- subcommands ------------------------------------------------------------------------

def cmd_calibrate_cone(cfg, args):
    from .cone import cap_moment_ratio, make_cone
    tol = float(cfg.get("tol", 1e-12))
    if "cases" in cfg:
        cases = [(int(a), float(b)) for a, b in cfg["cases"]]
    else:
        cases = [(int(cfg.get("dim", 2)), float(cfg.get("p", 2.0)))]
    rows, vs = [], []
    for N, p in cases:
        sp = make_cone(N, p, tol)
        res = abs(cap_moment_ratio(N, sp.aperture) - (p - 1.0))
        rows.append([N, p, sp.aperture, sp.cap_measure, res])
        print(f"N={N} p={p:g} aperture={sp.aperture:.17g} cap_measure={sp.cap_measure:.17g}")
        ok = res <= max(tol, 1e-10)
        if p == 2:
            ok = ok and abs(sp.aperture - math.pi / 2) <= 1e-12
        vs.append(verdict(f"calibration N={N} p={p:g}", ok, residual=res))
    return ["N", "p", "aperture", "cap_measure", "residual"], rows, vs, {"tol": tol}


def cmd_dump_quadrature(cfg, args):
    from .measure import cone_quadrature, truncated_cone_mass
    st = _setting_from(cfg, args)
    a = float(cfg.get("a", 1.0))
    b = float(cfg.get("b", math.inf))
    q = cone_quadrature(st.spec, st.kernel, a, b, int(cfg.get("radial_order", 16)),
                        tuple(cfg.get("angular_orders", (32, 32))))
    rows = [list(z) + [w] for z, w in zip(q.nodes, q.weights)]
    exact = truncated_cone_mass(st.spec, st.kernel, a, b) if a > 0 else math.nan
    rel = abs(q.mass - exact) / exact if a > 0 else math.nan
    vs = [verdict("mass", a == 0 or rel <= 1e-10, quadrature=q.mass, exact=exact, rel_error=rel)]
    hdr = [f"z{i + 1}" for i in range(st.N)] + ["weight"]
    return hdr, rows, vs, {"meta": q.meta, "a": a, "b": b}


def cmd_verify_measure(cfg, args):
    from .cone import cap_second_moment, make_cone
    from .measure import cone_quadrature, make_kernel, sample_increment, truncated_cone_mass
    s = float(cfg.get("s", 0.75))
    rows, vs = [], []
    for N in ([int(cfg["dim"])] if "dim" in cfg else [2, 3]):
        for p in ([float(cfg["p"])] if "p" in cfg else [2.0, 3.0, 5.0, 10.0]):
            sp = make_cone(N, p)
            ker = make_kernel(N, s)
            m2 = cap_second_moment(sp) / sp.cap_measure
            rel = abs(m2 - 1.0 / (N + p - 2)) * (N + p - 2)
            rows.append(["cap_second_moment_mean", N, p, m2, 1.0 / (N + p - 2), rel])
            vs.append(verdict(f"cap moment N={N} p={p:g}", rel <= 1e-8, rel_error=rel))
            eps = 0.3
            q = cone_quadrature(sp, ker, 0.0, eps)
            val = q.integrate(lambda Z: Z[:, 1] ** 2)
            ex = ker.norm_const * sp.cap_measure * eps ** (2 - 2 * s) / ((N + p - 2) * (2 - 2 * s))
            rel = abs(val - ex) / ex
            rows.append(["near_second_moment", N, p, val, ex, rel])
            vs.append(verdict(f"near second moment N={N} p={p:g}", rel <= 1e-8, rel_error=rel))
            for a, b in [(0.5, 2.0), (1.0, math.inf)]:
                qm = cone_quadrature(sp, ker, a, b)
                ex = truncated_cone_mass(sp, ker, a, b)
                rel = abs(qm.mass - ex) / ex
                rows.append([f"mass_{a:g}_{b:g}", N, p, qm.mass, ex, rel])
                vs.append(verdict(f"mass N={N} p={p:g} ({a:g},{b:g})", rel <= 1e-10, rel_error=rel))
    # radial tail of the sampler
    n = int(cfg.get("samples", 10 ** 6))
    rng = np.random.Generator(np.random.Philox(key=np.array([args.seed, 0], dtype=np.uint64)))
    N0 = int(cfg.get("dim", 2))
    sp = make_cone(N0, float(cfg.get("p", 3.0)))
    ker = make_kernel(N0, s)
    r = np.linalg.norm(sample_increment(rng, sp, ker, n), axis=1)
    for R in cfg.get("tail_radii", [2.0, 4.0, 8.0]):
        pe = float(np.mean(r > R))
        pt = R ** (-2 * s)
        sig = math.sqrt(pt * (1 - pt) / n)
        rows.append([f"tail_R={R:g}", N0, sp.exponent, pe, pt, abs(pe - pt) / sig])
        vs.append(verdict(f"radial tail R={R:g}", abs(pe - pt) <= 4 * sig, empirical=pe, theory=pt, sigma=sig))
    return ["check", "N", "p", "value", "reference", "deviation"], rows, vs, {"s": s, "samples": n}


def cmd_verify_expansion(cfg, args):
    from .expansion import verify_dwa, verify_otto, verify_raz
    st = _setting_from(cfg, args)
    N = st.N
    pc = cfg.get("probe", {"name": "cutoff_quadratic", "b": [1.0, 0.0], "B": [[0.6, 0.4], [0.4, -0.8]]})
    pr = _probe_from(pc, N)
    eps = _eps_list(args, cfg, [2.0 ** -k for k in range(3, 10)])
    suites = cfg.get("suites", ["raz", "dwa", "otto"])
    rows, vs, extra = [], [], {}
    l_ref = pc.get("l_ref")
    for name, fn in (("raz", verify_raz), ("dwa", verify_dwa)):
        if name not in suites:
            continue
        T = fn(pr, st, eps, l_ref=l_ref)
        for r in T.rows:
            if r.get("skipped"):
                continue
            rows.append([name, r["eps"], r["lhs_error"], r["budget"], r["ratio"], T.order_estimate])
        vs.append(verdict(f"{name} budget", T.all_within_budget, order_estimate=T.order_estimate,
                          l_value=T.l_value))
        extra[name] = {"order_estimate": T.order_estimate, "raw_order": T.raw_order, **T.extra}
        if name == "dwa" and T.extra:
            vs.append(verdict("dwa coefficient", T.extra["coefficient_rel_diff"] <= 0.05, **T.extra))
    if "otto" in suites:
        from .fields import probe_quadratic
        oc = cfg.get("otto_probe")
        qp = _probe_from(oc, N) if oc else probe_quadratic([1.0] + [0.0] * (N - 1),
                                                           np.diag([1.0, -1.0] + [0.0] * (N - 2)))
        T = verify_otto(qp, float(cfg.get("otto_p", 4.0)),
                        [float(v) for v in cfg.get("otto_eps_list", [2.0 ** -k for k in range(3, 8)])])
        for r in T.rows:
            if not r.get("skipped"):
                rows.append(["otto", r["eps"], r["lhs_error"], r["budget"], r["ratio"], T.order_estimate])
        vs.append(verdict("otto residual", T.all_within_budget))
    return ["suite", "eps", "lhs_error", "budget", "ratio", "order_estimate"], rows, vs, \
        {"probe": pc, "eps_list": eps, "suites": extra}


def cmd_solve_dpp(cfg, args):
    from .dpp import iteration_bound, solve_dpp, build_operator
    st = _setting_from(cfg, args)
    eps = float(_eps_list(args, cfg, [cfg.get("eps", 2.0 ** -4)])[0])
    prob = _problem_from(cfg, st, eps)
    op = build_operator(prob, cfg.get("h"), M=cfg.get("M"), radial_order=int(cfg.get("radial_order", 4)))
    sol = solve_dpp(op, tol=cfg.get("tol"), max_iter=int(cfg.get("max_iter", 100000)))
    lo, hi = prob.bounds()
    summ = sol.summary()
    vals = sol.interior_values
    vs = [verdict("converged", sol.converged),
          verdict("residual", sol.residual <= sol.tol, residual=sol.residual, tol=sol.tol),
          verdict("maximum principle", bool(vals.min() >= lo - 1e-12 and vals.max() <= hi + 1e-12),
                  min=float(vals.min()), max=float(vals.max())),
          verdict("monotone iterates", sol.monotone),
          verdict("iteration bound", sol.iterations <= iteration_bound(sol.tol, hi - lo, sol.q),
                  iterations=sol.iterations, bound=iteration_bound(sol.tol, hi - lo, sol.q))]
    if cfg.get("restart", False):
        sol2 = solve_dpp(op, tol=cfg.get("tol"), start="sup")
        d = float(np.max(np.abs(sol2.interior_values - vals)))
        vs.append(verdict("restart from sup F", d <= 2 * sol.tol, difference=d))
    rows = [list(x) + [v] for x, v in zip(op.X, vals)]
    return [f"x{i + 1}" for i in range(st.N)] + ["value"], rows, vs, {"problem": prob.to_dict(), "solution": summ}


def _strategy_from(c, N, op=None, values=None, maximize=True):
    from . import game
    name = c["name"]
    if name == "constant":
        return game.ConstantStrategy(c.get("y", [1.0] + [0.0] * (N - 1)))
    if name == "pull":
        return game.RadialStrategy(c.get("center", [0.0] * N), -1.0)
    if name == "push":
        return game.RadialStrategy(c.get("center", [0.0] * N), 1.0)
    if name == "greedy":
        return game.greedy_strategy(op, values, maximize)
    raise ConfigError(f"config field 'strategies/name': unknown strategy {name!r}")


def cmd_play_game(cfg, args):
    from .dpp import solve_dpp, build_operator
    from .game import estimate_value
    st = _setting_from(cfg, args)
    N = st.N
    eps = float(_eps_list(args, cfg, [cfg.get("eps", 2.0 ** -3)])[0])
    prob = _problem_from(cfg, st, eps)
    strat_cfg = cfg.get("strategies", [{"name": "greedy"}, {"name": "greedy"}])
    need = any(c["name"] == "greedy" for c in strat_cfg)
    sol = None
    if need:
        op = build_operator(prob, cfg.get("h"), M=cfg.get("M"))
        sol = solve_dpp(op)
    sI = _strategy_from(strat_cfg[0], N, sol.operator if sol else None, sol.values if sol else None, True)
    sII = _strategy_from(strat_cfg[1], N, sol.operator if sol else None, sol.values if sol else None, False)
    episodes = int(cfg.get("episodes", 10 ** 4))
    starts = cfg.get("starts", [[0.0] * N])
    lo, hi = prob.bounds()
    rows, vs = [], []
    for i, x0 in enumerate(starts):
        est = estimate_value(np.asarray(x0, float), eps, sI, sII, prob.domain, prob.datum, st.spec,
                             st.kernel, episodes, seed=args.seed + i,
                             max_steps=int(cfg.get("max_steps", 10 ** 6)), workers=args.workers)
        row = list(x0) + [est.mean, est.stderr, est.episodes, est.truncation_rate]
        info = {"start": list(x0), **est.to_dict()}
        if sol is not None:
            u0 = float(sol.field()(np.asarray(x0, float)[None])[0])
            tol = 3 * est.stderr + 1e-2 * (hi - lo)
            row += [u0]
            vs.append(verdict(f"game vs dpp at {x0}", abs(est.mean - u0) <= tol and est.truncation_rate < 1e-4,
                              dpp_value=u0, **info))
        vs.append(verdict(f"bounded payoff at {x0}", lo - 1e-12 <= est.mean <= hi + 1e-12, **info))
        rows.append(row)
    hdr = [f"x{i + 1}" for i in range(N)] + ["mean", "stderr", "episodes", "truncation_rate"]
    if sol is not None:
        hdr.append("dpp_value")
    return hdr, rows, vs, {"problem": prob.to_dict(), "strategies": [sI.describe(), sII.describe()],
                           "episodes": episodes, "dpp": sol.summary() if sol else None}


def cmd_verify_barrier(cfg, args):
    from .barrier import barrier_discrete_supersolution, barrier_positivity, compute_t0
    st = _setting_from(cfg, args)
    bp = compute_t0(st.spec, st.kernel)
    t = bp.t0 + float(cfg.get("t_offset", 1.0))
    radii = cfg.get("radii", [1.0, 2.0, 5.0, 10.0])
    mn, info = barrier_positivity(t, radii, st)
    rows = [["positivity", r, v] for r, v in zip(info["radii"], info["scaled"])]
    vs = [verdict("positivity", mn > 0, min_scaled=mn),
          verdict("scaling spread < 50%", info["spread"] < 0.5, spread=info["spread"])]
    R = float(cfg.get("R", 4.0))
    eps = _eps_list(args, cfg, [2.0 ** -5])
    for r in barrier_discrete_supersolution(t, R, eps, st):
        for rad, g in zip(r["radii"], r["normalized_gaps"]):
            rows.append([f"supersolution eps={r['eps']:g}", rad, g])
        vs.append(verdict(f"discrete supersolution eps={r['eps']:g}", r["holds"], fitted_c=r["fitted_c"]))
    return ["check", "radius", "value"], rows, vs, {"barrier": bp.to_dict(), "t": t, "R": R}


def cmd_exit_bounds(cfg, args):
    from .barrier import compute_t0
    from .game import exit_experiment
    st = _setting_from(cfg, args)
    bp = compute_t0(st.spec, st.kernel)
    episodes = int(cfg.get("episodes", 10 ** 5))
    rows, vs = [], []
    keys = ("k", "delta", "R", "R_tilde", "eps", "half_angle", "r")
    extra = {k: cfg[k] for k in keys if k in cfg}
    for kind in cfg.get("experiments", ["small_ball", "annulus"]):
        res, status = exit_experiment(kind, st.spec, st.kernel, episodes, args.seed, t=bp.t0,
                                      workers=args.workers, **extra)
        for r in res:
            rows.append([kind, r.get("start_radius", r.get("start_fraction")), r["sigma_I"], r["sigma_II"],
                         r["empirical"], r["sigma"], r["bound"], r["status"]])
        vs.append(verdict(f"exit bound {kind}", status == "pass", status=status,
                          worst=max(r["empirical"] - r["bound"] for r in res)))
    return ["experiment", "start", "sigma_I", "sigma_II", "empirical", "sigma", "bound", "status"], rows, vs, \
        {"t0": bp.t0, "episodes": episodes}


def cmd_convergence_study(cfg, args):
    from .dpp import convergence_study
    st = _setting_from(cfg, args)
    eps = _eps_list(args, cfg, [2.0 ** -k for k in range(3, 7)])
    dcfg = {"domain": cfg.get("domain", {"name": "ball", "radius": 1.0}),
            "datum": cfg.get("datum", {"name": "affine", "b": [1.0] + [0.0] * (st.N - 1), "clip": 2.0})}
    prob = _problem_from(dcfg, st, max(eps))
    rows, sols, verd = convergence_study(prob, eps, float(cfg.get("h_ratio", 0.25)), cfg.get("tol"),
                                         cfg.get("M"))
    out = [[r["eps_coarse"], r["eps_fine"], r["sup_difference"]] for r in rows]
    vs = [verdict("differences decreasing", verd["decreasing"]),
          verdict("sanity envelope", verd["within_envelope"])]
    vs += [verdict(f"residual eps={s_.operator.problem.eps:g}", s_.residual <= s_.tol, residual=s_.residual)
           for s_ in sols]
    return ["eps_coarse", "eps_fine", "sup_difference"], out, vs, \
        {"problem": prob.to_dict(), "solutions": [s_.summary() for s_ in sols]}


HANDLERS = {name: globals()["cmd_" + name.replace("-", "_")] for name in SUBCOMMANDS}


def build_parser():
    ap = argparse.ArgumentParser(prog="fplab", description="Geometric fractional p-Laplacian laboratory")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=str, default="out")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--eps-list", type=str, default=None)
        sp.add_argument("--label", type=str, default="default")
        sp.add_argument("--dim", type=int, default=None)
        sp.add_argument("--p", type=float, default=None)
        sp.add_argument("--s", type=float, default=None)
        sp.add_argument("--M", type=int, default=None)
        sp.add_argument("--episodes", type=int, default=None)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if not (0 <= args.seed < 2 ** 64):
        print("error: flag '--seed': must lie in [0, 2^64)", file=sys.stderr)
        return 1
    try:
        cfg = {}
        if args.config:
            try:
                cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"config file {args.config!r}: {exc}") from exc
            if not isinstance(cfg, dict):
                raise ConfigError("config field '<root>': must be a JSON object")
        for flag, key in (("dim", "dim"), ("p", "p"), ("s", "s"), ("M", "M"), ("episodes", "episodes")):
            if getattr(args, flag) is not None:
                cfg[key] = getattr(args, flag)
        validate(args.command, cfg)
        t0 = time.perf_counter()
        header, rows, verdicts, info = HANDLERS[args.command](cfg, args)
        manifest = {"command": args.command, "config": cfg, "seed": args.seed, "workers": args.workers,
                    "eps_list_flag": args.eps_list, "info": info, "seconds": time.perf_counter() - t0,
                    "versions": {"fplab": __version__, "python": platform.python_version(),
                                 "numpy": np.__version__}}
        outdir = Path(args.out) / args.command / args.label
        write_outputs(outdir, manifest, header, rows, verdicts)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for v in verdicts:
        print(f"[{v['status']}] {v['name']}")
    if any(v["status"] == "fail" for v in verdicts):
        return 1
    if any(v["status"] == "inconclusive" for v in verdicts):
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
