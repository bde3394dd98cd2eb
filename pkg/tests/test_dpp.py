import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fplab.domains import Annulus, Ball, Box
from fplab.dpp import (DirichletProblem, apply_S, build_operator, contraction_factor,
                       iteration_bound, monotonicity_check, solve_dpp)
from fplab.fields import AnalyticField, affine, constant
from fplab.operators import a_epsilon, make_setting

SETTING = make_setting(2, 3.0, 0.75)


def problem(eps=0.25, domain=None, datum=None):
    return DirichletProblem(domain or Ball([0.0, 0.0], 1.0), datum or affine([1.0, 0.0], 0.0, 2.0),
                            eps, SETTING.spec, SETTING.kernel)


@pytest.fixture(scope="module")
def op():
    return build_operator(problem(), 0.0625)


@pytest.fixture(scope="module")
def sol(op):
    return solve_dpp(op)


def test_contraction_and_bound():
    pr = problem(0.25)
    q = contraction_factor(pr)
    assert q == pytest.approx(1 - (0.25 / 2.0) ** 1.5)
    n = iteration_bound(1e-6, 4.0, q)
    assert q ** (n - 1) <= 1e-6 / 4.0 < q ** (n - 2)
    assert iteration_bound(1.0, 0.5, q) == 1


def test_h_limit():
    with pytest.raises(ValueError):
        build_operator(problem(0.25), 0.1)


def test_unbounded_datum_rejected():
    with pytest.raises(ValueError):
        problem(datum=affine([1.0, 0.0])).bounds()


def test_constants_are_fixed(op):
    pr = problem(datum=constant(0.7, 2))
    o = build_operator(pr, 0.0625)
    out = apply_S(o, o.initial(0.7))
    assert np.allclose(out[o.interior], 0.7, atol=1e-13)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 1.0))
def test_S_order_preserving(seed, scale):
    o = _OP
    rng = np.random.default_rng(seed)
    v = o.exterior_values.copy()
    v[o.interior] = rng.uniform(-2, 2, o.interior.size)
    w = v.copy()
    w[o.interior] += scale * rng.random(o.interior.size)
    assert np.all(apply_S(o, w)[o.interior] >= apply_S(o, v)[o.interior] - 1e-13)


_OP = build_operator(problem(), 0.0625)


def test_commutes_with_constants(op):
    v = op.exterior_values.copy()
    v[op.interior] = np.sin(3 * op.X[:, 0])
    shifted = build_operator(problem(datum=affine([1.0, 0.0], 0.0, 2.0) + 0.5), 0.0625)
    a = apply_S(op, v)[op.interior]
    b = apply_S(shifted, v + 0.5)[op.interior]
    assert np.allclose(b, a + 0.5, atol=1e-12)


def test_solution_properties(sol):
    lo, hi = sol.operator.problem.bounds()
    u = sol.interior_values
    assert sol.converged and sol.residual <= sol.tol
    assert lo <= u.min() and u.max() <= hi
    assert sol.monotone
    assert sol.iterations <= sol.summary()["iteration_bound"]
    # odd datum on a symmetric ball and grid gives an odd solution (up to the
    # stopping tolerance, since the start inf F is not odd)
    X = sol.operator.X
    f = sol.field()
    assert np.allclose(f(X * [-1.0, 1.0]), -f(X), atol=2 * sol.tol)
    assert np.allclose(f(X * [1.0, -1.0]), f(X), atol=1e-9)


def test_restart_from_sup(op, sol):
    other = solve_dpp(op, start="sup")
    assert np.max(np.abs(other.values - sol.values)) <= 2 * sol.tol


def test_anderson_agrees(op, sol):
    fast = solve_dpp(op, method="anderson")
    assert fast.converged
    assert np.max(np.abs(fast.values - sol.values)) <= 4 * sol.tol
    assert fast.iterations <= sol.iterations


def test_lattice_operator_matches_continuous_average(op, sol):
    f = sol.field()
    for x in ([0.3, 0.2], [0.9, 0.05], [-0.2, -0.95]):
        x = np.asarray(x)
        ref = a_epsilon(f, x, op.problem.eps, SETTING).value
        ca = op.cone_averages(sol.values, x)
        assert 0.5 * (ca.max() + ca.min()) == pytest.approx(ref, abs=2e-4)


def test_uncompiled_datum_path(op):
    F = affine([1.0, 0.0], 0.0, 2.0)
    plain = AnalyticField(F.fn, 2, 2.0, "plain", bounds=F.bounds)
    o2 = build_operator(problem(datum=plain), 0.0625)
    assert not o2.meta["compiled_datum"]
    assert np.allclose(o2.ext, op.ext, rtol=1e-12, atol=1e-13)


def test_monotonicity_in_datum():
    pr = problem(0.25)
    ok, info = monotonicity_check(pr, affine([1.0, 0.0], 0.3, 2.0), 0.0625)
    assert ok and info["min_gap"] >= -1e-9


@pytest.mark.parametrize("domain", [Box([-1.0, -0.5], [1.0, 0.5]), Annulus([0.0, 0.0], 0.4, 1.0)])
def test_other_domains(domain):
    s = solve_dpp(problem(0.25, domain), 0.0625, method="anderson")
    lo, hi = s.operator.problem.bounds()
    assert s.converged
    assert lo <= s.interior_values.min() and s.interior_values.max() <= hi


def test_three_dimensions():
    st3 = make_setting(3, 3.0, 0.75)
    pr = DirichletProblem(Ball([0.0, 0.0, 0.0], 1.0), affine([0.0, 0.0, 1.0], 0.0, 2.0), 0.5,
                          st3.spec, st3.kernel)
    s = solve_dpp(pr, 0.125, method="anderson", M=64)
    assert s.converged
    assert np.all(np.abs(s.interior_values) <= 2.0)
