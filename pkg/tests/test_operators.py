import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fplab.fields import affine, constant, probe_cutoff_quadratic, probe_quadratic
from fplab.operators import (a_epsilon, abar_epsilon, abar_weights, ball_average, ball_extremes,
                             cone_average, delta_ps, l_epsilon, l_sp, l_tilde, make_setting)

from oracles.lsp_oracle import lsp_polar_oracle

# frozen QUADPACK values from tests/oracles/lsp_oracle.py
B0 = [[0.6, 0.4], [0.4, -0.8]]
L_REF = {0.75: 0.10366104841863225, 0.9: 0.15287688748080253}


@pytest.fixture(scope="module")
def setting():
    return make_setting(2, 3.0, 0.75)


def smooth(P):
    P = np.asarray(P)
    return np.sin(1.3 * P[..., 0] - 0.4 * P[..., 1]) + 0.5 * P[..., 0] * P[..., 1]


def test_constants_and_affine_are_fixed(setting):
    x = np.array([0.2, -0.1])
    assert a_epsilon(constant(1.7, 2), x, 0.1, setting).value == pytest.approx(1.7, abs=1e-13)
    u = affine([0.3, -1.1], 0.4)
    res = a_epsilon(u, x, 0.1, setting)
    assert res.value == pytest.approx(float(u(x[None])[0]), abs=1e-10)
    # the sup direction of a linear function is its gradient
    g = np.array([0.3, -1.1]) / np.linalg.norm([0.3, -1.1])
    assert res.argmax @ g == pytest.approx(1.0, abs=1e-6)


def test_cone_average_checks_radius(setting):
    with pytest.raises(ValueError):
        cone_average(smooth, np.zeros(2), np.array([1.0, 0.0]), 0.2, setting.quad(0.1))


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_rotation_invariance(phi, x0, x1):
    setting = make_setting(2, 3.0, 0.75)
    c, s = math.cos(phi), math.sin(phi)
    R = np.array([[c, -s], [s, c]])
    x = np.array([x0, x1])
    rotated = lambda P: smooth(np.asarray(P) @ R)   # u(R^T y)
    a = a_epsilon(smooth, x, 0.2, setting).value
    b = a_epsilon(rotated, R @ x, 0.2, setting).value
    assert a == pytest.approx(b, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-0.3, 0.3))
def test_order_preserving(height, c0):
    setting = make_setting(2, 3.0, 0.75)
    bump = lambda P: height * np.exp(-np.sum((np.asarray(P) - [c0, 0.1]) ** 2, axis=-1) / 0.05)
    x = np.array([0.05, 0.0])
    lo = a_epsilon(smooth, x, 0.15, setting).value
    hi = a_epsilon(lambda P: smooth(P) + bump(P), x, 0.15, setting).value
    assert hi >= lo - 1e-12


def test_ball_average_and_extremes():
    q = lambda P: np.sum(np.asarray(P) ** 2, axis=-1)
    for N in (2, 3):
        x = np.zeros(N)
        assert ball_average(q, x, 0.3) == pytest.approx(0.09 * N / (N + 2), rel=1e-12)
        sup, inf, _, _ = ball_extremes(q, x, 0.3)
        assert sup == pytest.approx(0.09, rel=1e-8) and inf == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("N,p,s", [(2, 3.0, 0.75), (3, 5.0, 0.9), (2, 2.0, 0.6)])
def test_abar_weights_convex(N, p, s):
    w = abar_weights(N, p, s)
    assert sum(w) == pytest.approx(1.0) and min(w) >= 0


def test_abar_of_constant(setting):
    val, parts = abar_epsilon(constant(-0.4, 2), np.zeros(2), 0.1, setting)
    assert val == pytest.approx(-0.4, abs=1e-12)
    assert set(parts) >= {"A_eps", "ball_mean"}


@pytest.mark.parametrize("s", [0.75, 0.9])
def test_lsp_frozen_oracle(s):
    st_ = make_setting(2, 3.0, s)
    pr = probe_cutoff_quadratic([1.0, 0.0], B0, np.zeros(2), 0.5, 1.5)
    assert l_sp(pr, st_) == pytest.approx(L_REF[s], rel=1e-6)


def test_lsp_live_oracle():
    # a fresh off-axis configuration evaluated by QUADPACK here
    st_ = make_setting(2, 4.0, 0.7)
    b = np.array([math.cos(1.0), math.sin(1.0)])
    B = [[-0.2, 0.3], [0.3, 0.5]]
    x = np.array([0.05, 0.1])
    pr = probe_cutoff_quadratic(b, B, x, 0.5, 1.5).at(x, r_x=0.25)
    grad = pr.grad_x()
    ref = lsp_polar_oracle(pr, x, math.atan2(grad[1], grad[0]), st_.spec.aperture, 0.7,
                           st_.kernel.norm_const, 0.25, 1.5 + np.linalg.norm(x) + 1e-9)
    assert l_sp(pr, st_) == pytest.approx(ref, rel=1e-6)


def test_near_quadratic_closed_form():
    # int_{T^{0,r}(e1)} <B z, z> dmu = C r^{2-2s}/(2-2s) |A| ((p-1) B11 + B22)/(N+p-2)
    N, p, s = 2, 3.0, 0.75
    st_ = make_setting(N, p, s)
    B = np.array([[1.0, 0.2], [0.2, -0.5]])
    r = 0.4
    got = st_.quad(0.0, r).integrate(lambda Z: np.einsum("ki,ij,kj->k", Z, B, Z))
    exact = (st_.kernel.norm_const * r ** (2 - 2 * s) / (2 - 2 * s) * st_.spec.cap_measure
             * ((p - 1) * B[0, 0] + B[1, 1]) / (N + p - 2))
    assert got == pytest.approx(exact, rel=1e-10)
    with pytest.raises(ValueError):
        l_sp(probe_quadratic([0.0, 0.0], B, np.zeros(2)), st_)


def test_l_tilde_agrees_with_lsp(setting):
    pr = probe_cutoff_quadratic([1.0, 0.0], B0, np.zeros(2), 0.5, 1.5)
    t = l_tilde(pr, setting, grid=setting.grid(128))
    assert t.value == pytest.approx(l_sp(pr, setting), rel=1e-10)
    assert np.allclose(t.y, [1.0, 0.0])


def test_l_epsilon_limit(setting):
    # eps^{-2s}-scaled deviation approaches s/(C|A|) L
    pr = probe_cutoff_quadratic([1.0, 0.0], B0, np.zeros(2), 0.5, 1.5)
    coef = setting.s / (setting.kernel.norm_const * setting.spec.cap_measure)
    vals = [l_epsilon(pr, np.zeros(2), e, setting) for e in (2 ** -6, 2 ** -8)]
    errs = [abs(v - coef * L_REF[0.75]) for v in vals]
    assert errs[1] < errs[0]


def test_delta_ps_scaling(setting):
    pr = probe_cutoff_quadratic([1.0, 0.0], B0, np.zeros(2), 0.5, 1.5)
    d = delta_ps(pr, setting)
    N, p, s = 2, 3.0, 0.75
    assert d == pytest.approx((2 - 2 * s) / setting.kernel.norm_const * (N + p - 2)
                              / setting.spec.cap_measure * L_REF[0.75], rel=1e-6)
