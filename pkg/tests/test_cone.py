import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from fplab.cone import (CalibrationError, aperture_for_exponent, cap_mean_axial, cap_measure,
                        cap_moment_ratio, cap_rule, in_cone, make_cone, rotate_from_e1,
                        rotation_between, sphere_grid)


# closed-form moment ratios used as an independent oracle
def q_closed(N, a):
    if N == 2:
        return (a + 0.5 * math.sin(2 * a)) / (a - 0.5 * math.sin(2 * a))
    c = math.cos(a)
    return 2 * (1 + c + c * c) / (2 * math.sin(a / 2) ** 2 * (2 + c))


# frozen from brentq on the closed forms above
ALPHA = {
    (2, 3.0): 1.1394313300376882,
    (2, 5.0): 0.8300174066322976,
    (2, 10.0): 0.5655512928256381,
    (3, 3.0): 1.1960618940862613,
}


@pytest.mark.parametrize("N,p", sorted(ALPHA))
def test_frozen_apertures(N, p):
    assert aperture_for_exponent(N, p) == pytest.approx(ALPHA[(N, p)], abs=1e-12)


@pytest.mark.parametrize("N", [2, 3])
@pytest.mark.parametrize("p", [2.5, 3.0, 5.0, 10.0, 40.0])
def test_aperture_matches_closed_form_root(N, p):
    ref = brentq(lambda a: q_closed(N, a) - (p - 1), 1e-4, math.pi / 2 - 1e-12, xtol=1e-15)
    assert aperture_for_exponent(N, p) == pytest.approx(ref, abs=1e-11)


def test_q_at_quarter_pi():
    exact = (math.pi / 4 + 0.5) / (math.pi / 4 - 0.5)
    assert cap_moment_ratio(2, math.pi / 4) == pytest.approx(exact, rel=1e-14)
    assert exact == pytest.approx(4.503876787768218, rel=1e-14)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_p2_is_half_space(N):
    assert make_cone(N, 2.0).aperture == pytest.approx(math.pi / 2, abs=1e-12)


def test_cap_measure_closed_forms():
    a = 0.7
    assert cap_measure(2, a) == pytest.approx(2 * a)
    assert cap_measure(3, a) == pytest.approx(2 * math.pi * (1 - math.cos(a)))
    # N = 4 against the generic rule: |S^2| int_0^a sin^2
    assert cap_measure(4, a) == pytest.approx(4 * math.pi * (a / 2 - math.sin(2 * a) / 4), rel=1e-12)


@pytest.mark.parametrize("N", [2, 3])
def test_cap_rule_weights_and_mean(N):
    sp = make_cone(N, 3.0)
    dirs, w = cap_rule(sp)
    assert w.sum() == pytest.approx(sp.cap_measure, rel=1e-13)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    assert np.all(np.arccos(np.clip(dirs[:, 0], -1, 1)) <= sp.aperture + 1e-12)
    assert (w @ dirs[:, 0]) / w.sum() == pytest.approx(cap_mean_axial(sp), rel=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        aperture_for_exponent(2, 1.5)
    with pytest.raises(ValueError):
        cap_moment_ratio(2, 0.0)
    with pytest.raises(CalibrationError):
        aperture_for_exponent(2, 3.0, tol=1e-30, max_iter=5)
    with pytest.raises(ValueError):
        rotation_between([1.0, 1.0], [1.0, 0.0])
    with pytest.raises(NotImplementedError):
        sphere_grid(4, 10)


def test_in_cone():
    sp = make_cone(2, 3.0)
    assert in_cone([1.0, 0.0], [1.0, 0.0], sp, 0.5, 2.0)
    assert not in_cone([1.0, 0.0], [1.0, 0.0], sp, 1.5, 2.0)
    assert not in_cone([0.0, 1.0], [1.0, 0.0], sp)


unit = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1)


@settings(max_examples=60, deadline=None)
@given(unit, unit, st.sampled_from([2, 3]))
def test_rotation_between_is_proper_rotation(a, b, N):
    y = np.asarray(a[:N]) / np.linalg.norm(a[:N]) if np.linalg.norm(a[:N]) > 0.1 else np.eye(N)[0]
    yt = np.asarray(b[:N]) / np.linalg.norm(b[:N]) if np.linalg.norm(b[:N]) > 0.1 else -y
    R = rotation_between(y, yt)
    assert np.allclose(R @ y, yt, atol=1e-12)
    assert np.allclose(R.T @ R, np.eye(N), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(unit, st.sampled_from([2, 3]))
def test_rotate_from_e1_matches_matrix(a, N):
    v = np.asarray(a[:N])
    y = v / np.linalg.norm(v) if np.linalg.norm(v) > 0.1 else -np.eye(N)[0]
    Z = np.random.default_rng(1).standard_normal((5, N))
    out = rotate_from_e1(y[None, :], Z)[0]
    assert np.allclose(out, Z @ rotation_between(np.eye(N)[0], y).T, atol=1e-12)
    assert np.allclose(np.linalg.norm(out, axis=1), np.linalg.norm(Z, axis=1))


def test_antipodal_axis():
    for N in (2, 3):
        e = np.eye(N)[0]
        out = rotate_from_e1(-e[None, :], e[None, :])[0, 0]
        assert np.allclose(out, -e)


@settings(max_examples=30, deadline=None)
@given(st.floats(2.01, 50.0), st.floats(0.01, 5.0), st.sampled_from([2, 3]))
def test_aperture_decreases_in_p(p, dp, N):
    assert aperture_for_exponent(N, p + dp) < aperture_for_exponent(N, p)


def test_sphere_grids():
    for N, M in ((2, 64), (3, 200)):
        g = sphere_grid(N, M)
        assert g.shape == (M, N)
        assert np.allclose(np.linalg.norm(g, axis=1), 1.0)
        assert np.allclose(g.mean(axis=0), 0.0, atol=1e-2)
    assert np.allclose(sphere_grid(2, 8)[0], [1.0, 0.0])


@pytest.mark.parametrize("tiny", [1e-10, 1e-7, 1e-4])
def test_nearly_antipodal_rotation(tiny):
    y = np.array([1.0, tiny]) / math.hypot(1.0, tiny)
    yt = np.array([-1.0, 0.0])
    R = rotation_between(y, yt)
    assert np.allclose(R @ y, yt, atol=1e-14)
    assert np.allclose(R.T @ R, np.eye(2), atol=1e-14)
