import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.optimize import brentq

from hsann import phase_diagram as pd
from hsann.errors import InsufficientDecay
from hsann.geometry import RadialSurface, SphereData, surface_centroid, translate_resample
from hsann.harmonics import SurfaceCoeffs


def modes(p, d):
    return SurfaceCoeffs.from_modes(p.k_max, d)


def area(c1, c2):
    """Enclosed area of r = 1 + c1 + c2 cos 2t by quadrature."""
    return quad(lambda t: 0.5 * (1 + c1 + c2 * math.cos(2 * t)) ** 2, 0, 2 * math.pi, epsabs=1e-14)[0]


def test_fit_exact_exponential():
    t = np.linspace(0, 3, 400)
    nu, resid = pd.fit_decay_rate(t, np.exp(-5 * t) ** 2)
    assert_allclose(nu, 5.0, rtol=1e-12)
    assert resid < 1e-12
    with pytest.raises(InsufficientDecay):
        pd.fit_decay_rate(t[:5], np.exp(-2 * t[:5]))
    with pytest.raises(InsufficientDecay):
        pd.fit_decay_rate(t, np.full(400, 1e-40))


def test_fit_uses_last_decade():
    t = np.linspace(0, 4, 200)
    amp = np.exp(-3 * t) + 0.5 * np.exp(-9 * t)
    nu, _ = pd.fit_decay_rate(t, amp**2)
    assert abs(nu - 3) < 0.01


def test_limit_radius_from_area(small_params):
    p = small_params
    assert_allclose(pd.limit_radius(modes(p, {(2, 1): 0.1}), p), math.sqrt(area(0, 0.1) / math.pi), rtol=1e-13)
    assert_allclose(pd.limit_radius(modes(p, {(2, 1): 0.1}), p), 1.002497, atol=5e-7)


def test_predict_limit_at_rest(small_params):
    p = small_params
    pred = pd.predict_limit(modes(p, {}), p)
    assert_allclose(pred.outer.center, 0.0, atol=1e-15)
    assert_allclose(pred.outer.radius, p.R, rtol=1e-15)
    assert_allclose(pred.inner.radius, p.mu / p.gamma * p.R, rtol=1e-15)


def test_predict_limit_of_shifted_circle(small_params):
    p = small_params
    eps = 0.01
    pred = pd.predict_limit(modes(p, {(1, 1): eps}), p)
    assert_allclose(pred.outer.radius, math.sqrt(1 + eps**2 / 2), rtol=1e-12)
    assert_allclose(pred.outer.center, [p.R * eps, 0.0], atol=eps**2)
    # the curve is already a circle up to O(eps^2): its centroid is the limit centre
    start = surface_centroid(RadialSurface(p.R, modes(p, {(1, 1): eps})), 256)
    assert_allclose(pred.outer.center, start, atol=1e-6)
    assert_allclose(pred.terminal_outer.radius, pred.outer.radius, atol=1e-8)
    assert_allclose(pred.inner.center, pred.outer.center)


def test_trivial_invariance(small_params):
    rep = pd.invariance_suite(modes(small_params, {(2, 1): 1e-2}), [0.0, 0.0], 1.0, 0.3, small_params)
    assert rep.translation_error <= 1e-12 and rep.dilation_error <= 1e-12
    assert rep.passed
    with pytest.raises(ValueError):
        pd.invariance_suite(modes(small_params, {}), [0, 0], 3.0, 0.1, small_params)


def test_graph_of_circle(small_params):
    p = small_params
    target = SphereData([0.02, -0.01], 1.1)
    g = pd.graph_of_circle(target, p)
    expect = translate_resample(RadialSurface(p.R, modes(p, {(0, 1): 0.1})), target.center, p.n_theta)
    assert_allclose(g.coeffs, expect.rho.coeffs, atol=1e-14)


def test_stable_manifold_without_perturbation(small_params):
    p = small_params
    target = SphereData([0.0, 0.0], 1.05)
    out = pd.stable_manifold_point(modes(p, {}), target, p)
    assert_allclose(out.coeffs, pd.graph_of_circle(target, p).coeffs, atol=1e-15)


def test_stable_manifold_mode_zero_matches_area_bisection(small_params):
    p = small_params
    pert = modes(p, {(2, 1): 1e-2})
    out = pd.stable_manifold_point(pert, SphereData([0.0, 0.0], 1.0), p)
    a0 = brentq(lambda a: area(a, 1e-2) - math.pi, -0.01, 0.01, xtol=1e-16)
    assert_allclose(out[(0, 1)], a0, atol=1e-12)
    assert_allclose(a0, -1e-4 / 4, rtol=1e-3)
    pred = pd.predict_limit(out, p)
    assert_allclose(pred.terminal_outer.center, [0, 0], atol=1e-5)
    assert_allclose(pred.terminal_outer.radius, 1.0, atol=1e-5)


def test_stable_manifold_distinct_corrections(small_params):
    p = small_params
    target = SphereData([0.0, 0.0], 1.0)
    a = pd.stable_manifold_point(modes(p, {(2, 1): 0.01, (3, 1): 0.01}), target, p)
    b = pd.stable_manifold_point(modes(p, {(2, 1): 0.01, (3, 1): -0.01}), target, p)
    assert np.max(np.abs(a.coeffs[:3] - b.coeffs[:3])) > 1e-6
    for point in (a, b):
        pred = pd.predict_limit(point, p)
        assert np.max(np.abs(pred.terminal_outer.center)) <= 1e-5
        assert abs(pred.terminal_outer.radius - 1.0) <= 1e-5


@pytest.mark.parametrize("case", [
    {(2, 1): 0.02},
    {(2, 1): 0.02, (1, 2): 0.01, (0, 1): 0.01, (3, 1): -0.01},
    {(1, 1): -0.02, (3, 2): 0.015},
    {(0, 1): -0.03, (2, 2): 0.01, (4, 1): 0.005},
    {(1, 1): 0.01, (1, 2): 0.01, (2, 1): -0.01, (5, 2): 0.004},
])
def test_fibre_decomposition(small_params, case):
    dec = pd.fibre_decomposition(modes(small_params, case), small_params)
    assert dec.error <= 1e-5
