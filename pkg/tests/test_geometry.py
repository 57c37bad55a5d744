import math

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose
from scipy.integrate import quad

from hsann import harmonics as hm
from hsann.errors import GeometryBreakdown, OutOfChart, ShapeError
from hsann.geometry import (
    RadialSurface, curvature, curvature_grid, curvature_linearization_symbol, dilate, enclosed_volume,
    surface_centroid, surface_integral, translate_resample,
)
from hsann.harmonics import SurfaceCoeffs


def surface(modes, k_max=8, R=1.0):
    return RadialSurface(R, SurfaceCoeffs.from_modes(k_max, modes))


def test_circle_curvature():
    theta = hm.uniform_angles(64)
    for R in (0.3, 1.0, 2.0):
        f = np.full(64, R)
        assert_allclose(curvature(f, 0 * f, 0 * f), 1 / R, rtol=1e-12)
    assert_allclose(curvature_grid(surface({(0, 1): 1.0}), 32), 0.5, rtol=1e-12)
    assert theta.size == 64


def test_curvature_of_ellipse_against_parametric_formula():
    a, b = 1.3, 0.8
    t = sp.symbols("t")
    r = a * b / sp.sqrt((b * sp.cos(t)) ** 2 + (a * sp.sin(t)) ** 2)
    funcs = [sp.lambdify(t, e, "numpy") for e in (r, sp.diff(r, t), sp.diff(r, t, 2))]
    theta = np.linspace(0.05, 6.2, 23)
    kappa = curvature(*(fn(theta) for fn in funcs))
    # parameter s of (a cos s, b sin s) with polar angle theta
    s = np.arctan2(a * np.sin(theta), b * np.cos(theta))
    expect = a * b / (a**2 * np.sin(s) ** 2 + b**2 * np.cos(s) ** 2) ** 1.5
    assert_allclose(kappa, expect, rtol=1e-12)


def test_curvature_linearization_in_mode_two():
    theta = hm.uniform_angles(128)
    eps = 1e-6
    s = surface({(0, 1): 0.0, (2, 1): eps})
    dk = (curvature_grid(s, 128) - 1.0) / eps
    assert_allclose(dk, 3 * np.cos(2 * theta), atol=1e-5)


def test_curvature_second_order_term():
    # the deviation from the linearisation at amplitude 0.01 is the eps^2 term of the exact series
    t, e = sp.symbols("t e")
    f = 1 + e * sp.cos(2 * t)
    fp, fpp = sp.diff(f, t), sp.diff(f, t, 2)
    kappa = (f**2 + 2 * fp**2 - f * fpp) / (f**2 + fp**2) ** sp.Rational(3, 2)
    second = sp.lambdify(t, sp.series(kappa, e, 0, 3).removeO().coeff(e, 2), "numpy")
    theta = hm.uniform_angles(128)
    eps = 0.01
    dev = curvature_grid(surface({(2, 1): eps}), 128) - (1 + 3 * eps * np.cos(2 * theta))
    assert_allclose(dev, eps**2 * second(theta), atol=50 * eps**3)
    assert_allclose(np.max(np.abs(dev)), 7 * eps**2, rtol=0.02)


def test_curvature_rejects_nonpositive_radius():
    with pytest.raises(GeometryBreakdown):
        curvature(np.array([1.0, -0.1]), np.zeros(2), np.zeros(2))


def test_rotation_index():
    s = surface({(2, 1): 0.1, (3, 2): -0.05, (5, 1): 0.02})
    theta, f, fp, _ = s.grids(256)
    kappa = curvature_grid(s, 256, truncate=False)
    assert_allclose(surface_integral(kappa, f, fp), 2 * np.pi, rtol=1e-8)


def test_surface_integral_examples():
    theta, f, fp, _ = surface({(0, 1): 1.0}).grids(64)
    assert_allclose(surface_integral(np.ones(64), f, fp), 4 * np.pi, rtol=1e-14)
    assert abs(surface_integral(np.cos(theta), f, fp)) < 1e-14
    theta, f, fp, _ = surface({(1, 1): 0.1}).grids(256)
    oracle, _ = quad(lambda t: math.hypot(1 + 0.1 * math.cos(t), 0.1 * math.sin(t)), 0, 2 * math.pi,
                     epsabs=1e-13, epsrel=1e-13, limit=200)
    assert_allclose(surface_integral(np.ones(256), f, fp), oracle, rtol=1e-13)
    assert abs(oracle - 2 * np.pi * 1.0025) <= 2 * np.pi * 1e-5
    with pytest.raises(ShapeError):
        surface_integral(np.ones(3), np.ones(4), np.ones(4))


def test_enclosed_volume_examples():
    assert_allclose(enclosed_volume(surface({})), np.pi, rtol=1e-14)
    s = surface({(2, 1): 0.1})
    assert_allclose(enclosed_volume(s), np.pi * (1 + 0.1**2 / 2), rtol=1e-14)
    assert_allclose(enclosed_volume(s), 3.157300, atol=5e-7)
    assert_allclose(enclosed_volume(dilate(s, 1.3)), 1.3**2 * enclosed_volume(s), rtol=1e-12)


def test_centroid_examples():
    assert_allclose(surface_centroid(surface({(2, 1): 0.1})), [0, 0], atol=1e-15)
    w = lambda t: math.hypot(1 + 0.1 * math.cos(t), 0.1 * math.sin(t))
    length = quad(w, 0, 2 * math.pi, epsabs=1e-14)[0]
    x = quad(lambda t: (1 + 0.1 * math.cos(t)) * math.cos(t) * w(t), 0, 2 * math.pi, epsabs=1e-14)[0]
    c = surface_centroid(surface({(1, 1): 0.1}))
    assert_allclose(c, [x / length, 0.0], atol=1e-13)
    assert_allclose(c[0], 0.0997506236, atol=1e-10)


def test_translated_unit_circle():
    moved = translate_resample(surface({}, k_max=32), [0.3, 0.0], 512)
    theta = np.array([0.0, np.pi, 1.0, 2.5])
    expect = 0.3 * np.cos(theta) + np.sqrt(1 - 0.09 * np.sin(theta) ** 2)
    assert_allclose(moved.radius(theta), expect, atol=1e-10)
    assert_allclose(moved.radius([0.0, np.pi]), [1.3, 0.7], atol=1e-10)
    assert translate_resample(moved, [0.0, 0.0]) is moved


def test_translation_group_properties():
    s = surface({(2, 1): 0.03, (3, 2): 0.01}, k_max=24)
    z = np.array([0.05, -0.02])
    moved = translate_resample(s, z, 256)
    back = translate_resample(moved, -z, 256)
    assert_allclose(back.rho.coeffs, s.rho.coeffs, atol=1e-10)
    assert_allclose(enclosed_volume(moved), enclosed_volume(s), rtol=1e-9)
    assert_allclose(surface_centroid(moved), surface_centroid(s) + z, atol=1e-9)


def test_translation_losing_star_shape():
    with pytest.raises(GeometryBreakdown):
        translate_resample(surface({}), [1.2, 0.0])


def test_dilation():
    s = surface({})
    d = dilate(s, 1.2)
    assert_allclose(d.rho.coeffs[0], 0.2, rtol=1e-15)
    assert not np.any(d.rho.coeffs[1:])
    s = surface({(2, 1): 0.1, (1, 2): 0.05})
    assert dilate(s, 1.0).rho == s.rho
    assert_allclose(dilate(dilate(s, 1.7), 1 / 1.7).rho.coeffs, s.rho.coeffs, atol=1e-14)
    assert_allclose(curvature_grid(dilate(s, 1.5), 64), curvature_grid(s, 64) / 1.5, rtol=1e-10)
    with pytest.raises(OutOfChart):
        dilate(s, 2.5)


def test_linearization_symbol():
    assert curvature_linearization_symbol(1, 0.7) == 0.0
    assert curvature_linearization_symbol(1, 2.0, n=4) == 0.0
    assert_allclose(curvature_linearization_symbol(0, 0.5), -1 / 0.5)
    assert curvature_linearization_symbol(2, 1.0) == 3.0


def test_centroid_follows_rigid_translation():
    # radius 2 keeps the origin inside after a shift by (1, 0)
    s = surface({(0, 1): 1.0}, k_max=64)
    moved = translate_resample(s, [1.0, 0.0], 1024)
    assert_allclose(surface_centroid(moved, 1024), [1.0, 0.0], atol=1e-10)
