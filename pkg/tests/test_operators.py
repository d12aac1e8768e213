import math

import numpy as np
import pytest
from conftest import random_field
from hypothesis import given, settings
from hypothesis import strategies as st

from membrane_sphere.axisym import CapSet
from membrane_sphere.energetics import indicator_coeffs
from membrane_sphere.initial import set_mean
from membrane_sphere.operators import (
    C_W,
    ModelParams,
    green_G,
    green_of_projection,
    height_residual,
    moment_projection,
    project_S,
    reformulation_residual,
)
from membrane_sphere.spectral import GridField, SpectralField, analyze, build_grid, integrate, laplace_beltrami, synthesize


def test_line_constant_by_quadrature():
    from scipy.integrate import quad

    val, _ = quad(lambda s: math.sqrt(2 * 0.25 * (s * s - 1) ** 2), -1, 1)
    assert abs(C_W - val) < 1e-13
    p = ModelParams(b=2.0, beta=3.0)
    assert p.b_hat == pytest.approx(2 * C_W) and p.beta_hat == pytest.approx(3 * C_W)


@pytest.mark.parametrize(
    "kw", [{"kappa": 0}, {"sigma": -1}, {"Lambda": -0.1}, {"b": 0}, {"epsilon": 0}, {"beta": 0}, {"alpha": 1.0}, {"R": 0}]
)
def test_model_params_validation(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_projection_examples(grid16):
    g = grid16
    assert np.all(project_S(SpectralField.constant(g, 3.0)).coeffs == 0)
    _, _, Z = g.points()
    assert np.max(np.abs(project_S(analyze(GridField(g, Z))).coeffs)) < 1e-14


def test_projection_of_cap_indicator():
    # chi has mean -cos(theta0) and nu_3 moment 2 pi R^2 sin^2(theta0)
    R, th0 = 1.3, 0.9
    g = build_grid(R, 64)
    chi = indicator_coeffs(g, CapSet.single(th0))
    assert abs(chi.mean() - (-math.cos(th0))) < 1e-13
    moment = R**2 * chi.coeffs[1, g.L_max] * math.sqrt(4 * math.pi / 3)
    assert abs(moment - 2 * math.pi * R**2 * math.sin(th0) ** 2) < 1e-12
    assert np.all(project_S(chi).coeffs[:2] == 0)


def test_projection_matches_moment_formula(grid16, rng):
    a = random_field(grid16, rng)
    vals = synthesize(a).values
    np.testing.assert_allclose(synthesize(project_S(a)).values, moment_projection(vals, grid16), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_projection_idempotent_and_orthogonal(seed):
    g = build_grid(1.0, 12)
    rng = np.random.default_rng(seed)
    a, b = random_field(g, rng), random_field(g, rng)
    pa = project_S(a)
    assert np.array_equal(project_S(pa).coeffs, pa.coeffs)
    # <P a, b - P b> = 0
    val = integrate(synthesize(pa).values * synthesize(b - project_S(b)).values, g)
    assert abs(val) < 1e-12 * max(1.0, np.sum(a.coeffs**2))


def test_green_unit_l2_mode():
    g = build_grid(1.0, 16)
    c = np.zeros(g.coeff_shape)
    c[2, g.L_max + 1] = 1.0
    eta = SpectralField(g, c)
    G = green_G(eta, ModelParams())
    np.testing.assert_allclose(G.coeffs, c / 6, atol=1e-16)


def test_green_zero_and_rejects_low_modes(grid16):
    p = ModelParams()
    assert np.all(green_G(SpectralField.zeros(grid16), p).coeffs == 0)
    with pytest.raises(ValueError):
        green_G(SpectralField.constant(grid16, 1.0), p)


@settings(max_examples=20, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    sigma=st.floats(0, 5),
    kappa=st.floats(0.1, 4),
    Lambda=st.floats(0, 3),
    R=st.floats(0.5, 2),
)
def test_green_defining_equation(seed, sigma, kappa, Lambda, R):
    g = build_grid(R, 16)
    p = ModelParams(kappa=kappa, sigma=sigma, Lambda=Lambda, R=R)
    eta = project_S(random_field(g, np.random.default_rng(seed)))
    G = green_G(eta, p)
    lhs = G * sigma - laplace_beltrami(G) * kappa
    res = np.max(np.abs(synthesize(lhs - eta * (kappa * Lambda)).values))
    assert res < 1e-10 * max(1.0, np.max(np.abs(synthesize(eta).values)) * kappa * Lambda)
    assert np.all(G.coeffs[:2] == 0)


def test_green_of_constant_is_zero(grid16):
    assert np.all(green_of_projection(SpectralField.constant(grid16, 0.4), ModelParams()).coeffs == 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), sigma=st.floats(0, 3), Lambda=st.floats(0, 2), alpha=st.floats(-0.9, 0.9))
def test_reformulation_and_height_residuals(seed, sigma, Lambda, alpha):
    g = build_grid(1.0, 20)
    p = ModelParams(sigma=sigma, Lambda=Lambda, alpha=alpha)
    phi = set_mean(random_field(g, np.random.default_rng(seed), 0.1), alpha)
    assert reformulation_residual(phi, p) < 1e-10
    assert height_residual(green_of_projection(phi, p), phi, p) < 1e-9
