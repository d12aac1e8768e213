import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from membrane_sphere import initial as ini
from membrane_sphere.energetics import energy_reduced
from membrane_sphere.flow import (
    FlowDiagnostics,
    FlowDivergence,
    FlowParams,
    el_residuals,
    flow_rhs,
    initial_state,
    run_flow,
    step_imex,
)
from membrane_sphere.operators import ModelParams
from membrane_sphere.spectral import GridField, SpectralField, analyze, build_grid, integrate, synthesize


@pytest.fixture(scope="module")
def band_setup():
    g = build_grid(1.0, 32)
    p = ModelParams(epsilon=0.2, alpha=0.1, sigma=0.2)
    phi = ini.perturbed(ini.tanh_band(g, 1.1, 2.0, p.epsilon, p.alpha), 0.1, seed=5, alpha=p.alpha)
    return g, p, phi


def test_flow_params_validation():
    with pytest.raises(ValueError):
        FlowParams(dt=1.0, dt_max=0.1)
    with pytest.raises(ValueError):
        FlowParams(energy_tol=-1)
    with pytest.raises(ValueError):
        FlowParams(grow=0.5)


def test_rhs_is_mean_free_and_vanishes_on_constants(band_setup):
    g, p, phi = band_setup
    rhs, lam, u = flow_rhs(phi, p)
    assert rhs.coeffs[0, g.L_max] == 0.0
    assert abs(integrate(synthesize(rhs).values, g)) < 1e-12
    rhs0, lam0, u0 = flow_rhs(SpectralField.constant(g, p.alpha), p)
    assert np.max(np.abs(rhs0.coeffs)) < 1e-13
    # multiplier of a constant state: (b/eps) W'(alpha) + kappa Lambda^2 alpha
    a = p.alpha
    assert lam0 == pytest.approx(p.b / p.epsilon * a * (a * a - 1) + p.kappa * p.Lambda**2 * a, rel=1e-12)
    assert np.all(u0.coeffs == 0)


def test_rhs_requires_mean(band_setup):
    g, p, phi = band_setup
    with pytest.raises(ValueError):
        flow_rhs(phi + SpectralField.constant(g, 0.01), p)
    with pytest.raises(ValueError):
        initial_state(phi + SpectralField.constant(g, 0.1), p)


def test_rhs_is_negative_energy_gradient(band_setup):
    # d/ds E(phi + s v) = -beta eps <rhs, v> for mean-free v
    g, p, phi = band_setup
    rng = np.random.default_rng(1)
    c = rng.standard_normal(g.coeff_shape) * np.exp(-0.3 * g.degrees)
    c = np.where(g.triangle, c, 0.0)
    c[0, g.L_max] = 0.0
    v = SpectralField(g, c)
    h = 1e-6
    dE = (energy_reduced(phi + v * h, p) - energy_reduced(phi + v * (-h), p)) / (2 * h)
    rhs, _, _ = flow_rhs(phi, p)
    # the grid quadrature integrates W'(phi) v exactly for band-limited v
    pair = g.R**2 * float(np.sum(rhs.coeffs * c))
    assert dE == pytest.approx(-p.beta * p.epsilon * pair, rel=1e-6)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), alpha=st.floats(-0.5, 0.5), dt=st.floats(1e-3, 5e-2))
def test_mass_and_energy_decay(seed, alpha, dt):
    g = build_grid(1.0, 16)
    p = ModelParams(epsilon=0.25, alpha=alpha, Lambda=0.7)
    phi0 = ini.perturbed(ini.constant(g, alpha), 0.3, seed=seed, alpha=alpha)
    fp = FlowParams(dt=dt, dt_max=dt)
    s = initial_state(phi0, p, dt)
    for _ in range(15):
        new = step_imex(s, p, fp)
        assert new.energy <= s.energy
        assert abs(new.phi.mean() - alpha) < 1e-12
        s = new
    assert s.energy == pytest.approx(energy_reduced(s.phi, p), rel=1e-10, abs=1e-10)


def test_step_commutes_with_axial_rotation(band_setup):
    g, p, phi = band_setup
    shift = 5
    vals = synthesize(phi).values
    rot = analyze(GridField(g, np.roll(vals, shift, axis=1)))
    fp = FlowParams(dt=0.01, dt_max=0.01)
    a = step_imex(initial_state(phi, p, fp.dt), p, fp)
    b = step_imex(initial_state(rot, p, fp.dt), p, fp)
    diff = np.roll(synthesize(a.phi).values, shift, axis=1) - synthesize(b.phi).values
    assert np.max(np.abs(diff)) < 1e-10


def test_constant_initial_data_converges_immediately():
    g = build_grid(1.0, 16)
    p = ModelParams(alpha=0.2)
    diag, state = run_flow(ini.constant(g, p.alpha), p, FlowParams())
    assert len(diag) == 1 and diag.status == "converged"
    assert state.step_count == 0


def test_run_flow_reaches_t_end_and_records_rows(band_setup):
    g, p, phi = band_setup
    fp = FlowParams(dt=0.02, dt_max=0.02, t_end=0.5, stop_tol=0.0)
    seen = []
    diag, state = run_flow(phi, p, replace(fp, snapshot_every=10), on_snapshot=seen.append)
    assert diag.status == "t_end"
    assert state.t == pytest.approx(0.5, abs=1e-12)
    assert state.step_count == 25
    assert [s.step_count for s in seen] == [0, 10, 20, 25]
    rows = diag.rows()
    assert len(rows) == 26 and len(rows[0]) == len(FlowDiagnostics.COLUMNS)
    E = [r[1] for r in rows]
    assert all(b <= a for a, b in zip(E, E[1:]))
    assert max(abs(r[4] - p.alpha) for r in rows) < 1e-14
    # J + K equals the recomputed reduced energy
    for r in rows[::5]:
        assert r[2] + r[3] == pytest.approx(r[1], rel=1e-8)


def test_resume_matches_uninterrupted(band_setup):
    g, p, phi = band_setup
    fp = FlowParams(dt=0.02, dt_max=0.02, t_end=0.4, stop_tol=0.0)
    _, full = run_flow(phi, p, fp)
    _, half = run_flow(phi, p, replace(fp, t_end=0.2))
    _, rest = run_flow(None, p, fp, state=half)
    assert np.array_equal(full.phi.coeffs, rest.phi.coeffs)


def test_relaxation_reaches_equilibrium():
    g = build_grid(1.0, 32)
    p = ModelParams(epsilon=0.2, alpha=-math.cos(1.0))
    phi = ini.tanh_cap(g, 1.0, p.epsilon, alpha=p.alpha)
    diag, state = run_flow(phi, p, FlowParams(dt=0.02, dt_max=0.02, t_end=50, stop_tol=1e-8))
    assert diag.status == "converged"
    r1, r2 = el_residuals(state, p)
    assert r1 <= p.beta * p.epsilon * 1e-8 * (1 + 1e-6) and r2 < 1e-10


def test_divergence_is_reported(band_setup):
    g, p, phi = band_setup
    with pytest.raises(FlowDivergence) as info:
        run_flow(phi, p, FlowParams(diverge_at=0.5))
    assert info.value.diagnostics.status == "diverged"
    assert info.value.state is not None
