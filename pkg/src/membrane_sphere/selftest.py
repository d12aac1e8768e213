"""Quick invariant suite used by ``membrane-sphere selftest``."""

from __future__ import annotations

import math

import numpy as np

from . import initial as ini
from .axisym import CapSet, chi_legendre, sharp_energy_series
from .energetics import energy_diffuse, energy_J, energy_K, energy_reduced, energy_sharp_reduced, indicator_coeffs
from .flow import FlowParams, initial_state, step_imex
from .operators import ModelParams, green_of_projection, height_residual, project_S, reformulation_residual
from .spectral import SpectralField, analyze, build_grid, integrate, synthesize


def _random_field(grid, rng, decay=0.1):
    c = rng.standard_normal(grid.coeff_shape) * np.exp(-decay * grid.degrees)
    return SpectralField(grid, np.where(grid.triangle, c, 0.0))


def check_round_trip(rng):
    g = build_grid(1.3, 24)
    a = _random_field(g, rng, 0.0)
    err = np.max(np.abs(analyze(synthesize(a)).coeffs - a.coeffs))
    return err < 1e-12 * np.max(np.abs(a.coeffs)), f"max err {err:.2e}"


def check_parseval(rng):
    g = build_grid(0.7, 24)
    a = _random_field(g, rng, 0.0)
    lhs = integrate(synthesize(a).values ** 2, g)
    rhs = g.R**2 * float(np.sum(a.coeffs**2))
    return abs(lhs - rhs) < 1e-12 * rhs, f"rel {abs(lhs - rhs) / rhs:.2e}"


def check_area(rng):
    g = build_grid(2.0, 8)
    v = integrate(np.ones(g.shape), g)
    return abs(v - 4 * math.pi * 4.0) < 1e-13 * v, f"{v!r}"


def check_projection(rng):
    g = build_grid(1.0, 16)
    a = _random_field(g, rng)
    p1 = project_S(a)
    ok = np.array_equal(project_S(p1).coeffs, p1.coeffs)
    return ok, "idempotent" if ok else "not idempotent"


def check_operator_identities(rng):
    g = build_grid(1.0, 24)
    p = ModelParams(sigma=0.5, Lambda=1.2, epsilon=0.2, alpha=0.1)
    phi = ini.set_mean(_random_field(g, rng), p.alpha)
    u = green_of_projection(phi, p)
    r1 = reformulation_residual(phi, p)
    r2 = height_residual(u, phi, p)
    return r1 < 1e-10 and r2 < 1e-9, f"reform {r1:.1e}, height {r2:.1e}"


def check_energy_chain(rng):
    g = build_grid(1.0, 24)
    p = ModelParams(sigma=0.3, Lambda=0.8, epsilon=0.15, alpha=-0.2)
    phi = ini.set_mean(_random_field(g, rng), p.alpha)
    e1 = energy_diffuse(green_of_projection(phi, p), phi, p).total
    e2 = energy_reduced(phi, p)
    e3 = energy_J(phi, p) + energy_K(phi, p)
    rel = max(abs(e1 - e2), abs(e2 - e3)) / abs(e2)
    return rel < 1e-9, f"rel {rel:.1e}"


def check_sharp_oracle(rng):
    p = ModelParams(sigma=0.2, Lambda=1.0)
    cs = CapSet.two(1.0, 0.6)
    g = build_grid(1.0, 48)
    a = energy_sharp_reduced(cs, p, g)
    b = sharp_energy_series(cs, p, 48)
    c_err = np.max(np.abs(indicator_coeffs(g, cs).zonal() - chi_legendre(cs, 48).c))
    return abs(a - b) < 1e-6 * abs(b) and c_err < 1e-8, f"energy rel {abs(a - b) / abs(b):.1e}, coeff {c_err:.1e}"


def check_mass_and_energy(rng):
    g = build_grid(1.0, 32)
    p = ModelParams(epsilon=0.2, alpha=0.1)
    phi = ini.perturbed(ini.tanh_cap(g, 1.4, p.epsilon, alpha=p.alpha), 0.05, 3, alpha=p.alpha)
    fp = FlowParams(dt=2e-3, dt_max=2e-3)
    s = initial_state(phi, p, fp.dt)
    E = [s.energy]
    drift = 0.0
    for _ in range(20):
        s = step_imex(s, p, fp)
        E.append(s.energy)
        drift = max(drift, abs(s.phi.mean() - p.alpha))
    mono = all(b <= a for a, b in zip(E, E[1:]))
    return mono and drift < 1e-13, f"drift {drift:.1e}, monotone {mono}"


CHECKS = [
    ("spectral round trip", check_round_trip),
    ("parseval", check_parseval),
    ("surface area", check_area),
    ("projection idempotent", check_projection),
    ("operator identities", check_operator_identities),
    ("energy identity chain", check_energy_chain),
    ("sharp energy oracle", check_sharp_oracle),
    ("mass and energy decay", check_mass_and_energy),
]


def run_selftest(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    ok_all = True
    width = max(len(n) for n, _ in CHECKS)
    for name, fn in CHECKS:
        try:
            ok, info = fn(rng)
        except Exception as exc:  # report, do not abort the matrix
            ok, info = False, f"error: {exc}"
        ok_all &= bool(ok)
        out(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {info}")
    return ok_all
