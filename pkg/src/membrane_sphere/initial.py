"""Initial phase fields: constants, tanh caps/bands and random perturbations."""

from __future__ import annotations

import math

import numpy as np

from .axisym import Cap, CapSet
from .spectral import GridField, SpectralField, SphereGrid, analyze

__all__ = ["constant", "signed_distance", "tanh_caps", "tanh_cap", "tanh_band", "perturbed", "set_mean"]


def set_mean(phi: SpectralField, alpha: float) -> SpectralField:
    """Shift phi by a constant so that its surface mean equals alpha exactly."""
    c = phi.coeffs.copy()
    c[0, phi.grid.L_max] = alpha * math.sqrt(4.0 * math.pi)
    return SpectralField(phi.grid, c)


def constant(grid: SphereGrid, alpha: float) -> SpectralField:
    return SpectralField.constant(grid, alpha)


def signed_distance(grid: SphereGrid, capset: CapSet) -> np.ndarray:
    """Geodesic distance to the nearest cap edge, positive inside the caps."""
    theta = grid.theta
    d = np.full(theta.shape, -np.inf)
    for cap in capset.caps:
        if cap.pole == "north":
            d = np.maximum(d, grid.R * (cap.theta0 - theta))
        else:
            d = np.maximum(d, grid.R * (theta - (math.pi - cap.theta0)))
    return np.repeat(d[:, None], grid.n_phi, axis=1)


def tanh_caps(grid: SphereGrid, capset: CapSet, epsilon: float, alpha: float | None = None) -> SpectralField:
    """tanh(d / (sqrt(2) epsilon)) for the signed distance d to the caps.

    If ``alpha`` is given the mean is reset to it afterwards.
    """
    vals = np.tanh(signed_distance(grid, capset) / (math.sqrt(2.0) * epsilon))
    phi = analyze(GridField(grid, vals))
    return phi if alpha is None else set_mean(phi, alpha)


def tanh_cap(grid, theta0, epsilon, pole="north", alpha=None) -> SpectralField:
    return tanh_caps(grid, CapSet((Cap(pole, theta0),)), epsilon, alpha)


def tanh_band(grid, theta1, theta2, epsilon, alpha=None) -> SpectralField:
    """Phase +1 in the band theta1 < theta < theta2, -1 near both poles."""
    if not 0.0 < theta1 < theta2 < math.pi:
        raise ValueError("need 0 < theta1 < theta2 < pi")
    caps = CapSet((Cap("north", theta1), Cap("south", math.pi - theta2)))
    phi = -tanh_caps(grid, caps, epsilon)
    return phi if alpha is None else set_mean(phi, alpha)


def perturbed(
    base: SpectralField,
    amplitude: float,
    seed: int,
    max_degree: int | None = None,
    alpha: float | None = None,
) -> SpectralField:
    """Add a random perturbation of RMS ``amplitude`` with degrees 1..max_degree.

    The perturbation is drawn from ``numpy.random.default_rng(seed)`` so the
    result is reproducible.  The mean is restored to ``alpha`` (or to the mean
    of ``base``).
    """
    g = base.grid
    if max_degree is None:
        max_degree = max(1, g.L_max // 4)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(g.coeff_shape)
    mask = g.triangle & (g.degrees >= 1) & (g.degrees <= max_degree)
    noise = np.where(mask, noise, 0.0)
    rms = math.sqrt(float(np.sum(noise**2)) / (4.0 * math.pi))
    if rms > 0:
        noise *= amplitude / rms
    out = SpectralField(g, base.coeffs + noise)
    return set_mean(out, base.mean() if alpha is None else alpha)
